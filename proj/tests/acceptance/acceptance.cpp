// Release gate. Each criterion prints exactly one PASS/FAIL line with the
// quantity it measured; the process exits nonzero if any line fails. All
// tolerances and seeds live in the constants below so a reader can audit the
// bar without digging through the checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "reqnn/certify.hpp"
#include "reqnn/dataset.hpp"
#include "reqnn/presets.hpp"
#include "reqnn/train.hpp"

using namespace reqnn;

namespace {

// Layerwise equivariance: the strictest bar, pure quaternion arithmetic.
constexpr std::size_t kLayerTrials = 1000;
constexpr double kLayerTol = 1e-11;
constexpr double kLayerBudgetSecs = 60.0;
// Whole-network feature equivariance and logit invariance.
constexpr std::size_t kNetTrials = 100;
constexpr double kNetTol = 1e-9;
// Permutation checks: structures must match exactly, logits to round-off.
constexpr std::size_t kPermTrials = 100;
constexpr double kPermLogitTol = 1e-6;
// Central-difference gradient audit.
constexpr double kGradStep = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr std::uint64_t kGradSeed = 10; // keeps every unit off the relu kinks
// Mutation audit.
constexpr std::size_t kMutantTrials = 100;
// Rotated-set classification, no rotation augmentation during training.
constexpr double kQuatAccFloor = 0.90;
constexpr double kTwinAccCeil = 0.70;
constexpr double kClsBudgetSecs = 600.0;
// Autoencoder reconstruction and latent-space rotation.
constexpr double kChamferGate = 0.05;
constexpr double kDecodeTol = 1e-9;

bool g_all_pass = true;

void report(int id, const char* what, bool pass, const std::string& metric) {
    std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what, metric.c_str());
    std::fflush(stdout);
    if (!pass) g_all_pass = false;
}

double elapsed(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

PointCloud random_cloud(std::size_t n, rng::Stream& rng) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {rng.normal(), rng.normal(), rng.normal()};
    return PointCloud::from_vectors(pts);
}

const std::vector<std::string>& cls_presets() {
    static const std::vector<std::string> v{"micro-pointnet-cls", "micro-pointnetpp-cls",
                                            "micro-edgeconv-cls"};
    return v;
}

void criterion1_layer_equivariance() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto reports = cert::certify_all_layers(kLayerTrials, kLayerTol, 101);
    double worst = 0.0;
    bool ok = reports.size() == 9;
    for (const auto& r : reports) {
        worst = std::max(worst, r.max_relative_error);
        ok = ok && r.pass();
    }
    const double secs = elapsed(t0);
    ok = ok && secs <= kLayerBudgetSecs;
    report(1, "every quaternion layer commutes with rotation", ok,
           std::to_string(reports.size()) + " subjects x " + std::to_string(kLayerTrials) +
               " trials, max rel err " + fmt(worst) + " vs " + fmt(kLayerTol) + ", " +
               fmt(secs) + "s vs " + fmt(kLayerBudgetSecs) + "s");
}

void criterion2_network_equivariance() {
    bool ok = true;
    double worst = 0.0;
    std::uint64_t seed = 201;
    for (const auto& name : net::preset_names()) {
        auto n = net::Network::build(net::preset_spec(name));
        const auto r = cert::certify_network_equivariance(n, kNetTrials, kNetTol, seed++);
        ok = ok && r.pass();
        worst = std::max(worst, r.max_relative_error);
    }
    // Composition: three rotations applied in sequence must act like their
    // product on the feature map.
    auto n = net::Network::build(net::preset_spec("micro-pointnet-cls"));
    rng::Stream rng(205);
    for (std::size_t t = 0; t < kNetTrials; ++t) {
        const PointCloud cloud = random_cloud(n.spec().input_points, rng);
        const Rotor r1 = random_rotor(rng), r2 = random_rotor(rng), r3 = random_rotor(rng);
        const Rotor product = compose(r3, compose(r2, r1));
        const QTensor lhs = n.quaternion_module_output(
            rotate_cloud(r3, rotate_cloud(r2, rotate_cloud(r1, cloud))));
        const QTensor rhs = rotate_tensor(product, n.quaternion_module_output(cloud));
        const double e = cert::rel_err(lhs, rhs);
        worst = std::max(worst, e);
        ok = ok && e <= kNetTol;
    }
    report(2, "network features commute with single and composed rotations", ok,
           std::to_string(kNetTrials) + " rotors per preset, max rel err " + fmt(worst) +
               " vs " + fmt(kNetTol));
}

void criterion3_logit_invariance() {
    bool ok = true;
    double worst = 0.0;
    std::uint64_t seed = 301;
    for (const auto& name : cls_presets()) {
        auto n = net::Network::build(net::preset_spec(name));
        const auto r = cert::certify_output_invariance(n, kNetTrials, kNetTol, seed++);
        ok = ok && r.pass();
        worst = std::max(worst, r.max_relative_error);
    }
    report(3, "classifier logits are invariant to input rotation", ok,
           std::to_string(kNetTrials) + " rotations per preset, max rel err " + fmt(worst) +
               " vs " + fmt(kNetTol));
}

void criterion4_permutation() {
    bool ok = true;
    std::uint64_t seed = 401;
    for (cert::GeometrySubject s :
         {cert::GeometrySubject::CentroidFps, cert::GeometrySubject::GroupBallKnn,
          cert::GeometrySubject::GroupKnn, cert::GeometrySubject::KnnGraph}) {
        const auto r = cert::certify_permutation_invariance(s, kPermTrials, seed++);
        ok = ok && r.pass() && r.max_relative_error == 0.0;
    }
    double worst = 0.0;
    for (const auto& name : cls_presets()) {
        auto n = net::Network::build(net::preset_spec(name));
        const auto r = cert::certify_permutation_logits(n, kPermTrials, kPermLogitTol, seed++);
        ok = ok && r.pass();
        worst = std::max(worst, r.max_relative_error);
    }
    report(4, "grouping structures and logits survive input permutation", ok,
           std::to_string(kPermTrials) + " shuffles, structures exact, logit rel err " +
               fmt(worst) + " vs " + fmt(kPermLogitTol));
}

void criterion5_gradcheck() {
    bool ok = true;
    double worst = 0.0;
    std::size_t scalars = 0;
    for (const auto& name : net::preset_names()) {
        auto n = net::Network::build(net::gradcheck_spec(name, kGradSeed));
        const auto r = cert::gradcheck(n, kGradStep, kGradTol, kGradSeed);
        ok = ok && r.pass() && r.trials == n.param_scalar_count();
        worst = std::max(worst, r.max_relative_error);
        scalars += r.trials;
    }
    report(5, "analytic gradients match central differences on every parameter", ok,
           std::to_string(scalars) + " scalars, h " + fmt(kGradStep) + ", max rel err " +
               fmt(worst) + " vs " + fmt(kGradTol));
}

void criterion6_mutation_audit() {
    const auto audit = cert::run_mutation_audit(kMutantTrials, 601);
    bool ok = audit.reports.size() == 4 && audit.all_detected();
    std::string names;
    for (const auto& r : audit.reports) {
        names += (names.empty() ? "" : ", ") + r.subject + (r.pass() ? ":MISSED" : "");
    }
    report(6, "planted defects are rejected by the certificates", ok,
           std::to_string(kMutantTrials) + " trials: " + names);
}

void criterion7_rotated_classification() {
    const auto t0 = std::chrono::steady_clock::now();
    int quat_wins = 0, twin_wins = 0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        const net::NetworkSpec spec = net::preset_spec("micro-pointnet-cls", seed);

        data::DatasetSpec ds;
        ds.points = spec.input_points;
        ds.seed = seed;
        const data::Dataset data = data::synth_dataset(ds);

        net::SgdConfig cfg;
        cfg.epochs = 40;
        cfg.lr = 0.002;
        cfg.seed = seed;

        auto n = net::Network::build(spec);
        net::train_classifier(n, data.train, cfg);
        const double acc = net::evaluate_accuracy(n, data.rotated_test);

        auto twin = net::Network::build(net::derive_twin(spec));
        net::train_classifier(twin, data.train, cfg);
        const double twin_acc = net::evaluate_accuracy(twin, data.rotated_test);

        quat_wins += acc >= kQuatAccFloor ? 1 : 0;
        twin_wins += twin_acc <= kTwinAccCeil ? 1 : 0;
        detail += " s" + std::to_string(seed) + ":" + fmt(acc) + "/" + fmt(twin_acc);
    }
    const double secs = elapsed(t0);
    const bool ok = quat_wins >= 2 && twin_wins >= 2 && secs <= kClsBudgetSecs;
    report(7, "quaternion net classifies rotated shapes, its real twin cannot", ok,
           "rotated acc quat/twin" + detail + ", floors " + fmt(kQuatAccFloor) + "/" +
               fmt(kTwinAccCeil) + ", " + fmt(secs) + "s vs " + fmt(kClsBudgetSecs) + "s");
}

void criterion8_autoencoder() {
    const net::NetworkSpec spec = net::preset_spec("micro-pointnet-ae", 7);

    data::DatasetSpec ds;
    ds.points = spec.input_points;
    ds.seed = 7;
    const data::Dataset data = data::synth_dataset(ds);

    net::SgdConfig cfg;
    cfg.epochs = 400;
    cfg.lr = 0.02;
    cfg.lr_decay = 0.997;
    cfg.seed = 7;

    auto n = net::Network::build(spec);
    const auto t0 = std::chrono::steady_clock::now();
    net::train_autoencoder(n, data.train, cfg);
    const double secs = elapsed(t0);
    const double train_ch = net::evaluate_chamfer(n, data.train);

    // Rotating the latent code must move the decoded cloud rigidly.
    const PointCloud& probe = data.test.front();
    const QTensor z = n.encode(probe);
    const QTensor decoded = n.decode(z);
    struct Case {
        Vec3 axis;
        double angle;
    };
    const Case cases[] = {
        {{0.46, 0.68, 0.56}, M_PI / 3.0},
        {{-0.44, -0.61, 0.66}, M_PI / 4.0},
        {{0.34, 0.94, 0.0}, M_PI / 6.0},
        {{0.16, 0.83, 0.53}, 2.0 * M_PI / 3.0},
    };
    double worst = 0.0;
    for (const Case& c : cases) {
        const Rotor r = Rotor::from_axis_angle(c.axis, c.angle);
        const QTensor from_latent = n.decode(rotate_tensor(r, z));
        const QTensor from_points = rotate_tensor(r, decoded);
        worst = std::max(worst, net::chamfer(from_latent, from_points).loss);
    }
    const bool ok = train_ch <= kChamferGate && worst <= kDecodeTol;
    report(8, "autoencoder reconstructs and decodes rotated latents rigidly", ok,
           "train chamfer " + fmt(train_ch) + " vs " + fmt(kChamferGate) +
               ", latent-rotation chamfer " + fmt(worst) + " vs " + fmt(kDecodeTol) + ", " +
               fmt(secs) + "s");
}

void criterion9_complexity() {
    bool ok = true;
    double worst_ratio = 0.0;
    for (const auto& name : net::preset_names()) {
        const auto rep = net::count_complexity(net::preset_spec(name));
        const double ratio =
            static_cast<double>(rep.flops) / static_cast<double>(rep.twin_flops);
        worst_ratio = std::max(worst_ratio, ratio);
        ok = ok && rep.params <= rep.twin_params && rep.flops < 3 * rep.twin_flops;
    }
    report(9, "every preset stays within its real twin's parameter and flop budget", ok,
           "params <= twin for all, worst flop ratio " + fmt(worst_ratio) + " vs 3");
}

} // namespace

int main() {
    criterion1_layer_equivariance();
    criterion2_network_equivariance();
    criterion3_logit_invariance();
    criterion4_permutation();
    criterion5_gradcheck();
    criterion6_mutation_audit();
    criterion7_rotated_classification();
    criterion8_autoencoder();
    criterion9_complexity();
    return g_all_pass ? 0 : 1;
}
