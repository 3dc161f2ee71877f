// reqnn command line tool.
//
// Subcommands:
//   certify     run the equivariance / invariance certificate suites
//   train       train a preset on the synthetic shape dataset
//   eval        evaluate a checkpoint on the (rotated) test split
//   reconstruct autoencoder demo: decode rotated features vs rotate the
//               decoded cloud, emit all clouds as files
//   complexity  parameter / flop report against the derived twin
//   bench       wall time per operation
//
// Exit codes: 0 success, 1 a checked property or experiment bound failed,
// 2 usage or input errors.

#include <CLI11.hpp>

#include "reqnn/reqnn.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reqnn;

namespace {

struct CommonOpts {
    std::uint64_t seed = 1;
    std::size_t trials = 200;
    double tol = -1.0; // negative: per-suite default
    std::string preset;
    std::string spec_path;
    std::string out_dir = "reqnn-out";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "base RNG seed");
    cmd->add_option("--trials", o.trials, "trial count for randomized checks");
    cmd->add_option("--tol", o.tol, "tolerance override (default: per-suite)");
    cmd->add_option("--preset", o.preset, "architecture preset name");
    cmd->add_option("--spec", o.spec_path, "network spec JSON file");
    cmd->add_option("--out", o.out_dir, "output directory");
}

double tol_or(const CommonOpts& o, double dflt) { return o.tol < 0.0 ? dflt : o.tol; }

fs::path ensure_out(const CommonOpts& o) {
    fs::path dir(o.out_dir);
    fs::create_directories(dir);
    return dir;
}

net::NetworkSpec load_spec_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open spec file '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return net::spec_from_json(j);
}

/// One spec from --spec/--preset, or all shipped presets when neither is set.
std::vector<net::NetworkSpec> resolve_specs(const CommonOpts& o) {
    std::vector<net::NetworkSpec> specs;
    if (!o.spec_path.empty()) {
        auto s = load_spec_file(o.spec_path);
        s.seed = o.seed;
        specs.push_back(std::move(s));
    } else if (!o.preset.empty()) {
        specs.push_back(net::preset_spec(o.preset, o.seed));
    } else {
        for (const auto& name : net::preset_names()) {
            specs.push_back(net::preset_spec(name, o.seed));
        }
    }
    return specs;
}

net::NetworkSpec resolve_one_spec(const CommonOpts& o, const std::string& default_preset) {
    if (!o.spec_path.empty()) {
        auto s = load_spec_file(o.spec_path);
        s.seed = o.seed;
        return s;
    }
    return net::preset_spec(o.preset.empty() ? default_preset : o.preset, o.seed);
}

double parse_number(const std::string& tok, const std::string& what) {
    double v = 0.0;
    if (!io::detail::parse_double(tok, v)) throw ParseError("bad " + what + " '" + tok + "'");
    return v;
}

/// Angles accept plain radians plus "pi" forms: pi, pi/4, 2pi/3, 2*pi/3, -pi.
double parse_angle(const std::string& raw) {
    std::string s;
    for (char c : raw) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    const auto pos = s.find("pi");
    if (pos == std::string::npos) return parse_number(s, "angle");
    double mult = 1.0, div = 1.0;
    std::string pre = s.substr(0, pos), post = s.substr(pos + 2);
    if (!pre.empty() && pre.back() == '*') pre.pop_back();
    if (pre == "-") {
        mult = -1.0;
    } else if (!pre.empty()) {
        mult = parse_number(pre, "angle");
    }
    if (!post.empty()) {
        if (post.front() != '/' || post.size() < 2) throw ParseError("bad angle '" + raw + "'");
        div = parse_number(post.substr(1), "angle");
    }
    if (div == 0.0) throw ParseError("bad angle '" + raw + "': zero divisor");
    return mult * std::numbers::pi / div;
}

Vec3 parse_axis(const std::string& raw) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : raw) {
        if (c == ',') {
            toks.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    toks.push_back(cur);
    if (toks.size() != 3) throw ParseError("axis '" + raw + "' needs three comma-separated values");
    return {parse_number(toks[0], "axis"), parse_number(toks[1], "axis"),
            parse_number(toks[2], "axis")};
}

void print_report(const cert::CertReport& r) {
    std::cout << (r.pass() ? "PASS" : "FAIL") << "  " << r.subject << " [" << r.property
              << "]  trials=" << r.trials << "  max_err=" << r.max_relative_error
              << "  tol=" << r.tolerance;
    if (r.tie_resamples > 0) std::cout << "  resamples=" << r.tie_resamples;
    std::cout << "\n";
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

int cmd_certify(CommonOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const double layer_tol = tol_or(o, 1e-11);
    const double net_tol = o.tol < 0.0 ? 1e-9 : o.tol;
    const double perm_tol = o.tol < 0.0 ? 1e-6 : o.tol;

    std::vector<cert::CertReport> reports;

    for (auto r : cert::certify_all_layers(o.trials, layer_tol, o.seed)) {
        reports.push_back(std::move(r));
    }
    const cert::GeometrySubject geo[] = {
        cert::GeometrySubject::CentroidFps,
        cert::GeometrySubject::GroupBallKnn,
        cert::GeometrySubject::GroupKnn,
        cert::GeometrySubject::KnnGraph,
    };
    std::uint64_t salt = 0x9e0;
    for (auto g : geo) {
        reports.push_back(cert::certify_permutation_invariance(g, o.trials, o.seed + salt++));
    }

    for (const auto& spec : resolve_specs(o)) {
        net::Network n = net::Network::build(spec);
        const bool quaternion_front = spec.layers.empty()
                                          ? false
                                          : !net::detail::is_real_op(spec.layers.front().op);
        if (quaternion_front) {
            reports.push_back(cert::certify_network_equivariance(n, o.trials, net_tol, o.seed));
            if (spec.classes > 0) {
                reports.push_back(
                    cert::certify_output_invariance(n, o.trials, net_tol, o.seed + 1));
            }
        }
        if (spec.classes > 0) {
            reports.push_back(cert::certify_permutation_logits(n, o.trials, perm_tol, o.seed + 2));
        }
    }

    if (o.spec_path.empty()) {
        const auto& names = net::preset_names();
        for (const auto& name : o.preset.empty() ? names : std::vector<std::string>{o.preset}) {
            net::Network tiny = net::Network::build(net::gradcheck_spec(name, o.seed));
            reports.push_back(cert::gradcheck(tiny, 1e-4, 1e-4, o.seed + 3));
        }
    }

    const auto audit = cert::run_mutation_audit(std::min<std::size_t>(o.trials, 100), o.seed);

    bool pass = true;
    json jreports = json::array();
    for (const auto& r : reports) {
        print_report(r);
        pass = pass && r.pass();
        jreports.push_back(r.to_json());
    }
    json jaudit = json::array();
    for (const auto& r : audit.reports) {
        std::cout << (r.pass() ? "NOT DETECTED" : "detected") << "  mutant " << r.subject << " ["
                  << r.property << "]  max_err=" << r.max_relative_error << "\n";
        jaudit.push_back(r.to_json());
    }
    pass = pass && audit.all_detected();

    const auto dir = ensure_out(o);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json doc{{"pass", pass},
             {"seed", o.seed},
             {"trials", o.trials},
             {"seconds", secs},
             {"reports", jreports},
             {"mutation_audit", jaudit}};
    std::ofstream(dir / "certify_report.json") << doc.dump(2) << "\n";
    std::cout << (pass ? "all certificates hold" : "CERTIFICATION FAILED") << " (" << secs
              << " s), report: " << (dir / "certify_report.json").string() << "\n";
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::size_t epochs = 0; // 0: per-preset default
    double lr = -1.0;
    double lr_decay = 1.0;
    double momentum = 0.9;
    std::size_t batch = 16;
    std::size_t train_count = 300;
    std::size_t test_count = 150;
    bool twin = false;
};

data::DatasetSpec dataset_for(const net::NetworkSpec& spec, const CommonOpts& o, const TrainOpts& t) {
    data::DatasetSpec ds;
    ds.points = spec.input_points;
    ds.train_count = t.train_count;
    ds.test_count = t.test_count;
    ds.seed = o.seed;
    return ds;
}

int cmd_train(CommonOpts& o, TrainOpts& t) {
    net::NetworkSpec spec = resolve_one_spec(o, "micro-pointnet-cls");
    if (t.twin) spec = net::derive_twin(spec);
    const bool classifier = spec.classes > 0;

    const data::Dataset data = data::synth_dataset(dataset_for(spec, o, t));
    net::Network n = net::Network::build(spec);

    net::SgdConfig cfg;
    cfg.seed = o.seed;
    cfg.momentum = t.momentum;
    cfg.batch = t.batch;
    cfg.epochs = t.epochs > 0 ? t.epochs : (classifier ? 40 : 150);
    cfg.lr = t.lr > 0.0 ? t.lr : (classifier ? 0.002 : 0.02);
    cfg.lr_decay = t.lr_decay;

    const auto dir = ensure_out(o);
    std::ofstream log(dir / "train_log.ndjson");
    const auto t0 = std::chrono::steady_clock::now();
    const net::TrainResult result = classifier ? net::train_classifier(n, data.train, cfg, &log)
                                               : net::train_autoencoder(n, data.train, cfg, &log);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path ckpt = dir / "model.rqnn";
    net::save_checkpoint(ckpt.string(), n);

    json summary{{"preset", spec.name},
                 {"seed", o.seed},
                 {"epochs", cfg.epochs},
                 {"lr", cfg.lr},
                 {"final_loss", result.final_loss()},
                 {"seconds", secs},
                 {"checkpoint", ckpt.string()}};
    if (classifier) {
        summary["train_acc"] = net::evaluate_accuracy(n, data.train);
        summary["test_acc"] = net::evaluate_accuracy(n, data.test);
        summary["rotated_test_acc"] = net::evaluate_accuracy(n, data.rotated_test);
    } else {
        summary["train_chamfer"] = net::evaluate_chamfer(n, data.train);
        summary["test_chamfer"] = net::evaluate_chamfer(n, data.test);
    }
    std::ofstream(dir / "train_summary.json") << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(CommonOpts& o, TrainOpts& t, const std::string& checkpoint) {
    net::NetworkSpec spec = resolve_one_spec(o, "micro-pointnet-cls");
    if (t.twin) spec = net::derive_twin(spec);
    net::Network n = net::Network::build(spec);
    net::load_checkpoint(checkpoint, n);

    const data::Dataset data = data::synth_dataset(dataset_for(spec, o, t));
    json result{{"preset", spec.name}, {"checkpoint", checkpoint}, {"seed", o.seed}};
    if (spec.classes > 0) {
        result["test_acc"] = net::evaluate_accuracy(n, data.test);
        result["rotated_test_acc"] = net::evaluate_accuracy(n, data.rotated_test);
    } else {
        result["test_chamfer"] = net::evaluate_chamfer(n, data.test);
    }
    const auto dir = ensure_out(o);
    std::ofstream(dir / "eval.json") << result.dump(2) << "\n";
    std::cout << result.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

int cmd_reconstruct(CommonOpts& o, TrainOpts& t, const std::string& checkpoint,
                    const std::string& input, std::vector<std::string>& axes,
                    std::vector<std::string>& angles) {
    if (axes.size() != angles.size()) {
        throw ParseError("need one --angle per --axis (got " + std::to_string(axes.size()) +
                         " axes, " + std::to_string(angles.size()) + " angles)");
    }
    if (axes.empty()) {
        axes = {"0.46,0.68,0.56", "-0.44,-0.61,0.66", "0.34,0.94,0.00", "0.16,0.83,0.53"};
        angles = {"pi/3", "pi/4", "pi/6", "2pi/3"};
    }

    net::NetworkSpec spec = resolve_one_spec(o, "micro-pointnet-ae");
    if (spec.classes != 0) throw ValueError("reconstruct needs a reconstruction preset");
    net::Network n = net::Network::build(spec);

    const data::Dataset data = data::synth_dataset(dataset_for(spec, o, t));
    if (!checkpoint.empty()) {
        net::load_checkpoint(checkpoint, n);
    } else {
        net::SgdConfig cfg;
        cfg.seed = o.seed;
        cfg.epochs = t.epochs > 0 ? t.epochs : 150;
        cfg.lr = t.lr > 0.0 ? t.lr : 0.02;
        cfg.lr_decay = t.lr_decay;
        cfg.batch = t.batch;
        cfg.momentum = t.momentum;
        std::cout << "no checkpoint given, training " << spec.name << " for " << cfg.epochs
                  << " epochs\n";
        net::train_autoencoder(n, data.train, cfg, nullptr);
    }

    PointCloud cloud = input.empty() ? data.test.front() : data::normalize_unit_sphere(io::load_cloud(input));
    if (cloud.size() != spec.input_points) {
        throw ValueError("input cloud has " + std::to_string(cloud.size()) + " points, network expects " +
                         std::to_string(spec.input_points));
    }

    const auto dir = ensure_out(o);
    io::save_cloud((dir / "original.xyz").string(), cloud);
    const QTensor z = n.encode(cloud);
    const QTensor recon = n.decode(z);
    io::save_cloud((dir / "recon.xyz").string(), PointCloud(recon));
    std::cout << "reconstruction chamfer: " << net::chamfer(recon, cloud.points).loss << "\n";

    const double tol = o.tol < 0.0 ? 1e-9 : o.tol;
    bool pass = true;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const Vec3 axis = parse_axis(axes[i]);
        const double angle = parse_angle(angles[i]);
        const Rotor R = Rotor::from_axis_angle(axis, angle);

        const QTensor direct = rotate_tensor(R, recon);
        const QTensor synth = n.decode(rotate_tensor(R, z));
        const double d = net::chamfer(synth, direct).loss;
        pass = pass && d <= tol;

        const std::string tag = std::to_string(i);
        io::save_cloud((dir / ("direct_rot_" + tag + ".xyz")).string(), PointCloud(direct));
        io::save_cloud((dir / ("feature_rot_" + tag + ".xyz")).string(), PointCloud(synth));
        std::cout << (d <= tol ? "PASS" : "FAIL") << "  axis=(" << axis.x << "," << axis.y << ","
                  << axis.z << ") angle=" << angle << "  chamfer(feature vs direct)=" << d << "\n";
    }
    std::cout << "clouds written to " << dir.string() << "\n";
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// complexity
// ---------------------------------------------------------------------------

int cmd_complexity(CommonOpts& o) {
    json docs = json::array();
    bool ok = true;
    for (const auto& spec : resolve_specs(o)) {
        const auto rep = net::count_complexity(spec);
        const bool params_ok = rep.params <= rep.twin_params;
        const bool flops_ok = rep.flops < 3 * rep.twin_flops;
        ok = ok && params_ok && flops_ok;
        json j = rep.to_json();
        j["params_within_twin"] = params_ok;
        j["flops_within_3x_twin"] = flops_ok;
        docs.push_back(std::move(j));
        std::cout << rep.name << ": params " << rep.params << " vs twin " << rep.twin_params
                  << ", flops " << rep.flops << " vs twin " << rep.twin_flops << " ("
                  << (rep.twin_flops ? static_cast<double>(rep.flops) / static_cast<double>(rep.twin_flops)
                                     : 0.0)
                  << "x)\n";
    }
    const auto dir = ensure_out(o);
    std::ofstream(dir / "complexity.json") << docs.dump(2) << "\n";
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

template <typename Fn>
void bench_one(const std::string& name, std::size_t reps, Fn&& fn) {
    using clock = std::chrono::steady_clock;
    double sink = 0.0;
    sink += fn(); // warm up
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < reps; ++i) sink += fn();
    const double us =
        std::chrono::duration<double, std::micro>(clock::now() - t0).count() / double(reps);
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(2);
    line << name;
    for (std::size_t i = name.size(); i < 34; ++i) line << ' ';
    line << us << " us/call";
    if (!std::isfinite(sink)) line << " (non-finite result)";
    std::cout << line.str() << "\n";
}

int cmd_bench(CommonOpts& o) {
    const std::size_t reps = std::max<std::size_t>(1, o.trials);
    rng::Stream rng(o.seed);

    const QTensor f = cert::detail::random_pure({64, 8}, rng);
    const RTensor w = cert::detail::random_real({8, 8}, rng);
    const auto pts = cert::detail::random_points(256, rng);
    const auto pts64 = cert::detail::random_points(64, rng);
    const Rotor R = random_rotor(rng);

    std::cout << "reps per op: " << reps << "\n";
    bench_one("hamilton product x4096", reps, [&] {
        Quaternion acc{1, 0, 0, 0};
        for (int i = 0; i < 4096; ++i) acc = acc * f.at(static_cast<std::size_t>(i) % f.numel());
        return acc.w;
    });
    bench_one("rotate 64x8 tensor", reps, [&] { return rotate_tensor(R, f).at(0).x; });
    bench_one("qconv 64x8 -> 64x8", reps, [&] { return layers::qconv(w, f).at(0).x; });
    bench_one("qrelu 64x8 (batch mean)", reps,
              [&] { return layers::qrelu(f, layers::ReluMode::BatchMean).at(0).x; });
    bench_one("qbatchnorm batch of 4", reps, [&] {
        const std::vector<QTensor> batch(4, f);
        return layers::qbatchnorm(batch)[0].at(0).x;
    });
    bench_one("qmaxpool 64x8 per channel", reps,
              [&] { return layers::qmaxpool_elementwise(f).at(0).x; });
    bench_one("centroid_fps 256 -> 64", reps,
              [&] { return double(geom::centroid_fps(pts, 64).back()); });
    bench_one("group_ball_knn 256, k=8", reps, [&] {
        const auto centers = geom::centroid_fps(pts, 32);
        return double(geom::group_ball_knn(pts, centers, 0.9, 8).groups[0].size());
    });
    bench_one("knn_graph 256, k=8", reps,
              [&] { return double(geom::knn_graph(pts, 8).size()); });
    bench_one("pca_lrf 64", reps, [&] { return geom::pca_lrf(pts64).axes[0].x; });
    bench_one("density_estimate 256", reps,
              [&] { return geom::density_estimate(pts, 0.5)[0]; });
    bench_one("chamfer 64 vs 64", reps, [&] {
        return net::chamfer(PointCloud::from_vectors(pts64).points,
                            PointCloud::from_vectors(pts64).points)
            .loss;
    });
    for (const auto& name : net::preset_names()) {
        net::Network n = net::Network::build(net::preset_spec(name, o.seed));
        const PointCloud cloud = PointCloud::from_vectors(pts64);
        bench_one("forward " + name, reps, [&] {
            const auto out = n.forward(cloud);
            return n.spec().classes > 0 ? out.logits[0] : out.points.at(0).x;
        });
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rotation-equivariant quaternion point cloud networks"};
    app.require_subcommand(1);

    CommonOpts certify_o, train_o, eval_o, rec_o, cx_o, bench_o;
    TrainOpts train_t, eval_t, rec_t;
    std::string eval_ckpt, rec_ckpt, rec_input;
    std::vector<std::string> rec_axes, rec_angles;

    CLI::App* certify = app.add_subcommand("certify", "run certification suites");
    add_common(certify, certify_o);

    CLI::App* train = app.add_subcommand("train", "train on the synthetic dataset");
    add_common(train, train_o);
    train->add_option("--epochs", train_t.epochs, "training epochs (0: preset default)");
    train->add_option("--lr", train_t.lr, "learning rate (<=0: preset default)");
    train->add_option("--lr-decay", train_t.lr_decay, "per-epoch learning rate multiplier");
    train->add_option("--momentum", train_t.momentum, "SGD momentum");
    train->add_option("--batch", train_t.batch, "minibatch size");
    train->add_option("--train-count", train_t.train_count, "training clouds");
    train->add_option("--test-count", train_t.test_count, "test clouds");
    train->add_flag("--twin", train_t.twin, "train the derived non-equivariant twin");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_o);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--train-count", eval_t.train_count, "training clouds (dataset shape)");
    eval->add_option("--test-count", eval_t.test_count, "test clouds");
    eval->add_flag("--twin", eval_t.twin, "evaluate the derived twin");

    CLI::App* rec = app.add_subcommand("reconstruct", "feature rotation demo");
    add_common(rec, rec_o);
    rec->add_option("--checkpoint", rec_ckpt, "trained autoencoder (otherwise trains one now)");
    rec->add_option("--input", rec_input, "input cloud file (.xyz/.off/.csv)");
    rec->add_option("--axis", rec_axes, "rotation axis 'x,y,z' (repeatable)");
    rec->add_option("--angle", rec_angles, "rotation angle, e.g. 'pi/3' (repeatable)");
    rec->add_option("--epochs", rec_t.epochs, "training epochs when no checkpoint is given");
    rec->add_option("--lr", rec_t.lr, "learning rate when training");
    rec->add_option("--lr-decay", rec_t.lr_decay, "per-epoch learning rate multiplier");

    CLI::App* cx = app.add_subcommand("complexity", "parameter and flop report");
    add_common(cx, cx_o);

    CLI::App* bench = app.add_subcommand("bench", "wall time per operation");
    add_common(bench, bench_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (certify->parsed()) return cmd_certify(certify_o);
        if (train->parsed()) return cmd_train(train_o, train_t);
        if (eval->parsed()) return cmd_eval(eval_o, eval_t, eval_ckpt);
        if (rec->parsed())
            return cmd_reconstruct(rec_o, rec_t, rec_ckpt, rec_input, rec_axes, rec_angles);
        if (cx->parsed()) return cmd_complexity(cx_o);
        if (bench->parsed()) return cmd_bench(bench_o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
