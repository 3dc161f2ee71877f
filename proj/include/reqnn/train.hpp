#pragma once

#include <bit>
#include <fstream>
#include <ostream>

#include "reqnn/presets.hpp"

namespace reqnn::net {

struct SgdConfig {
    double lr = 1e-2;
    double lr_decay = 1.0; // per-epoch multiplier
    double momentum = 0.9;
    std::size_t batch = 16;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double acc = -1.0; // negative when not applicable
};

struct TrainResult {
    std::vector<EpochLog> log;
    [[nodiscard]] double final_loss() const { return log.empty() ? 0.0 : log.back().loss; }
};

namespace detail {

inline void emit_log(std::ostream* os, const EpochLog& e) {
    if (os == nullptr) return;
    json j{{"epoch", e.epoch}, {"loss", e.loss}};
    if (e.acc >= 0.0) j["acc"] = e.acc;
    else j["acc"] = nullptr;
    *os << j.dump() << "\n";
}

class SgdState {
public:
    explicit SgdState(Network& net, const SgdConfig& cfg) : net_(net), cfg_(cfg) {
        for (const auto& p : net.params()) vel_.emplace_back(p.value.shape());
    }

    /// v <- momentum v + g;  w <- w - lr v
    void step() {
        auto& ps = net_.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            for (std::size_t j = 0; j < ps[i].value.numel(); ++j) {
                vel_[i][j] = cfg_.momentum * vel_[i][j] + ps[i].grad[j];
                ps[i].value[j] -= lr_ * vel_[i][j];
            }
        }
    }

    void decay_lr() { lr_ *= cfg_.lr_decay; }

private:
    Network& net_;
    SgdConfig cfg_;
    double lr_ = cfg_.lr;
    std::vector<RTensor> vel_;
};

} // namespace detail

// --------------------------------------------------------------------------
// Chamfer distance between point sets, symmetric mean of squared nearest
// neighbour distances: 0.5 mean_p min_t |p-t|^2 + 0.5 mean_t min_p |t-p|^2.
// --------------------------------------------------------------------------

struct ChamferResult {
    double loss = 0.0;
    QTensor pred_grad; // same shape as pred, pure
};

inline ChamferResult chamfer(const QTensor& pred, const QTensor& target) {
    const std::size_t n = pred.numel(), m = target.numel();
    if (n == 0 || m == 0) throw ValueError("chamfer distance of an empty point set");
    ChamferResult r;
    r.pred_grad = QTensor(pred.shape());
    std::vector<std::size_t> nearest_t(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p = pred.at(i).vec();
        double best = dist_sq(p, target.at(0).vec());
        std::size_t bj = 0;
        for (std::size_t j = 1; j < m; ++j) {
            const double d = dist_sq(p, target.at(j).vec());
            if (d < best) { best = d; bj = j; }
        }
        nearest_t[i] = bj;
        r.loss += 0.5 * best / static_cast<double>(n);
        const Vec3 g = (1.0 / static_cast<double>(n)) * (p - target.at(bj).vec());
        r.pred_grad.set(i, r.pred_grad.at(i) + Quaternion::pure(g));
    }
    for (std::size_t j = 0; j < m; ++j) {
        const Vec3 t = target.at(j).vec();
        double best = dist_sq(t, pred.at(0).vec());
        std::size_t bi = 0;
        for (std::size_t i = 1; i < n; ++i) {
            const double d = dist_sq(t, pred.at(i).vec());
            if (d < best) { best = d; bi = i; }
        }
        r.loss += 0.5 * best / static_cast<double>(m);
        const Vec3 g = (1.0 / static_cast<double>(m)) * (pred.at(bi).vec() - t);
        r.pred_grad.set(bi, r.pred_grad.at(bi) + Quaternion::pure(g));
    }
    return r;
}

inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    return chamfer(a.points, b.points).loss;
}

// --------------------------------------------------------------------------
// Training loops. Deterministic for a fixed seed: shuffling and dropout draw
// from streams forked off the config seed, and nothing runs concurrently.
// --------------------------------------------------------------------------

inline TrainResult train_classifier(Network& net, const std::vector<PointCloud>& data,
                                    const SgdConfig& cfg, std::ostream* log_stream = nullptr) {
    if (net.spec().classes == 0) throw StateError("train_classifier: network has no classes");
    if (data.empty()) throw ValueError("train_classifier: empty training set");
    for (const auto& c : data) {
        if (!c.label) throw ValueError("train_classifier: unlabeled cloud in training set");
    }
    detail::SgdState sgd(net, cfg);
    rng::Stream dropout = rng::Stream::fork(cfg.seed, 0xD0);
    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::Stream sh = rng::Stream::fork(cfg.seed, 0x100 + epoch);
        sh.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const double inv = 1.0 / static_cast<double>(stop - start);
            net.zero_grads();
            for (std::size_t s = start; s < stop; ++s) {
                const PointCloud& cloud = data[order[s]];
                const auto out = net.forward(cloud, true, &dropout);
                const auto ce = q2r::softmax_cross_entropy(
                    out.logits, static_cast<std::size_t>(*cloud.label));
                loss_sum += ce.loss;
                if (q2r::argmax(out.logits) == static_cast<std::size_t>(*cloud.label)) ++correct;
                RTensor dl = ce.grad;
                for (auto& v : dl.data()) v *= inv;
                net.backward(dl);
            }
            sgd.step();
        }
        sgd.decay_lr();
        EpochLog e;
        e.epoch = epoch;
        e.loss = loss_sum / static_cast<double>(data.size());
        e.acc = static_cast<double>(correct) / static_cast<double>(data.size());
        detail::emit_log(log_stream, e);
        result.log.push_back(e);
    }
    return result;
}

inline TrainResult train_autoencoder(Network& net, const std::vector<PointCloud>& data,
                                     const SgdConfig& cfg, std::ostream* log_stream = nullptr) {
    if (net.spec().classes != 0) throw StateError("train_autoencoder: network is a classifier");
    if (data.empty()) throw ValueError("train_autoencoder: empty training set");
    detail::SgdState sgd(net, cfg);
    rng::Stream dropout = rng::Stream::fork(cfg.seed, 0xD0);
    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::Stream sh = rng::Stream::fork(cfg.seed, 0x100 + epoch);
        sh.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const double inv = 1.0 / static_cast<double>(stop - start);
            net.zero_grads();
            for (std::size_t s = start; s < stop; ++s) {
                const PointCloud& cloud = data[order[s]];
                const auto out = net.forward(cloud, true, &dropout);
                auto ch = chamfer(out.points, cloud.points);
                loss_sum += ch.loss;
                net.backward(qt_scale(inv, ch.pred_grad));
            }
            sgd.step();
        }
        sgd.decay_lr();
        EpochLog e;
        e.epoch = epoch;
        e.loss = loss_sum / static_cast<double>(data.size());
        detail::emit_log(log_stream, e);
        result.log.push_back(e);
    }
    return result;
}

inline double evaluate_accuracy(Network& net, const std::vector<PointCloud>& data) {
    if (data.empty()) throw ValueError("evaluate: empty data set");
    std::size_t correct = 0;
    for (const auto& cloud : data) {
        if (!cloud.label) throw ValueError("evaluate: unlabeled cloud");
        const auto out = net.forward(cloud, false, nullptr);
        if (q2r::argmax(out.logits) == static_cast<std::size_t>(*cloud.label)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline double evaluate_chamfer(Network& net, const std::vector<PointCloud>& data) {
    if (data.empty()) throw ValueError("evaluate: empty data set");
    double sum = 0.0;
    for (const auto& cloud : data) {
        const auto out = net.forward(cloud, false, nullptr);
        sum += chamfer(out.points, cloud.points).loss;
    }
    return sum / static_cast<double>(data.size());
}

// --------------------------------------------------------------------------
// Checkpoints. Little-endian binary:
//   magic "RQNN" | u32 version=1 | u64 param count |
//   per param: u32 name length | name bytes | u32 rank | u64 extents[rank] |
//              f64 values (row-major)
// --------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ParseError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

} // namespace detail

inline void save_checkpoint(const std::string& path, const Network& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValueError("cannot open '" + path + "' for writing");
    os.write("RQNN", 4);
    detail::put_u32(os, 1);
    detail::put_u64(os, net.params().size());
    for (const auto& p : net.params()) {
        detail::put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t e : p.value.shape()) detail::put_u64(os, e);
        for (double v : p.value.data()) detail::put_f64(os, v);
    }
    if (!os) throw ValueError("failed while writing '" + path + "'");
}

inline void load_checkpoint(const std::string& path, Network& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValueError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "RQNN") {
        throw ParseError("checkpoint '" + path + "': bad magic");
    }
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1) {
        throw ParseError("checkpoint '" + path + "': unsupported version " +
                         std::to_string(version));
    }
    const std::uint64_t count = detail::get_u64(is);
    if (count != net.params().size()) {
        throw ParseError("checkpoint '" + path + "': holds " + std::to_string(count) +
                         " parameters, network has " + std::to_string(net.params().size()));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw ParseError("checkpoint '" + path + "': truncated file");
        const std::uint32_t rank = detail::get_u32(is);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = detail::get_u64(is);
        Param& p = net.params()[i];
        if (p.name != name || p.value.shape() != shape) {
            throw ParseError("checkpoint '" + path + "': parameter " + std::to_string(i) +
                             " is '" + name + "' " + shape_to_string(shape) +
                             ", network expects '" + p.name + "' " +
                             shape_to_string(p.value.shape()));
        }
        for (double& v : p.value.data()) v = detail::get_f64(is);
    }
}

} // namespace reqnn::net
