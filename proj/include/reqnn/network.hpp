#pragma once

#include <memory>
#include <nlohmann/json.hpp>

#include "reqnn/geometry.hpp"
#include "reqnn/q2r.hpp"

namespace reqnn::net {

using nlohmann::json;

enum class LayerOp {
    QConv,
    QRelu,
    QNorm,
    QDropout,
    PoolPoints,
    SetAbstraction,
    EdgeConv,
    Bridge,
    Fc,
    RConv,
    RRelu,
    RNorm,
    RPoolPoints,
    // Deliberately broken variants kept for certification audits. They are
    // accepted by the spec parser but never appear in shipped presets.
    QConvBiased,
    ReluComponentwise,
    BridgeSum,
    QReluWrongGrad,
};

inline const char* op_name(LayerOp op) {
    switch (op) {
        case LayerOp::QConv: return "qconv";
        case LayerOp::QRelu: return "qrelu";
        case LayerOp::QNorm: return "qnorm";
        case LayerOp::QDropout: return "qdropout";
        case LayerOp::PoolPoints: return "pool_points";
        case LayerOp::SetAbstraction: return "sa";
        case LayerOp::EdgeConv: return "edgeconv";
        case LayerOp::Bridge: return "bridge";
        case LayerOp::Fc: return "fc";
        case LayerOp::RConv: return "rconv";
        case LayerOp::RRelu: return "rrelu";
        case LayerOp::RNorm: return "rnorm";
        case LayerOp::RPoolPoints: return "rpool_points";
        case LayerOp::QConvBiased: return "qconv_biased";
        case LayerOp::ReluComponentwise: return "relu_componentwise";
        case LayerOp::BridgeSum: return "bridge_sum";
        case LayerOp::QReluWrongGrad: return "qrelu_wrong_grad";
    }
    return "?";
}

inline LayerOp op_from_name(const std::string& s) {
    static const std::pair<const char*, LayerOp> table[] = {
        {"qconv", LayerOp::QConv},
        {"qrelu", LayerOp::QRelu},
        {"qnorm", LayerOp::QNorm},
        {"qdropout", LayerOp::QDropout},
        {"pool_points", LayerOp::PoolPoints},
        {"sa", LayerOp::SetAbstraction},
        {"edgeconv", LayerOp::EdgeConv},
        {"bridge", LayerOp::Bridge},
        {"fc", LayerOp::Fc},
        {"rconv", LayerOp::RConv},
        {"rrelu", LayerOp::RRelu},
        {"rnorm", LayerOp::RNorm},
        {"rpool_points", LayerOp::RPoolPoints},
        {"qconv_biased", LayerOp::QConvBiased},
        {"relu_componentwise", LayerOp::ReluComponentwise},
        {"bridge_sum", LayerOp::BridgeSum},
        {"qrelu_wrong_grad", LayerOp::QReluWrongGrad},
    };
    for (const auto& [name, op] : table) {
        if (s == name) return op;
    }
    throw ParseError("unknown layer op '" + s + "'");
}

struct LayerDesc {
    LayerOp op = LayerOp::QConv;
    std::size_t in = 0, out = 0;        // qconv / rconv / fc
    layers::ReluMode relu_mode = layers::ReluMode::Constant;
    double relu_c = 1.0;
    double dropout_p = 0.0;
    bool fc_relu = false;
    std::size_t centers = 0;            // sa
    double radius = 0.0;                // sa
    std::size_t k = 0;                  // sa group size / edgeconv neighbours
    std::vector<std::size_t> mlp;       // sa / edgeconv conv widths

    static LayerDesc qconv(std::size_t in, std::size_t out) {
        LayerDesc d; d.op = LayerOp::QConv; d.in = in; d.out = out; return d;
    }
    static LayerDesc qrelu(layers::ReluMode m = layers::ReluMode::Constant, double c = 1.0) {
        LayerDesc d; d.op = LayerOp::QRelu; d.relu_mode = m; d.relu_c = c; return d;
    }
    static LayerDesc qnorm() { LayerDesc d; d.op = LayerOp::QNorm; return d; }
    static LayerDesc qdropout(double p) {
        LayerDesc d; d.op = LayerOp::QDropout; d.dropout_p = p; return d;
    }
    static LayerDesc pool_points() { LayerDesc d; d.op = LayerOp::PoolPoints; return d; }
    static LayerDesc sa(std::size_t m, double r, std::size_t k, std::vector<std::size_t> mlp) {
        LayerDesc d; d.op = LayerOp::SetAbstraction;
        d.centers = m; d.radius = r; d.k = k; d.mlp = std::move(mlp); return d;
    }
    static LayerDesc edgeconv(std::size_t k, std::vector<std::size_t> mlp) {
        LayerDesc d; d.op = LayerOp::EdgeConv; d.k = k; d.mlp = std::move(mlp); return d;
    }
    static LayerDesc bridge() { LayerDesc d; d.op = LayerOp::Bridge; return d; }
    static LayerDesc fc(std::size_t in, std::size_t out, bool relu) {
        LayerDesc d; d.op = LayerOp::Fc; d.in = in; d.out = out; d.fc_relu = relu; return d;
    }
    static LayerDesc rconv(std::size_t in, std::size_t out) {
        LayerDesc d; d.op = LayerOp::RConv; d.in = in; d.out = out; return d;
    }
    static LayerDesc rrelu() { LayerDesc d; d.op = LayerOp::RRelu; return d; }
    static LayerDesc rnorm() { LayerDesc d; d.op = LayerOp::RNorm; return d; }
    static LayerDesc rpool_points() { LayerDesc d; d.op = LayerOp::RPoolPoints; return d; }
};

struct NetworkSpec {
    std::string name = "custom";
    std::size_t input_points = 0;
    std::size_t classes = 0;   // 0 means reconstruction (no classifier head)
    std::uint64_t seed = 0;
    std::vector<LayerDesc> layers;
};

// --------------------------------------------------------------------------
// JSON round trip.
// --------------------------------------------------------------------------

inline json layer_to_json(const LayerDesc& d) {
    json j;
    j["op"] = op_name(d.op);
    switch (d.op) {
        case LayerOp::QConv:
        case LayerOp::QConvBiased:
        case LayerOp::RConv:
            j["in"] = d.in; j["out"] = d.out;
            break;
        case LayerOp::Fc:
            j["in"] = d.in; j["out"] = d.out; j["relu"] = d.fc_relu;
            break;
        case LayerOp::QRelu:
        case LayerOp::QReluWrongGrad:
            j["mode"] = d.relu_mode == layers::ReluMode::Constant ? "constant" : "batch_mean";
            if (d.relu_mode == layers::ReluMode::Constant) j["c"] = d.relu_c;
            break;
        case LayerOp::QDropout:
            j["p"] = d.dropout_p;
            break;
        case LayerOp::SetAbstraction:
            j["centers"] = d.centers; j["radius"] = d.radius; j["k"] = d.k; j["mlp"] = d.mlp;
            break;
        case LayerOp::EdgeConv:
            j["k"] = d.k; j["mlp"] = d.mlp;
            break;
        default:
            break;
    }
    return j;
}

inline LayerDesc layer_from_json(const json& j) {
    if (!j.is_object() || !j.contains("op") || !j.at("op").is_string()) {
        throw ParseError("layer entry must be an object with a string 'op' field");
    }
    LayerDesc d;
    d.op = op_from_name(j.at("op").get<std::string>());
    try {
        switch (d.op) {
            case LayerOp::QConv:
            case LayerOp::QConvBiased:
            case LayerOp::RConv:
                d.in = j.at("in").get<std::size_t>();
                d.out = j.at("out").get<std::size_t>();
                break;
            case LayerOp::Fc:
                d.in = j.at("in").get<std::size_t>();
                d.out = j.at("out").get<std::size_t>();
                d.fc_relu = j.value("relu", false);
                break;
            case LayerOp::QRelu:
            case LayerOp::QReluWrongGrad: {
                const std::string mode = j.value("mode", "constant");
                if (mode == "constant") {
                    d.relu_mode = layers::ReluMode::Constant;
                    d.relu_c = j.value("c", 1.0);
                } else if (mode == "batch_mean") {
                    d.relu_mode = layers::ReluMode::BatchMean;
                } else {
                    throw ParseError("qrelu mode must be 'constant' or 'batch_mean', got '" +
                                     mode + "'");
                }
                break;
            }
            case LayerOp::QDropout:
                d.dropout_p = j.at("p").get<double>();
                break;
            case LayerOp::SetAbstraction:
                d.centers = j.at("centers").get<std::size_t>();
                d.radius = j.at("radius").get<double>();
                d.k = j.at("k").get<std::size_t>();
                d.mlp = j.at("mlp").get<std::vector<std::size_t>>();
                break;
            case LayerOp::EdgeConv:
                d.k = j.at("k").get<std::size_t>();
                d.mlp = j.at("mlp").get<std::vector<std::size_t>>();
                break;
            default:
                break;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("layer '") + op_name(d.op) + "': " + e.what());
    }
    return d;
}

inline json spec_to_json(const NetworkSpec& s) {
    json j;
    j["name"] = s.name;
    j["input_points"] = s.input_points;
    j["classes"] = s.classes;
    j["seed"] = s.seed;
    j["layers"] = json::array();
    for (const auto& l : s.layers) j["layers"].push_back(layer_to_json(l));
    return j;
}

inline NetworkSpec spec_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("network spec must be a JSON object");
    NetworkSpec s;
    try {
        s.name = j.value("name", "custom");
        s.input_points = j.at("input_points").get<std::size_t>();
        s.classes = j.value("classes", std::size_t{0});
        s.seed = j.value("seed", std::uint64_t{0});
        if (!j.contains("layers") || !j.at("layers").is_array()) {
            throw ParseError("network spec needs a 'layers' array");
        }
        for (const auto& lj : j.at("layers")) s.layers.push_back(layer_from_json(lj));
    } catch (const json::exception& e) {
        throw ParseError(std::string("network spec: ") + e.what());
    }
    return s;
}

// --------------------------------------------------------------------------
// Static validation. Walks the shape state (domain, points, channels) through
// the layer list and reports the first inconsistency by layer index and op.
// --------------------------------------------------------------------------

namespace detail {

inline bool is_real_op(LayerOp op) {
    return op == LayerOp::RConv || op == LayerOp::RRelu || op == LayerOp::RNorm ||
           op == LayerOp::RPoolPoints || op == LayerOp::Fc;
}

[[noreturn]] inline void spec_fail(std::size_t idx, LayerOp op, const std::string& msg) {
    throw SpecError("layer " + std::to_string(idx) + " (" + op_name(op) + "): " + msg);
}

} // namespace detail

struct ShapeState {
    bool real = false;
    std::size_t points = 0;
    std::size_t channels = 0;
};

/// Validates the spec and returns the output shape state.
inline ShapeState validate_spec(const NetworkSpec& s) {
    if (s.input_points == 0) throw SpecError("network spec: input_points must be positive");
    if (s.layers.empty()) throw SpecError("network spec: layer list is empty");

    ShapeState st;
    st.real = detail::is_real_op(s.layers.front().op);
    st.points = s.input_points;
    st.channels = st.real ? 3 : 1; // raw coordinates: one pure quaternion or 3 reals
    bool seen_bridge = false;

    for (std::size_t i = 0; i < s.layers.size(); ++i) {
        const LayerDesc& d = s.layers[i];
        const bool real_op = detail::is_real_op(d.op);
        const bool bridge_op = d.op == LayerOp::Bridge || d.op == LayerOp::BridgeSum;
        if (!real_op && !bridge_op && st.real) {
            detail::spec_fail(i, d.op, "quaternion op after the real-valued bridge");
        }
        if (real_op && !st.real) {
            detail::spec_fail(i, d.op, "real-valued op before the bridge");
        }
        switch (d.op) {
            case LayerOp::QConv:
            case LayerOp::QConvBiased:
            case LayerOp::RConv:
                if (d.in == 0 || d.out == 0) detail::spec_fail(i, d.op, "in/out must be positive");
                if (d.in != st.channels) {
                    detail::spec_fail(i, d.op, "expects " + std::to_string(d.in) +
                                                   " channels, got " + std::to_string(st.channels));
                }
                st.channels = d.out;
                break;
            case LayerOp::QRelu:
            case LayerOp::QReluWrongGrad:
                if (d.relu_mode == layers::ReluMode::Constant && !(d.relu_c > 0.0)) {
                    detail::spec_fail(i, d.op, "constant threshold must be positive");
                }
                break;
            case LayerOp::ReluComponentwise:
            case LayerOp::RRelu:
            case LayerOp::QNorm:
            case LayerOp::RNorm:
                break;
            case LayerOp::QDropout:
                if (!(d.dropout_p >= 0.0 && d.dropout_p < 1.0)) {
                    detail::spec_fail(i, d.op, "p must lie in [0, 1)");
                }
                break;
            case LayerOp::PoolPoints:
            case LayerOp::RPoolPoints:
                if (st.points == 0) detail::spec_fail(i, d.op, "no points to pool");
                st.points = 1;
                break;
            case LayerOp::SetAbstraction:
                if (d.centers == 0 || d.centers > st.points) {
                    detail::spec_fail(i, d.op, "centers must lie in [1, points]");
                }
                if (!(d.radius > 0.0)) detail::spec_fail(i, d.op, "radius must be positive");
                if (d.k == 0) detail::spec_fail(i, d.op, "group size k must be positive");
                if (d.mlp.empty()) detail::spec_fail(i, d.op, "mlp widths must be non-empty");
                st.points = d.centers;
                st.channels = d.mlp.back();
                break;
            case LayerOp::EdgeConv:
                if (d.k == 0 || d.k + 1 > st.points) {
                    detail::spec_fail(i, d.op, "needs 1 <= k <= points-1");
                }
                if (d.mlp.empty()) detail::spec_fail(i, d.op, "mlp widths must be non-empty");
                st.channels = d.mlp.back();
                break;
            case LayerOp::Bridge:
            case LayerOp::BridgeSum:
                if (seen_bridge) detail::spec_fail(i, d.op, "second bridge in one network");
                seen_bridge = true;
                st.real = true;
                break;
            case LayerOp::Fc:
                if (d.in == 0 || d.out == 0) detail::spec_fail(i, d.op, "in/out must be positive");
                if (d.in != st.points * st.channels) {
                    detail::spec_fail(i, d.op,
                                      "expects " + std::to_string(d.in) + " inputs, got " +
                                          std::to_string(st.points * st.channels) + " (" +
                                          std::to_string(st.points) + " points x " +
                                          std::to_string(st.channels) + " channels)");
                }
                st.points = 1;
                st.channels = d.out;
                break;
        }
    }

    if (s.classes > 0) {
        if (!st.real || s.layers.back().op != LayerOp::Fc) {
            throw SpecError("classifier spec must end with a real fc layer");
        }
        if (st.channels != s.classes) {
            throw SpecError("final fc emits " + std::to_string(st.channels) +
                            " logits for " + std::to_string(s.classes) + " classes");
        }
        if (s.classes < 2) throw SpecError("classifier spec needs at least 2 classes");
    } else {
        if (st.real) throw SpecError("reconstruction spec must stay quaternion-valued");
    }
    return st;
}

// --------------------------------------------------------------------------
// Runtime network.
// --------------------------------------------------------------------------

struct Param {
    std::string name;
    RTensor value;
    RTensor grad;
};

/// Activation flowing between layers: quaternion features [points, channels]
/// before the bridge, real features after it, plus the structural coordinates
/// of the surviving points. The same struct carries gradients backward.
struct Act {
    bool real = false;
    QTensor q;
    RTensor r;
    std::vector<Vec3> coords;
};

namespace detail {

inline QTensor q_row(const QTensor& t, std::size_t r) {
    QTensor row({t.cols()});
    for (std::size_t c = 0; c < t.cols(); ++c) row.set(c, t.at(r, c));
    return row;
}

inline void q_add_row(QTensor& t, std::size_t r, const QTensor& row) {
    for (std::size_t c = 0; c < t.cols(); ++c) t.set(r, c, t.at(r, c) + row.at(c));
}

inline void q_set_row(QTensor& t, std::size_t r, const QTensor& row) {
    for (std::size_t c = 0; c < t.cols(); ++c) t.set(r, c, row.at(c));
}

} // namespace detail

class Network {
public:
    struct Output {
        RTensor logits; // classifier path
        QTensor points; // reconstruction path, rank 1
    };

    static Network build(const NetworkSpec& spec) {
        validate_spec(spec);
        Network n;
        n.spec_ = spec;
        rng::Stream init(spec.seed);
        ShapeState st;
        st.real = detail::is_real_op(spec.layers.front().op);
        st.points = spec.input_points;
        st.channels = st.real ? 3 : 1;
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            n.init_layer(i, spec.layers[i], st, init);
        }
        return n;
    }

    [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
    [[nodiscard]] std::vector<Param>& params() { return params_; }
    [[nodiscard]] const std::vector<Param>& params() const { return params_; }

    [[nodiscard]] std::size_t param_scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
    }

    [[nodiscard]] bool has_bridge() const {
        for (const auto& l : spec_.layers) {
            if (l.op == LayerOp::Bridge || l.op == LayerOp::BridgeSum) return true;
        }
        return false;
    }

    /// Index of the bottleneck pooling layer of a reconstruction network.
    [[nodiscard]] std::size_t bottleneck_layer() const {
        if (spec_.classes != 0) throw StateError("bottleneck: not a reconstruction network");
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            if (spec_.layers[i].op == LayerOp::PoolPoints) return i;
        }
        throw StateError("bottleneck: spec has no pooling layer");
    }

    Output forward(const PointCloud& cloud, bool training = false,
                   rng::Stream* dropout_rng = nullptr) {
        Act a = run(input_act(cloud), 0, spec_.layers.size(), training, dropout_rng);
        has_tape_ = training;
        tape_consumed_ = false;
        Output out;
        if (spec_.classes > 0) {
            out.logits = a.r.reshaped({a.r.numel()});
        } else {
            out.points = a.q.reshaped({a.q.numel()});
        }
        return out;
    }

    /// Gradient entry for classifier outputs.
    void backward(const RTensor& dlogits) {
        if (spec_.classes == 0) throw StateError("backward: network has no logits");
        take_tape();
        Act g;
        g.real = true;
        g.r = dlogits.reshaped({1, dlogits.numel()});
        run_backward(g);
    }

    /// Gradient entry for reconstruction outputs.
    void backward(const QTensor& dpoints) {
        if (spec_.classes != 0) throw StateError("backward: network emits logits, not points");
        take_tape();
        Act g;
        g.q = dpoints.reshaped({1, dpoints.numel()});
        run_backward(g);
    }

    /// Output of the quaternion part: everything before the bridge, or the
    /// full network when no bridge exists. Shape [points, channels].
    QTensor quaternion_module_output(const PointCloud& cloud) {
        std::size_t stop = spec_.layers.size();
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            if (spec_.layers[i].op == LayerOp::Bridge || spec_.layers[i].op == LayerOp::BridgeSum) {
                stop = i;
                break;
            }
        }
        if (detail::is_real_op(spec_.layers.front().op)) {
            throw StateError("network has no quaternion module");
        }
        return run(input_act(cloud), 0, stop, false, nullptr).q;
    }

    /// Reconstruction encoder: input cloud to bottleneck features [d].
    QTensor encode(const PointCloud& cloud) {
        const std::size_t bn = bottleneck_layer();
        Act a = run(input_act(cloud), 0, bn + 1, false, nullptr);
        return a.q.reshaped({a.q.numel()});
    }

    /// Reconstruction decoder: bottleneck features [d] to output points.
    QTensor decode(const QTensor& z) {
        const std::size_t bn = bottleneck_layer();
        Act a;
        a.q = z.reshaped({1, z.numel()});
        a = run(a, bn + 1, spec_.layers.size(), false, nullptr);
        return a.q.reshaped({a.q.numel()});
    }

private:
    // ---- layer implementations -------------------------------------------

    struct LayerBase {
        virtual ~LayerBase() = default;
        virtual Act forward(Network& n, const Act& in, bool record, rng::Stream* rng) = 0;
        virtual Act backward(Network& n, const Act& g) = 0;
    };

    struct QConvL : LayerBase {
        std::size_t w = 0;
        bool biased = false;
        std::size_t b = 0;
        QTensor cached_in;

        Act forward(Network& n, const Act& in, bool record, rng::Stream*) override {
            Act out;
            out.q = layers::qconv(n.params_[w].value, in.q);
            if (biased) {
                const RTensor& bias = n.params_[b].value;
                for (std::size_t p = 0; p < out.q.rows(); ++p) {
                    for (std::size_t u = 0; u < out.q.cols(); ++u) {
                        const double bv = bias[u];
                        out.q.set(p, u, out.q.at(p, u) + Quaternion{bv, bv, bv, bv});
                    }
                }
            }
            out.coords = in.coords;
            if (record) cached_in = in.q;
            return out;
        }

        Act backward(Network& n, const Act& g) override {
            auto grads = layers::qconv_backward(n.params_[w].value, cached_in, g.q);
            for (std::size_t i = 0; i < grads.weight.numel(); ++i) {
                n.params_[w].grad[i] += grads.weight[i];
            }
            if (biased) {
                for (std::size_t p = 0; p < g.q.rows(); ++p) {
                    for (std::size_t u = 0; u < g.q.cols(); ++u) {
                        const Quaternion go = g.q.at(p, u);
                        n.params_[b].grad[u] += go.w + go.x + go.y + go.z;
                    }
                }
            }
            Act out;
            out.q = std::move(grads.input);
            return out;
        }
    };

    struct QReluL : LayerBase {
        layers::ReluMode mode = layers::ReluMode::Constant;
        double c = 1.0;
        bool wrong_grad = false;
        QTensor cached_in;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            // In batch-mean mode the threshold is the mean norm over the whole
            // activation (all points and channels). A finer granularity (per
            // point or per channel) makes the scale factor separable into a
            // channel term times a point term; on a single-channel input that
            // keeps every channel a scalar multiple of the same per-point
            // quaternion all the way through the network, so per-channel
            // pooling selects the same point everywhere and the bridge
            // features collapse to input-independent constants.
            Act out;
            out.q = layers::qrelu(in.q, mode, c);
            out.coords = in.coords;
            if (record) cached_in = in.q;
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            if (wrong_grad) {
                // Drops the rank-1 norm term: plausible-looking but wrong.
                const double thr = layers::qrelu_threshold(cached_in, mode, c);
                out.q = QTensor(g.q.shape());
                for (std::size_t i = 0; i < g.q.numel(); ++i) {
                    const double nrm = norm(cached_in.at(i));
                    out.q.set(i, (nrm >= thr ? 1.0 : nrm / thr) * g.q.at(i));
                }
                return out;
            }
            out.q = layers::qrelu_backward(cached_in, g.q, mode, c);
            return out;
        }
    };

    /// Per-channel RMS normalization across the point set: the batch
    /// normalization statistic taken over the points of one cloud, which
    /// keeps inference deterministic and the layer permutation-invariant.
    struct QNormL : LayerBase {
        static constexpr double kEps = 1e-5;
        std::vector<QTensor> cached_rows;

        static std::vector<QTensor> split_rows(const QTensor& t) {
            std::vector<QTensor> rows(t.rows(), QTensor({t.cols()}));
            for (std::size_t p = 0; p < t.rows(); ++p) {
                rows[p] = detail::q_row(t, p);
            }
            return rows;
        }

        static QTensor join_rows(const std::vector<QTensor>& rows, const QTensor& like) {
            QTensor out(like.shape());
            for (std::size_t p = 0; p < rows.size(); ++p) detail::q_set_row(out, p, rows[p]);
            return out;
        }

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            auto rows = split_rows(in.q);
            Act out;
            out.q = join_rows(layers::qbatchnorm(rows, kEps), in.q);
            out.coords = in.coords;
            if (record) cached_rows = std::move(rows);
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.q = join_rows(layers::qbatchnorm_backward(cached_rows, split_rows(g.q), kEps),
                              g.q);
            return out;
        }
    };

    /// Real twin of QNorm: divides each channel by its RMS over the points.
    struct RNormL : LayerBase {
        static constexpr double kEps = 1e-5;
        RTensor cached_in;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            Act out;
            out.real = true;
            out.r = RTensor(in.r.shape());
            const std::size_t P = in.r.rows(), C = in.r.cols();
            for (std::size_t c = 0; c < C; ++c) {
                double m = 0.0;
                for (std::size_t p = 0; p < P; ++p) m += in.r.at(p, c) * in.r.at(p, c);
                const double div = std::sqrt(m / static_cast<double>(P) + kEps);
                for (std::size_t p = 0; p < P; ++p) out.r.at(p, c) = in.r.at(p, c) / div;
            }
            out.coords = in.coords;
            if (record) cached_in = in.r;
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.real = true;
            out.r = RTensor(g.r.shape());
            const std::size_t P = cached_in.rows(), C = cached_in.cols();
            for (std::size_t c = 0; c < C; ++c) {
                double m = 0.0, coupled = 0.0;
                for (std::size_t p = 0; p < P; ++p) {
                    m += cached_in.at(p, c) * cached_in.at(p, c);
                    coupled += cached_in.at(p, c) * g.r.at(p, c);
                }
                const double div = std::sqrt(m / static_cast<double>(P) + kEps);
                const double k = coupled / (static_cast<double>(P) * div * div * div);
                for (std::size_t p = 0; p < P; ++p) {
                    out.r.at(p, c) = g.r.at(p, c) / div - k * cached_in.at(p, c);
                }
            }
            return out;
        }
    };

    struct ReluComponentwiseL : LayerBase {
        QTensor cached_in;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            Act out;
            out.q = qt_map(in.q, [](const Quaternion& q) {
                return Quaternion{q.w > 0 ? q.w : 0, q.x > 0 ? q.x : 0, q.y > 0 ? q.y : 0,
                                  q.z > 0 ? q.z : 0};
            });
            out.coords = in.coords;
            if (record) cached_in = in.q;
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.q = qt_zip(cached_in, g.q, [](const Quaternion& q, const Quaternion& go) {
                return Quaternion{q.w > 0 ? go.w : 0, q.x > 0 ? go.x : 0, q.y > 0 ? go.y : 0,
                                  q.z > 0 ? go.z : 0};
            });
            return out;
        }
    };

    struct QDropoutL : LayerBase {
        double p = 0.0;
        std::vector<std::uint8_t> mask;

        Act forward(Network&, const Act& in, bool record, rng::Stream* rng) override {
            Act out;
            out.coords = in.coords;
            if (record && rng != nullptr) {
                mask = layers::dropout_mask(in.q.numel(), p, *rng);
                out.q = layers::qdropout_apply(in.q, mask, p);
            } else {
                mask.clear();
                out.q = in.q;
            }
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.q = mask.empty() ? g.q : layers::qdropout_apply(g.q, mask, p);
            return out;
        }
    };

    struct PoolPointsL : LayerBase {
        std::vector<std::size_t> args;
        std::size_t in_rows = 0;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            const auto idx = layers::qmaxpool_elementwise_indices(in.q);
            Act out;
            out.q = QTensor({1, in.q.cols()});
            for (std::size_t c = 0; c < in.q.cols(); ++c) out.q.set(0, c, in.q.at(idx[c], c));
            if (record) {
                args = idx;
                in_rows = in.q.rows();
            }
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.q = QTensor({in_rows, g.q.cols()});
            for (std::size_t c = 0; c < g.q.cols(); ++c) {
                out.q.set(args[c], c, g.q.at(0, c));
            }
            return out;
        }
    };

    struct SAL : LayerBase {
        std::size_t m = 0, K = 0;
        double radius = 0.0;
        std::vector<std::size_t> w_idx; // one conv weight per mlp stage
        // forward caches
        geom::IndexGroups groups;
        std::vector<QTensor> stage_in;  // conv input per stage, [m*K, c]
        std::vector<QTensor> relu_in;   // relu input per stage
        std::vector<std::vector<std::size_t>> pool_args; // per center
        std::size_t in_points = 0, in_channels = 0;

        Act forward(Network& n, const Act& in, bool record, rng::Stream*) override {
            const auto& pts = in.coords;
            const std::size_t d = in.q.cols();
            const auto centers = geom::centroid_fps(pts, m);
            auto grp = geom::group_ball_knn(pts, centers, radius, K);

            QTensor g0({m * K, d + 1});
            for (std::size_t ci = 0; ci < m; ++ci) {
                const Vec3 cpos = pts[grp.centers[ci]];
                for (std::size_t j = 0; j < K; ++j) {
                    const std::size_t mem = grp.groups[ci][j];
                    const std::size_t row = ci * K + j;
                    for (std::size_t c = 0; c < d; ++c) g0.set(row, c, in.q.at(mem, c));
                    g0.set(row, d, Quaternion::pure(pts[mem] - cpos));
                }
            }

            if (record) {
                stage_in.clear();
                relu_in.clear();
                pool_args.assign(m, {});
                groups = grp;
                in_points = in.q.rows();
                in_channels = d;
            }
            QTensor cur = std::move(g0);
            for (std::size_t s = 0; s < w_idx.size(); ++s) {
                if (record) stage_in.push_back(cur);
                QTensor pre = layers::qconv(n.params_[w_idx[s]].value, cur);
                if (record) relu_in.push_back(pre);
                cur = layers::qrelu(pre, layers::ReluMode::BatchMean);
            }

            Act out;
            const std::size_t dout = cur.cols();
            out.q = QTensor({m, dout});
            out.coords.resize(m);
            for (std::size_t ci = 0; ci < m; ++ci) {
                QTensor block({K, dout});
                for (std::size_t j = 0; j < K; ++j) {
                    for (std::size_t c = 0; c < dout; ++c) block.set(j, c, cur.at(ci * K + j, c));
                }
                const auto idx = layers::qmaxpool_elementwise_indices(block);
                for (std::size_t c = 0; c < dout; ++c) out.q.set(ci, c, block.at(idx[c], c));
                if (record) pool_args[ci] = idx;
                out.coords[ci] = pts[grp.centers[ci]];
            }
            return out;
        }

        Act backward(Network& n, const Act& g) override {
            const std::size_t dout = g.q.cols();
            QTensor cur({m * K, dout});
            for (std::size_t ci = 0; ci < m; ++ci) {
                for (std::size_t c = 0; c < dout; ++c) {
                    cur.set(ci * K + pool_args[ci][c], c, g.q.at(ci, c));
                }
            }
            for (std::size_t s = w_idx.size(); s-- > 0;) {
                cur = layers::qrelu_backward(relu_in[s], cur, layers::ReluMode::BatchMean);
                auto grads = layers::qconv_backward(n.params_[w_idx[s]].value, stage_in[s], cur);
                for (std::size_t i = 0; i < grads.weight.numel(); ++i) {
                    n.params_[w_idx[s]].grad[i] += grads.weight[i];
                }
                cur = std::move(grads.input);
            }
            // Scatter the feature channels back to group members. The
            // relative-position channel depends on point coordinates, which
            // are structural inputs, not activations, so it carries no
            // gradient.
            Act out;
            out.q = QTensor({in_points, in_channels});
            for (std::size_t ci = 0; ci < m; ++ci) {
                for (std::size_t j = 0; j < K; ++j) {
                    const std::size_t mem = groups.groups[ci][j];
                    const std::size_t row = ci * K + j;
                    for (std::size_t c = 0; c < in_channels; ++c) {
                        out.q.set(mem, c, out.q.at(mem, c) + cur.at(row, c));
                    }
                }
            }
            return out;
        }
    };

    struct EdgeConvL : LayerBase {
        std::size_t k = 0;
        std::vector<std::size_t> w_idx;
        // forward caches
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        std::vector<QTensor> stage_in, relu_in;
        std::vector<std::vector<std::size_t>> pool_args;
        std::size_t in_points = 0, in_channels = 0;

        Act forward(Network& n, const Act& in, bool record, rng::Stream*) override {
            const std::size_t pts = in.q.rows(), d = in.q.cols();
            auto graph = geom::knn_graph(in.coords, k);

            QTensor e0({pts * k, 2 * d});
            for (std::size_t r = 0; r < graph.size(); ++r) {
                const auto [u, v] = graph[r];
                for (std::size_t c = 0; c < d; ++c) {
                    e0.set(r, c, in.q.at(v, c) - in.q.at(u, c));
                    e0.set(r, d + c, in.q.at(u, c));
                }
            }

            if (record) {
                stage_in.clear();
                relu_in.clear();
                pool_args.assign(pts, {});
                edges = graph;
                in_points = pts;
                in_channels = d;
            }
            QTensor cur = std::move(e0);
            for (std::size_t s = 0; s < w_idx.size(); ++s) {
                if (record) stage_in.push_back(cur);
                QTensor pre = layers::qconv(n.params_[w_idx[s]].value, cur);
                if (record) relu_in.push_back(pre);
                cur = layers::qrelu(pre, layers::ReluMode::BatchMean);
            }

            Act out;
            const std::size_t dout = cur.cols();
            out.q = QTensor({pts, dout});
            out.coords = in.coords;
            for (std::size_t u = 0; u < pts; ++u) {
                QTensor block({k, dout});
                for (std::size_t j = 0; j < k; ++j) {
                    for (std::size_t c = 0; c < dout; ++c) block.set(j, c, cur.at(u * k + j, c));
                }
                const auto idx = layers::qmaxpool_elementwise_indices(block);
                for (std::size_t c = 0; c < dout; ++c) out.q.set(u, c, block.at(idx[c], c));
                if (record) pool_args[u] = idx;
            }
            return out;
        }

        Act backward(Network& n, const Act& g) override {
            const std::size_t dout = g.q.cols();
            QTensor cur({in_points * k, dout});
            for (std::size_t u = 0; u < in_points; ++u) {
                for (std::size_t c = 0; c < dout; ++c) {
                    cur.set(u * k + pool_args[u][c], c, g.q.at(u, c));
                }
            }
            for (std::size_t s = w_idx.size(); s-- > 0;) {
                cur = layers::qrelu_backward(relu_in[s], cur, layers::ReluMode::BatchMean);
                auto grads = layers::qconv_backward(n.params_[w_idx[s]].value, stage_in[s], cur);
                for (std::size_t i = 0; i < grads.weight.numel(); ++i) {
                    n.params_[w_idx[s]].grad[i] += grads.weight[i];
                }
                cur = std::move(grads.input);
            }
            Act out;
            out.q = QTensor({in_points, in_channels});
            for (std::size_t r = 0; r < edges.size(); ++r) {
                const auto [u, v] = edges[r];
                for (std::size_t c = 0; c < in_channels; ++c) {
                    const Quaternion gd = cur.at(r, c);          // d(f_v - f_u)
                    const Quaternion gc = cur.at(r, in_channels + c); // d(f_u)
                    out.q.set(v, c, out.q.at(v, c) + gd);
                    out.q.set(u, c, out.q.at(u, c) - gd + gc);
                }
            }
            return out;
        }
    };

    struct BridgeL : LayerBase {
        bool sum_variant = false;
        QTensor cached_in;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            Act out;
            out.real = true;
            out.coords = in.coords;
            if (sum_variant) {
                out.r = RTensor(in.q.shape());
                for (std::size_t i = 0; i < in.q.numel(); ++i) {
                    const Quaternion q = in.q.at(i);
                    out.r[i] = q.w + q.x + q.y + q.z;
                }
            } else {
                out.r = q2r::bridge(in.q);
            }
            if (record) cached_in = in.q;
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            if (sum_variant) {
                out.q = QTensor(cached_in.shape());
                for (std::size_t i = 0; i < out.q.numel(); ++i) {
                    const double gv = g.r[i];
                    out.q.set(i, Quaternion{gv, gv, gv, gv});
                }
            } else {
                out.q = q2r::bridge_backward(cached_in, g.r);
            }
            return out;
        }
    };

    struct FcL : LayerBase {
        std::size_t w = 0, b = 0;
        bool relu = false;
        RTensor cached_x, cached_pre;
        std::vector<std::size_t> in_shape;

        Act forward(Network& n, const Act& in, bool record, rng::Stream*) override {
            const RTensor x = in.r.reshaped({in.r.numel()});
            RTensor pre = q2r::linear(n.params_[w].value, n.params_[b].value, x);
            Act out;
            out.real = true;
            out.r = (relu ? q2r::relu(pre) : pre).reshaped({std::size_t{1}, pre.numel()});
            if (record) {
                cached_x = x;
                cached_pre = std::move(pre);
                in_shape = in.r.shape();
            }
            return out;
        }

        Act backward(Network& n, const Act& g) override {
            RTensor go = g.r.reshaped({g.r.numel()});
            if (relu) go = q2r::relu_backward(cached_pre, go);
            auto grads = q2r::linear_backward(n.params_[w].value, cached_x, go);
            for (std::size_t i = 0; i < grads.W.numel(); ++i) n.params_[w].grad[i] += grads.W[i];
            for (std::size_t i = 0; i < grads.b.numel(); ++i) n.params_[b].grad[i] += grads.b[i];
            Act out;
            out.real = true;
            out.r = grads.x.reshaped(in_shape);
            return out;
        }
    };

    struct RConvL : LayerBase {
        std::size_t w = 0, b = 0;
        RTensor cached_in;

        Act forward(Network& n, const Act& in, bool record, rng::Stream*) override {
            const RTensor& W = n.params_[w].value;
            const RTensor& bias = n.params_[b].value;
            const std::size_t pts = in.r.rows(), din = in.r.cols(), dout = W.rows();
            Act out;
            out.real = true;
            out.coords = in.coords;
            out.r = RTensor({pts, dout});
            for (std::size_t p = 0; p < pts; ++p) {
                for (std::size_t u = 0; u < dout; ++u) {
                    double acc = bias[u];
                    for (std::size_t v = 0; v < din; ++v) acc += W.at(u, v) * in.r.at(p, v);
                    out.r.at(p, u) = acc;
                }
            }
            if (record) cached_in = in.r;
            return out;
        }

        Act backward(Network& n, const Act& g) override {
            const RTensor& W = n.params_[w].value;
            const std::size_t pts = cached_in.rows(), din = cached_in.cols(), dout = W.rows();
            Act out;
            out.real = true;
            out.r = RTensor({pts, din});
            for (std::size_t p = 0; p < pts; ++p) {
                for (std::size_t u = 0; u < dout; ++u) {
                    const double go = g.r.at(p, u);
                    n.params_[b].grad[u] += go;
                    for (std::size_t v = 0; v < din; ++v) {
                        n.params_[w].grad[u * din + v] += go * cached_in.at(p, v);
                        out.r.at(p, v) += W.at(u, v) * go;
                    }
                }
            }
            return out;
        }
    };

    struct RReluL : LayerBase {
        RTensor cached_in;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            Act out;
            out.real = true;
            out.coords = in.coords;
            out.r = q2r::relu(in.r).reshaped(in.r.shape());
            if (record) cached_in = in.r;
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.real = true;
            out.r = q2r::relu_backward(cached_in, g.r).reshaped(g.r.shape());
            return out;
        }
    };

    struct RPoolPointsL : LayerBase {
        std::vector<std::size_t> args;
        std::size_t in_rows = 0;

        Act forward(Network&, const Act& in, bool record, rng::Stream*) override {
            const std::size_t pts = in.r.rows(), d = in.r.cols();
            Act out;
            out.real = true;
            out.r = RTensor({1, d});
            std::vector<std::size_t> idx(d, 0);
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t p = 1; p < pts; ++p) {
                    if (in.r.at(p, c) > in.r.at(idx[c], c)) idx[c] = p;
                }
                out.r.at(0, c) = in.r.at(idx[c], c);
            }
            if (record) {
                args = idx;
                in_rows = pts;
            }
            return out;
        }

        Act backward(Network&, const Act& g) override {
            Act out;
            out.real = true;
            out.r = RTensor({in_rows, g.r.cols()});
            for (std::size_t c = 0; c < g.r.cols(); ++c) out.r.at(args[c], c) = g.r.at(0, c);
            return out;
        }
    };

    // ---- construction ------------------------------------------------------

    std::size_t add_param(const std::string& name, std::vector<std::size_t> shape,
                          double init_scale, rng::Stream& rng) {
        Param p;
        p.name = name;
        p.value = RTensor(shape);
        p.grad = RTensor(std::move(shape));
        for (auto& v : p.value.data()) v = rng.uniform(-init_scale, init_scale);
        params_.push_back(std::move(p));
        return params_.size() - 1;
    }

    void init_layer(std::size_t i, const LayerDesc& d, ShapeState& st, rng::Stream& rng) {
        const std::string prefix = "L" + std::to_string(i) + "." + op_name(d.op);
        switch (d.op) {
            case LayerOp::QConv:
            case LayerOp::QConvBiased: {
                auto l = std::make_unique<QConvL>();
                const double s = std::sqrt(1.0 / static_cast<double>(d.in));
                l->w = add_param(prefix + ".w", {d.out, d.in}, s, rng);
                if (d.op == LayerOp::QConvBiased) {
                    l->biased = true;
                    l->b = add_param(prefix + ".b", {d.out}, s, rng);
                }
                layers_.push_back(std::move(l));
                st.channels = d.out;
                break;
            }
            case LayerOp::QRelu:
            case LayerOp::QReluWrongGrad: {
                auto l = std::make_unique<QReluL>();
                l->mode = d.relu_mode;
                l->c = d.relu_c;
                l->wrong_grad = d.op == LayerOp::QReluWrongGrad;
                layers_.push_back(std::move(l));
                break;
            }
            case LayerOp::ReluComponentwise:
                layers_.push_back(std::make_unique<ReluComponentwiseL>());
                break;
            case LayerOp::QNorm:
                layers_.push_back(std::make_unique<QNormL>());
                break;
            case LayerOp::RNorm:
                layers_.push_back(std::make_unique<RNormL>());
                break;
            case LayerOp::QDropout: {
                auto l = std::make_unique<QDropoutL>();
                l->p = d.dropout_p;
                layers_.push_back(std::move(l));
                break;
            }
            case LayerOp::PoolPoints:
                layers_.push_back(std::make_unique<PoolPointsL>());
                st.points = 1;
                break;
            case LayerOp::SetAbstraction: {
                auto l = std::make_unique<SAL>();
                l->m = d.centers;
                l->K = d.k;
                l->radius = d.radius;
                std::size_t cin = st.channels + 1;
                for (std::size_t s = 0; s < d.mlp.size(); ++s) {
                    const double sc = std::sqrt(1.0 / static_cast<double>(cin));
                    l->w_idx.push_back(add_param(prefix + ".conv" + std::to_string(s) + ".w",
                                                 {d.mlp[s], cin}, sc, rng));
                    cin = d.mlp[s];
                }
                layers_.push_back(std::move(l));
                st.points = d.centers;
                st.channels = d.mlp.back();
                break;
            }
            case LayerOp::EdgeConv: {
                auto l = std::make_unique<EdgeConvL>();
                l->k = d.k;
                std::size_t cin = 2 * st.channels;
                for (std::size_t s = 0; s < d.mlp.size(); ++s) {
                    const double sc = std::sqrt(1.0 / static_cast<double>(cin));
                    l->w_idx.push_back(add_param(prefix + ".conv" + std::to_string(s) + ".w",
                                                 {d.mlp[s], cin}, sc, rng));
                    cin = d.mlp[s];
                }
                layers_.push_back(std::move(l));
                st.channels = d.mlp.back();
                break;
            }
            case LayerOp::Bridge:
            case LayerOp::BridgeSum: {
                auto l = std::make_unique<BridgeL>();
                l->sum_variant = d.op == LayerOp::BridgeSum;
                layers_.push_back(std::move(l));
                st.real = true;
                break;
            }
            case LayerOp::Fc: {
                auto l = std::make_unique<FcL>();
                const double s = std::sqrt(1.0 / static_cast<double>(d.in));
                l->w = add_param(prefix + ".w", {d.out, d.in}, s, rng);
                l->b = add_param(prefix + ".b", {d.out}, s, rng);
                l->relu = d.fc_relu;
                layers_.push_back(std::move(l));
                st.points = 1;
                st.channels = d.out;
                break;
            }
            case LayerOp::RConv: {
                auto l = std::make_unique<RConvL>();
                const double s = std::sqrt(1.0 / static_cast<double>(d.in));
                l->w = add_param(prefix + ".w", {d.out, d.in}, s, rng);
                l->b = add_param(prefix + ".b", {d.out}, s, rng);
                layers_.push_back(std::move(l));
                st.channels = d.out;
                break;
            }
            case LayerOp::RRelu:
                layers_.push_back(std::make_unique<RReluL>());
                break;
            case LayerOp::RPoolPoints:
                layers_.push_back(std::make_unique<RPoolPointsL>());
                st.points = 1;
                break;
        }
    }

    // ---- execution ---------------------------------------------------------

    Act input_act(const PointCloud& cloud) const {
        if (cloud.size() == 0) throw ValueError("forward: empty point cloud");
        Act a;
        a.coords = cloud.to_vectors();
        if (detail::is_real_op(spec_.layers.front().op)) {
            a.real = true;
            a.r = RTensor({cloud.size(), 3});
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                const Vec3 p = cloud.point(i);
                a.r.at(i, 0) = p.x;
                a.r.at(i, 1) = p.y;
                a.r.at(i, 2) = p.z;
            }
        } else {
            a.q = cloud.points.reshaped({cloud.size(), 1});
        }
        return a;
    }

    Act run(Act a, std::size_t from, std::size_t to, bool record, rng::Stream* rng) {
        for (std::size_t i = from; i < to; ++i) {
            a = layers_[i]->forward(*this, a, record, rng);
        }
        return a;
    }

    void take_tape() {
        if (!has_tape_) throw StateError("backward called without a recorded forward pass");
        if (tape_consumed_) throw StateError("backward called twice on one forward pass");
        tape_consumed_ = true;
    }

    void run_backward(Act g) {
        for (std::size_t i = layers_.size(); i-- > 0;) {
            g = layers_[i]->backward(*this, g);
        }
    }

    NetworkSpec spec_;
    std::vector<Param> params_;
    std::vector<std::unique_ptr<LayerBase>> layers_;
    bool has_tape_ = false;
    bool tape_consumed_ = false;
};

// --------------------------------------------------------------------------
// Twin derivation: the same architecture with conventional real-valued ops.
// Quaternion input (1 channel) becomes 3 real coordinate channels, biases
// come back, pooling and relu act per component, the bridge disappears.
// --------------------------------------------------------------------------

inline NetworkSpec derive_twin(const NetworkSpec& s) {
    NetworkSpec t;
    t.name = s.name + "-twin";
    t.input_points = s.input_points;
    t.classes = s.classes;
    t.seed = s.seed;
    bool first_conv = true;
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
        const LayerDesc& d = s.layers[i];
        switch (d.op) {
            case LayerOp::QConv: {
                const std::size_t in = (first_conv && d.in == 1) ? 3 : d.in;
                t.layers.push_back(LayerDesc::rconv(in, d.out));
                first_conv = false;
                break;
            }
            case LayerOp::QRelu:
                t.layers.push_back(LayerDesc::rrelu());
                break;
            case LayerOp::QNorm:
                t.layers.push_back(LayerDesc::rnorm());
                break;
            case LayerOp::PoolPoints:
                t.layers.push_back(LayerDesc::rpool_points());
                break;
            case LayerOp::Bridge:
                break; // real features pass through unchanged
            case LayerOp::Fc:
                t.layers.push_back(d);
                break;
            default:
                throw SpecError("twin derivation: layer " + std::to_string(i) + " (" +
                                op_name(d.op) + ") has no trainable real twin");
        }
    }
    return t;
}

// --------------------------------------------------------------------------
// Complexity accounting. Parameter counts are exact. Flop counts follow the
// usual efficiency-table convention: one multiply-accumulate = 1 flop,
// counted for parameterized ops (convolutions, fully connected layers,
// biases) and for the distance evaluations of the neighbourhood searches
// (identical on both sides); elementwise nonlinearities, pooling comparisons
// and the bridge are excluded. Quaternion features are pure, so a quaternion
// conv runs 3 live component MACs per weight; the twin is the same
// architecture on conventional real channels (3 input channels, biases,
// componentwise relu/pool, no bridge).
// --------------------------------------------------------------------------

struct ComplexityReport {
    std::string name;
    std::size_t params = 0, flops = 0;
    std::size_t twin_params = 0, twin_flops = 0;

    [[nodiscard]] json to_json() const {
        return json{{"name", name},
                    {"param_count", params},
                    {"flop_count", flops},
                    {"twin", json{{"param_count", twin_params}, {"flop_count", twin_flops}}}};
    }
};

inline ComplexityReport count_complexity(const NetworkSpec& s) {
    ComplexityReport r;
    r.name = s.name;
    std::size_t P = s.input_points;   // surviving points
    std::size_t dq = 1, dt = 3;       // live channels, quaternion net vs twin
    bool first_conv = true;

    const auto conv_chain = [&r](std::size_t rows, std::size_t cq, std::size_t ct,
                                 const std::vector<std::size_t>& mlp) {
        for (std::size_t width : mlp) {
            r.params += width * cq;
            r.flops += 3 * rows * width * cq;
            r.twin_params += width * ct + width;
            r.twin_flops += rows * (width * ct + width);
            cq = ct = width;
        }
    };

    for (const LayerDesc& d : s.layers) {
        switch (d.op) {
            case LayerOp::QConv:
            case LayerOp::QConvBiased: {
                const std::size_t tin = (first_conv && d.in == 1) ? 3 : d.in;
                first_conv = false;
                r.params += d.out * d.in;
                r.flops += 3 * P * d.out * d.in;
                if (d.op == LayerOp::QConvBiased) {
                    r.params += d.out;
                    r.flops += 3 * P * d.out;
                }
                r.twin_params += d.out * tin + d.out;
                r.twin_flops += P * (d.out * tin + d.out);
                dq = dt = d.out;
                break;
            }
            case LayerOp::QRelu:
            case LayerOp::QReluWrongGrad:
            case LayerOp::ReluComponentwise:
            case LayerOp::RRelu:
            case LayerOp::QNorm:
            case LayerOp::RNorm:
            case LayerOp::QDropout:
                break; // elementwise, excluded by convention
            case LayerOp::PoolPoints:
            case LayerOp::RPoolPoints:
                P = 1; // comparisons only, excluded by convention
                break;
            case LayerOp::SetAbstraction: {
                // fps + ball query distances: 3 MACs per point/center pair,
                // identical for both nets.
                const std::size_t search = 2 * 3 * P * d.centers;
                r.flops += search;
                r.twin_flops += search;
                conv_chain(d.centers * d.k, dq + 1, dt + 3, d.mlp);
                first_conv = false;
                P = d.centers;
                dq = dt = d.mlp.back();
                break;
            }
            case LayerOp::EdgeConv: {
                const std::size_t search = 3 * P * P; // pairwise graph build
                r.flops += search;
                r.twin_flops += search;
                conv_chain(P * d.k, 2 * dq, 2 * dt, d.mlp);
                first_conv = false;
                dq = dt = d.mlp.back();
                break;
            }
            case LayerOp::Bridge:
            case LayerOp::BridgeSum:
                break; // norm map, excluded; the twin is already real-valued
            case LayerOp::Fc: {
                const std::size_t cost = d.in * d.out + d.out;
                r.params += cost;
                r.flops += cost;
                r.twin_params += cost;
                r.twin_flops += cost;
                P = 1;
                dq = dt = d.out;
                break;
            }
            case LayerOp::RConv:
                r.params += d.out * d.in + d.out;
                r.flops += P * (d.out * d.in + d.out);
                r.twin_params += d.out * d.in + d.out;
                r.twin_flops += P * (d.out * d.in + d.out);
                dq = dt = d.out;
                break;
        }
    }
    return r;
}

} // namespace reqnn::net
