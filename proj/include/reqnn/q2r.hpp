#pragma once

#include "reqnn/tensor.hpp"

namespace reqnn::q2r {

/// Quaternion-to-real bridge: each feature becomes its squared norm. Rotation
/// acts by a sandwich with a unit quaternion, which preserves norms, so
/// everything after this point is rotation-invariant.
inline RTensor bridge(const QTensor& f) { return qt_norm_sq(f); }

inline QTensor bridge_backward(const QTensor& f, const RTensor& gout) {
    if (gout.shape() != f.shape()) {
        throw ShapeError("bridge backward: gradient shape " + shape_to_string(gout.shape()) +
                         " does not match input " + shape_to_string(f.shape()));
    }
    QTensor gin(f.shape());
    for (std::size_t i = 0; i < f.numel(); ++i) gin.set(i, (2.0 * gout[i]) * f.at(i));
    return gin;
}

/// Dense real layer: y = W x + b with W [out, in], x [in].
inline RTensor linear(const RTensor& W, const RTensor& b, const RTensor& x) {
    if (W.rank() != 2 || x.numel() != W.cols() || b.numel() != W.rows()) {
        throw ShapeError("linear: W " + shape_to_string(W.shape()) + ", b " +
                         shape_to_string(b.shape()) + ", x " + shape_to_string(x.shape()) +
                         " are inconsistent");
    }
    RTensor y({W.rows()});
    for (std::size_t u = 0; u < W.rows(); ++u) {
        double acc = b[u];
        for (std::size_t v = 0; v < W.cols(); ++v) acc += W.at(u, v) * x[v];
        y[u] = acc;
    }
    return y;
}

struct LinearGrads {
    RTensor W, b, x;
};

inline LinearGrads linear_backward(const RTensor& W, const RTensor& x, const RTensor& gout) {
    LinearGrads g{RTensor(W.shape()), RTensor({W.rows()}), RTensor(x.shape())};
    for (std::size_t u = 0; u < W.rows(); ++u) {
        g.b[u] = gout[u];
        for (std::size_t v = 0; v < W.cols(); ++v) {
            g.W.at(u, v) = gout[u] * x[v];
            g.x[v] += W.at(u, v) * gout[u];
        }
    }
    return g;
}

inline RTensor relu(const RTensor& x) {
    RTensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

inline RTensor relu_backward(const RTensor& x, const RTensor& gout) {
    check_same_shape(x, gout, "relu backward");
    RTensor g(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) g[i] = x[i] > 0.0 ? gout[i] : 0.0;
    return g;
}

struct SoftmaxCE {
    double loss = 0.0;
    RTensor probs;
    RTensor grad; // d(loss)/d(logits)
};

/// Numerically stable softmax + cross entropy against an integer label.
inline SoftmaxCE softmax_cross_entropy(const RTensor& logits, std::size_t label) {
    if (label >= logits.numel()) {
        throw ValueError("cross entropy: label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.numel()) + " classes");
    }
    SoftmaxCE r;
    r.probs = RTensor(logits.shape());
    r.grad = RTensor(logits.shape());
    double mx = logits[0];
    for (std::size_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.numel(); ++i) z += std::exp(logits[i] - mx);
    const double logz = std::log(z) + mx;
    r.loss = logz - logits[label];
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        r.probs[i] = std::exp(logits[i] - logz);
        r.grad[i] = r.probs[i] - (i == label ? 1.0 : 0.0);
    }
    return r;
}

inline std::size_t argmax(const RTensor& x) {
    if (x.numel() == 0) throw ValueError("argmax of an empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.numel(); ++i) {
        if (x[i] > x[best]) best = i;
    }
    return best;
}

} // namespace reqnn::q2r
