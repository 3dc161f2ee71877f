#pragma once

#include <cstdint>
#include <vector>

#include "reqnn/rotor.hpp"

namespace reqnn::layers {

/// Norm-squared guard used in backward passes only; keeps 1/norm finite at
/// the origin without disturbing gradients at regular points.
inline constexpr double kNormGuard = 1e-20;

inline double guarded_norm(const Quaternion& q) {
    return std::sqrt(norm_sq(q) + kNormGuard);
}

// ---------------------------------------------------------------------------
// Quaternion convolution: a real-valued weight matrix applied to quaternion
// feature vectors. One shared real weight scales all four components of an
// element, which is what commutes with rotation. No bias term: adding a
// nonzero constant would not co-rotate with the input.
// ---------------------------------------------------------------------------

/// weight: real matrix [out, in]. f: features [in] or [points, in].
/// Returns [out] or [points, out].
inline QTensor qconv(const RTensor& weight, const QTensor& f) {
    if (weight.rank() != 2) {
        throw ShapeError("qconv: weight must be rank 2, got " + shape_to_string(weight.shape()));
    }
    const std::size_t out_ch = weight.rows(), in_ch = weight.cols();
    const bool batched = f.rank() == 2;
    const std::size_t pts = batched ? f.rows() : 1;
    const std::size_t d = batched ? f.cols() : (f.rank() == 1 ? f.extent(0) : 0);
    if (f.rank() > 2 || d != in_ch) {
        throw ShapeError("qconv: weight " + shape_to_string(weight.shape()) +
                         " does not accept features " + shape_to_string(f.shape()));
    }
    QTensor out(batched ? std::vector<std::size_t>{pts, out_ch}
                        : std::vector<std::size_t>{out_ch});
    for (std::size_t p = 0; p < pts; ++p) {
        for (std::size_t u = 0; u < out_ch; ++u) {
            Quaternion acc{};
            for (std::size_t v = 0; v < in_ch; ++v) {
                acc = acc + weight.at(u, v) * f.at(p * in_ch + v);
            }
            out.set(p * out_ch + u, acc);
        }
    }
    return out;
}

struct QConvGrads {
    RTensor weight; // same shape as the weight matrix
    QTensor input;  // same shape as the input features
};

inline QConvGrads qconv_backward(const RTensor& weight, const QTensor& f, const QTensor& gout) {
    const std::size_t out_ch = weight.rows(), in_ch = weight.cols();
    const bool batched = f.rank() == 2;
    const std::size_t pts = batched ? f.rows() : 1;
    QConvGrads g{RTensor(weight.shape()), QTensor(f.shape())};
    for (std::size_t p = 0; p < pts; ++p) {
        for (std::size_t u = 0; u < out_ch; ++u) {
            const Quaternion go = gout.at(p * out_ch + u);
            for (std::size_t v = 0; v < in_ch; ++v) {
                g.weight.at(u, v) += dot4(go, f.at(p * in_ch + v));
                g.input.set(p * in_ch + v, g.input.at(p * in_ch + v) + weight.at(u, v) * go);
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Norm rescaling nonlinearity: out = (|f| / max(|f|, c)) * f per element.
// Scaling by a real function of the rotation-invariant norm keeps the
// direction, so the op commutes with rotation. The threshold c is either a
// constant (default 1) or the mean element norm of the feature vector.
// ---------------------------------------------------------------------------

enum class ReluMode { Constant, BatchMean };

inline double qrelu_threshold(const QTensor& f, ReluMode mode, double c) {
    if (mode == ReluMode::Constant) {
        if (!(c > 0.0)) throw ValueError("qrelu: constant threshold must be positive");
        return c;
    }
    if (f.numel() == 0) throw ValueError("qrelu: batch-mean threshold of an empty feature vector");
    double sum = 0.0;
    for (std::size_t i = 0; i < f.numel(); ++i) sum += norm(f.at(i));
    return sum / static_cast<double>(f.numel());
}

inline QTensor qrelu(const QTensor& f, ReluMode mode = ReluMode::Constant, double c = 1.0) {
    const double thr = qrelu_threshold(f, mode, c);
    return qt_map(f, [thr](const Quaternion& q) {
        const double n = norm(q);
        if (n >= thr) return q;
        return thr > 0.0 ? (n / thr) * q : Quaternion{};
    });
}

inline QTensor qrelu_backward(const QTensor& f, const QTensor& gout,
                              ReluMode mode = ReluMode::Constant, double c = 1.0) {
    check_same_shape(f, gout, "qrelu_backward");
    const double thr = qrelu_threshold(f, mode, c);
    QTensor gin(f.shape());
    double thr_sens = 0.0; // d(loss)/d(thr), accumulated over shrunk elements
    for (std::size_t i = 0; i < f.numel(); ++i) {
        const Quaternion q = f.at(i), go = gout.at(i);
        const double n = norm(q);
        if (n >= thr) {
            gin.set(i, go);
            continue;
        }
        const double ng = guarded_norm(q);
        gin.set(i, (n / thr) * go + (dot4(q, go) / (thr * ng)) * q);
        thr_sens -= (n / (thr * thr)) * dot4(q, go);
    }
    if (mode == ReluMode::BatchMean) {
        // thr depends on every element norm: d(thr)/d(f_i) = f_i / (numel * |f_i|).
        const double inv_d = 1.0 / static_cast<double>(f.numel());
        for (std::size_t i = 0; i < f.numel(); ++i) {
            const Quaternion q = f.at(i);
            gin.set(i, gin.at(i) + (thr_sens * inv_d / guarded_norm(q)) * q);
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------
// Batch normalization without mean subtraction: each element is divided by
// the root mean squared norm of that element across the batch (plus eps).
// Subtracting a mean would break equivariance, dividing by an invariant
// scalar does not. An optional positive per-element real scale is available
// behind scaled variants; it is off by default.
// ---------------------------------------------------------------------------

inline std::vector<QTensor> qbatchnorm(const std::vector<QTensor>& batch, double eps = 1e-5) {
    if (batch.empty()) throw ValueError("qbatchnorm: empty batch");
    if (!(eps > 0.0)) throw ValueError("qbatchnorm: eps must be positive");
    const std::size_t B = batch.size(), n = batch[0].numel();
    for (const auto& t : batch) check_same_shape(t, batch[0], "qbatchnorm");
    std::vector<QTensor> out(B, QTensor(batch[0].shape()));
    for (std::size_t v = 0; v < n; ++v) {
        double m = 0.0;
        for (std::size_t j = 0; j < B; ++j) m += norm_sq(batch[j].at(v));
        const double div = std::sqrt(m / static_cast<double>(B) + eps);
        for (std::size_t j = 0; j < B; ++j) out[j].set(v, (1.0 / div) * batch[j].at(v));
    }
    return out;
}

inline std::vector<QTensor> qbatchnorm_scaled(const std::vector<QTensor>& batch,
                                              const RTensor& gamma, double eps = 1e-5) {
    if (batch.empty()) throw ValueError("qbatchnorm: empty batch");
    if (gamma.numel() != batch[0].numel()) {
        throw ShapeError("qbatchnorm: scale shape " + shape_to_string(gamma.shape()) +
                         " does not match features " + shape_to_string(batch[0].shape()));
    }
    for (std::size_t i = 0; i < gamma.numel(); ++i) {
        if (!(gamma[i] > 0.0)) throw ValueError("qbatchnorm: scale entries must be positive");
    }
    std::vector<QTensor> out = qbatchnorm(batch, eps);
    for (auto& t : out) {
        for (std::size_t v = 0; v < t.numel(); ++v) t.set(v, gamma[v] * t.at(v));
    }
    return out;
}

inline std::vector<QTensor> qbatchnorm_backward(const std::vector<QTensor>& batch,
                                                const std::vector<QTensor>& gout,
                                                double eps = 1e-5) {
    const std::size_t B = batch.size(), n = batch[0].numel();
    std::vector<QTensor> gin(B, QTensor(batch[0].shape()));
    for (std::size_t v = 0; v < n; ++v) {
        double m = 0.0, coupled = 0.0;
        for (std::size_t j = 0; j < B; ++j) m += norm_sq(batch[j].at(v));
        const double div = std::sqrt(m / static_cast<double>(B) + eps);
        for (std::size_t j = 0; j < B; ++j) coupled += dot4(batch[j].at(v), gout[j].at(v));
        const double k = coupled / (static_cast<double>(B) * div * div * div);
        for (std::size_t j = 0; j < B; ++j) {
            gin[j].set(v, (1.0 / div) * gout[j].at(v) - k * batch[j].at(v));
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------
// Norm-based max pooling. Comparing norms instead of components keeps the
// winner stable under rotation. Ties are broken by the lexicographically
// largest (x, y, z, w) component tuple so permutations cannot change the
// outcome.
// ---------------------------------------------------------------------------

/// True when b should win the pool over a.
inline bool pool_less(const Quaternion& a, const Quaternion& b) {
    const double na = norm_sq(a), nb = norm_sq(b);
    if (na != nb) return na < nb;
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.z != b.z) return a.z < b.z;
    return a.w < b.w;
}

inline std::size_t qmaxpool_index(const QTensor& f) {
    if (f.numel() == 0) throw ValueError("qmaxpool: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.numel(); ++i) {
        if (pool_less(f.at(best), f.at(i))) best = i;
    }
    return best;
}

inline Quaternion qmaxpool(const QTensor& f) { return f.at(qmaxpool_index(f)); }

/// Per-channel pooling over rows: input [k, d] -> output [d], channel c keeps
/// the row whose element has the largest norm in that channel.
inline std::vector<std::size_t> qmaxpool_elementwise_indices(const QTensor& f) {
    if (f.rank() != 2 || f.rows() == 0) {
        throw ShapeError("elementwise qmaxpool: input must be [k,d] with k > 0, got " +
                         shape_to_string(f.shape()));
    }
    const std::size_t k = f.rows(), d = f.cols();
    std::vector<std::size_t> arg(d, 0);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t r = 1; r < k; ++r) {
            if (pool_less(f.at(arg[c], c), f.at(r, c))) arg[c] = r;
        }
    }
    return arg;
}

inline QTensor qmaxpool_elementwise(const QTensor& f) {
    const auto arg = qmaxpool_elementwise_indices(f);
    QTensor out({arg.size()});
    for (std::size_t c = 0; c < arg.size(); ++c) out.set(c, f.at(arg[c], c));
    return out;
}

/// True when the two largest element norms are closer than `gap`; such pools
/// are unstable and certification resamples them.
inline bool qmaxpool_near_tie(const QTensor& f, double gap) {
    if (f.numel() < 2) return false;
    double top = -1.0, second = -1.0;
    for (std::size_t i = 0; i < f.numel(); ++i) {
        const double n = norm(f.at(i));
        if (n > top) { second = top; top = n; }
        else if (n > second) { second = n; }
    }
    return top - second < gap;
}

inline bool qmaxpool_elementwise_near_tie(const QTensor& f, double gap) {
    const std::size_t k = f.rows(), d = f.cols();
    for (std::size_t c = 0; c < d; ++c) {
        double top = -1.0, second = -1.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double n = norm(f.at(r, c));
            if (n > top) { second = top; top = n; }
            else if (n > second) { second = n; }
        }
        if (k >= 2 && top - second < gap) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Dropout: a dropped element loses all four components at once (zeroing a
// single component would pick a preferred direction). Survivors are scaled
// by 1/(1-p) so the expectation is unchanged.
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> dropout_mask(std::size_t n, double p, rng::Stream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout: p must lie in [0, 1)");
    std::vector<std::uint8_t> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = rng.uniform() >= p ? 1 : 0;
    return keep;
}

inline QTensor qdropout_apply(const QTensor& f, const std::vector<std::uint8_t>& keep, double p) {
    if (keep.size() != f.numel()) throw ShapeError("dropout: mask size does not match input");
    const double scale = 1.0 / (1.0 - p);
    QTensor out(f.shape());
    for (std::size_t i = 0; i < f.numel(); ++i) {
        if (keep[i]) out.set(i, scale * f.at(i));
    }
    return out;
}

inline QTensor qdropout(const QTensor& f, double p, bool training, rng::Stream& rng) {
    if (!training) {
        if (!(p >= 0.0 && p < 1.0)) throw ValueError("dropout: p must lie in [0, 1)");
        return f;
    }
    return qdropout_apply(f, dropout_mask(f.numel(), p, rng), p);
}

} // namespace reqnn::layers
