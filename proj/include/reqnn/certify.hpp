#pragma once

#include "reqnn/dataset.hpp"
#include "reqnn/train.hpp"

namespace reqnn::cert {

using nlohmann::json;

// --------------------------------------------------------------------------
// Reports. A certificate runs N seeded trials of a property check and keeps
// the worst relative error, the trials that exceeded the tolerance, and how
// often degenerate inputs (pooling near-ties, flat PCA spectra) had to be
// resampled. Reports are reproducible: the same base seed always yields the
// same report.
// --------------------------------------------------------------------------

struct CertFailure {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::string input_digest;
    double error = 0.0;
};

struct CertReport {
    std::string subject;
    std::string property;
    std::size_t trials = 0;
    double tolerance = 0.0;
    std::uint64_t seed = 0;
    double max_relative_error = 0.0;
    std::size_t tie_resamples = 0;
    std::vector<CertFailure> failures;

    [[nodiscard]] bool pass() const { return failures.empty(); }

    [[nodiscard]] json to_json() const {
        json fails = json::array();
        for (const auto& f : failures) {
            fails.push_back(json{{"trial", f.trial},
                                 {"seed", f.seed},
                                 {"input_digest", f.input_digest},
                                 {"error", f.error}});
        }
        return json{{"subject", subject},
                    {"property", property},
                    {"trials", trials},
                    {"tolerance", tolerance},
                    {"seed", seed},
                    {"max_relative_error", max_relative_error},
                    {"tie_resamples", tie_resamples},
                    {"pass", pass()},
                    {"failures", fails}};
    }
};

/// max over elements of |lhs - rhs| / (1 + |rhs|).
inline double rel_err(const QTensor& lhs, const QTensor& rhs) {
    check_same_shape(lhs, rhs, "relative error");
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.numel(); ++i) {
        worst = std::max(worst, norm(lhs.at(i) - rhs.at(i)) / (1.0 + norm(rhs.at(i))));
    }
    return worst;
}

inline double rel_err(const RTensor& lhs, const RTensor& rhs) {
    check_same_shape(lhs, rhs, "relative error");
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.numel(); ++i) {
        worst = std::max(worst, std::abs(lhs[i] - rhs[i]) / (1.0 + std::abs(rhs[i])));
    }
    return worst;
}

namespace detail {

struct TrialOutcome {
    double error = 0.0;
    std::size_t resamples = 0;
    std::uint64_t input_digest = 0;
};

/// Runs trials in parallel (each trial forks its own stream off the base
/// seed) and merges results in trial order, so reports do not depend on the
/// worker count.
template <typename TrialFn>
CertReport run_trials(std::string subject, std::string property, std::size_t trials,
                      double tolerance, std::uint64_t seed, TrialFn&& fn,
                      bool parallel = true) {
    std::vector<TrialOutcome> out(trials);
    const auto body = [&](std::size_t t) {
        rng::Stream rng = rng::Stream::fork(seed, t);
        out[t] = fn(rng, t);
    };
    if (parallel) {
        parallel_for(trials, body);
    } else {
        for (std::size_t t = 0; t < trials; ++t) body(t);
    }

    CertReport rep;
    rep.subject = std::move(subject);
    rep.property = std::move(property);
    rep.trials = trials;
    rep.tolerance = tolerance;
    rep.seed = seed;
    for (std::size_t t = 0; t < trials; ++t) {
        rep.max_relative_error = std::max(rep.max_relative_error, out[t].error);
        rep.tie_resamples += out[t].resamples;
        if (!(out[t].error <= tolerance)) {
            rep.failures.push_back({t, seed, hex64(out[t].input_digest), out[t].error});
        }
    }
    return rep;
}

inline QTensor random_pure(const std::vector<std::size_t>& shape, rng::Stream& rng,
                           double sigma = 1.0) {
    QTensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t.set(i, Quaternion::pure(sigma * rng.normal(), sigma * rng.normal(),
                                  sigma * rng.normal()));
    }
    return t;
}

/// Mixed scales so norm thresholds see both branches.
inline QTensor random_pure_mixed(const std::vector<std::size_t>& shape, rng::Stream& rng) {
    QTensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const double s = rng.uniform() < 0.5 ? 0.25 : 1.5;
        t.set(i, Quaternion::pure(s * rng.normal(), s * rng.normal(), s * rng.normal()));
    }
    return t;
}

inline RTensor random_real(const std::vector<std::size_t>& shape, rng::Stream& rng) {
    RTensor t(shape);
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

inline std::vector<Vec3> random_points(std::size_t n, rng::Stream& rng) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {rng.normal(), rng.normal(), rng.normal()};
    return pts;
}

} // namespace detail

// --------------------------------------------------------------------------
// Layer-level rotation equivariance: op(R x R~) == R op(x) R~ for the
// quaternion ops, checked on randomized shapes, weights and rotations.
// --------------------------------------------------------------------------

enum class LayerSubject {
    QConv,
    QReluConstant,
    QReluBatchMean,
    QBatchNorm,
    QMaxPool,
    QMaxPoolElementwise,
    QDropoutFixedMask,
    CoordsWeighting,
    DensityWeighting,
    // Broken variants for the mutation audit; these must NOT certify.
    QConvBiased,
    ReluComponentwise,
};

inline const char* layer_subject_name(LayerSubject s) {
    switch (s) {
        case LayerSubject::QConv: return "qconv";
        case LayerSubject::QReluConstant: return "qrelu-constant";
        case LayerSubject::QReluBatchMean: return "qrelu-batch-mean";
        case LayerSubject::QBatchNorm: return "qbatchnorm";
        case LayerSubject::QMaxPool: return "qmaxpool";
        case LayerSubject::QMaxPoolElementwise: return "qmaxpool-elementwise";
        case LayerSubject::QDropoutFixedMask: return "qdropout-fixed-mask";
        case LayerSubject::CoordsWeighting: return "coords-weighting";
        case LayerSubject::DensityWeighting: return "density-weighting";
        case LayerSubject::QConvBiased: return "qconv-biased";
        case LayerSubject::ReluComponentwise: return "relu-componentwise";
    }
    return "?";
}

inline const std::vector<LayerSubject>& certified_layer_subjects() {
    static const std::vector<LayerSubject> s = {
        LayerSubject::QConv,          LayerSubject::QReluConstant,
        LayerSubject::QReluBatchMean, LayerSubject::QBatchNorm,
        LayerSubject::QMaxPool,       LayerSubject::QMaxPoolElementwise,
        LayerSubject::QDropoutFixedMask, LayerSubject::CoordsWeighting,
        LayerSubject::DensityWeighting,
    };
    return s;
}

namespace detail {

/// Gaussian cloud with a well-separated PCA spectrum and unambiguous axis
/// orientation, resampled until conditioning holds. Keeps the frame
/// numerically stable so equivariance is measured, not conditioning.
inline std::vector<Vec3> well_framed_points(std::size_t n, rng::Stream& rng,
                                            std::size_t& resamples) {
    for (;;) {
        std::vector<Vec3> pts(n);
        for (auto& p : pts) p = {1.8 * rng.normal(), 1.0 * rng.normal(), 0.45 * rng.normal()};
        try {
            const geom::LocalFrame f = geom::pca_lrf(pts);
            const double scale = f.eigenvalues[0];
            if (f.eigenvalues[0] - f.eigenvalues[1] < 0.05 * scale ||
                f.eigenvalues[1] - f.eigenvalues[2] < 0.05 * scale) {
                ++resamples;
                continue;
            }
            // Orientation must not hinge on a borderline projection.
            const Vec3 c = f.origin;
            std::size_t far = 0;
            for (std::size_t i = 1; i < pts.size(); ++i) {
                if (dist_sq(pts[i], c) > dist_sq(pts[far], c)) far = i;
            }
            if (std::abs(dot(f.axes[0], pts[far] - c)) < 1e-3 ||
                std::abs(dot(f.axes[1], pts[far] - c)) < 1e-3) {
                ++resamples;
                continue;
            }
            return pts;
        } catch (const DegenerateFrameError&) {
            ++resamples;
        }
    }
}

inline TrialOutcome layer_trial(LayerSubject subject, rng::Stream& rng) {
    TrialOutcome out;
    const Rotor R = random_rotor(rng);
    switch (subject) {
        case LayerSubject::QConv:
        case LayerSubject::QConvBiased: {
            const std::size_t din = 2 + rng.index(5), dout = 1 + rng.index(6);
            const RTensor W = random_real({dout, din}, rng);
            const RTensor b = random_real({dout}, rng);
            const QTensor f = random_pure({din}, rng);
            const auto apply = [&](const QTensor& in) {
                QTensor y = layers::qconv(W, in);
                if (subject == LayerSubject::QConvBiased) {
                    for (std::size_t u = 0; u < y.numel(); ++u) {
                        y.set(u, y.at(u) + Quaternion{b[u], b[u], b[u], b[u]});
                    }
                }
                return y;
            };
            out.input_digest = f.digest();
            out.error = rel_err(apply(rotate_tensor(R, f)), rotate_tensor(R, apply(f)));
            break;
        }
        case LayerSubject::QReluConstant:
        case LayerSubject::QReluBatchMean: {
            const auto mode = subject == LayerSubject::QReluConstant
                                  ? layers::ReluMode::Constant
                                  : layers::ReluMode::BatchMean;
            const QTensor f = random_pure_mixed({2 + rng.index(7)}, rng);
            out.input_digest = f.digest();
            out.error = rel_err(layers::qrelu(rotate_tensor(R, f), mode),
                                rotate_tensor(R, layers::qrelu(f, mode)));
            break;
        }
        case LayerSubject::ReluComponentwise: {
            const QTensor f = random_pure({2 + rng.index(7)}, rng);
            const auto broken = [](const QTensor& in) {
                return qt_map(in, [](const Quaternion& q) {
                    return Quaternion{q.w > 0 ? q.w : 0, q.x > 0 ? q.x : 0, q.y > 0 ? q.y : 0,
                                      q.z > 0 ? q.z : 0};
                });
            };
            out.input_digest = f.digest();
            out.error = rel_err(broken(rotate_tensor(R, f)), rotate_tensor(R, broken(f)));
            break;
        }
        case LayerSubject::QBatchNorm: {
            const std::size_t B = 2 + rng.index(4), d = 2 + rng.index(5);
            std::vector<QTensor> batch, rotated;
            for (std::size_t j = 0; j < B; ++j) {
                batch.push_back(random_pure({d}, rng));
                rotated.push_back(rotate_tensor(R, batch.back()));
            }
            const auto lhs = layers::qbatchnorm(rotated);
            const auto rhs = layers::qbatchnorm(batch);
            out.input_digest = batch[0].digest();
            for (std::size_t j = 0; j < B; ++j) {
                out.error = std::max(out.error, rel_err(lhs[j], rotate_tensor(R, rhs[j])));
            }
            break;
        }
        case LayerSubject::QMaxPool: {
            QTensor f;
            do {
                f = random_pure({2 + rng.index(7)}, rng);
                if (!layers::qmaxpool_near_tie(f, 1e-9)) break;
                ++out.resamples;
            } while (true);
            out.input_digest = f.digest();
            const Quaternion lhs = layers::qmaxpool(rotate_tensor(R, f));
            const Quaternion rhs = rotate(R, layers::qmaxpool(f));
            out.error = norm(lhs - rhs) / (1.0 + norm(rhs));
            break;
        }
        case LayerSubject::QMaxPoolElementwise: {
            QTensor f;
            do {
                f = random_pure({2 + rng.index(6), 1 + rng.index(5)}, rng);
                if (!layers::qmaxpool_elementwise_near_tie(f, 1e-9)) break;
                ++out.resamples;
            } while (true);
            out.input_digest = f.digest();
            out.error = rel_err(layers::qmaxpool_elementwise(rotate_tensor(R, f)),
                                rotate_tensor(R, layers::qmaxpool_elementwise(f)));
            break;
        }
        case LayerSubject::QDropoutFixedMask: {
            const QTensor f = random_pure({4 + rng.index(8)}, rng);
            const double p = rng.uniform(0.1, 0.6);
            const auto mask = layers::dropout_mask(f.numel(), p, rng);
            out.input_digest = f.digest();
            out.error = rel_err(layers::qdropout_apply(rotate_tensor(R, f), mask, p),
                                rotate_tensor(R, layers::qdropout_apply(f, mask, p)));
            break;
        }
        case LayerSubject::CoordsWeighting: {
            const std::size_t n = 8 + rng.index(9), d = 1 + rng.index(4);
            const auto pts = well_framed_points(n, rng, out.resamples);
            const QTensor feats = random_pure({n, d}, rng);
            const geom::CoordWeightNet net = geom::CoordWeightNet::init(8, rng);
            const auto apply = [&](const std::vector<Vec3>& p, const QTensor& f) {
                return geom::coords_weighting(geom::pca_lrf(p).coords, net, f);
            };
            std::vector<Vec3> rpts(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) rpts[i] = rotate_point(R, pts[i]);
            out.input_digest = feats.digest();
            out.error = rel_err(apply(rpts, rotate_tensor(R, feats)),
                                rotate_tensor(R, apply(pts, feats)));
            break;
        }
        case LayerSubject::DensityWeighting: {
            const std::size_t n = 8 + rng.index(9), d = 1 + rng.index(4);
            const auto pts = random_points(n, rng);
            const QTensor feats = random_pure({n, d}, rng);
            const double bw = rng.uniform(0.3, 1.0);
            std::vector<Vec3> rpts(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) rpts[i] = rotate_point(R, pts[i]);
            out.input_digest = feats.digest();
            out.error = rel_err(geom::density_weighting(rpts, rotate_tensor(R, feats), bw),
                                rotate_tensor(R, geom::density_weighting(pts, feats, bw)));
            break;
        }
    }
    return out;
}

} // namespace detail

inline CertReport certify_layer_equivariance(LayerSubject subject, std::size_t trials,
                                             double tolerance, std::uint64_t seed) {
    return detail::run_trials(layer_subject_name(subject), "rotation-equivariance", trials,
                              tolerance, seed,
                              [subject](rng::Stream& rng, std::size_t) {
                                  return detail::layer_trial(subject, rng);
                              });
}

inline std::vector<CertReport> certify_all_layers(std::size_t trials, double tolerance,
                                                  std::uint64_t seed) {
    std::vector<CertReport> reports;
    std::uint64_t salt = 0;
    for (LayerSubject s : certified_layer_subjects()) {
        reports.push_back(certify_layer_equivariance(s, trials, tolerance, seed + salt++));
    }
    return reports;
}

// --------------------------------------------------------------------------
// Network-level certificates.
// --------------------------------------------------------------------------

/// Quaternion module output must co-rotate with the input cloud.
inline CertReport certify_network_equivariance(net::Network& n, std::size_t trials,
                                               double tolerance, std::uint64_t seed) {
    const std::size_t pts = n.spec().input_points;
    return detail::run_trials(
        n.spec().name, "rotation-equivariance", trials, tolerance, seed,
        [&n, pts](rng::Stream& rng, std::size_t) {
            detail::TrialOutcome out;
            const PointCloud cloud = PointCloud::from_vectors(detail::random_points(pts, rng));
            const Rotor R = random_rotor(rng);
            const QTensor lhs = n.quaternion_module_output(rotate_cloud(R, cloud));
            const QTensor rhs = rotate_tensor(R, n.quaternion_module_output(cloud));
            out.input_digest = cloud.points.digest();
            out.error = rel_err(lhs, rhs);
            return out;
        },
        /*parallel=*/false); // forward passes share per-layer caches
}

/// Logits must be identical for a cloud and any rotated copy.
inline CertReport certify_output_invariance(net::Network& n, std::size_t trials,
                                            double tolerance, std::uint64_t seed) {
    if (n.spec().classes == 0) throw StateError("output invariance: network has no logits");
    const std::size_t pts = n.spec().input_points;
    return detail::run_trials(
        n.spec().name, "rotation-invariance", trials, tolerance, seed,
        [&n, pts](rng::Stream& rng, std::size_t) {
            detail::TrialOutcome out;
            const PointCloud cloud = PointCloud::from_vectors(detail::random_points(pts, rng));
            const Rotor R = random_rotor(rng);
            const RTensor lhs = n.forward(rotate_cloud(R, cloud)).logits;
            const RTensor rhs = n.forward(cloud).logits;
            out.input_digest = cloud.points.digest();
            out.error = rel_err(lhs, rhs);
            return out;
        },
        /*parallel=*/false);
}

// --------------------------------------------------------------------------
// Permutation invariance of the geometric selections: reindexing the input
// must leave the selected coordinate structures exactly identical. Distances
// and shared tie-break rules are pure functions of coordinates, so equality
// here is bitwise.
// --------------------------------------------------------------------------

enum class GeometrySubject {
    CentroidFps,
    GroupBallKnn,
    GroupKnn,
    KnnGraph,
    // Broken variants: order-dependent seeding/selection for the audit.
    FpsFirstPoint,
    BallFirstK,
};

inline const char* geometry_subject_name(GeometrySubject s) {
    switch (s) {
        case GeometrySubject::CentroidFps: return "centroid-fps";
        case GeometrySubject::GroupBallKnn: return "group-ball-knn";
        case GeometrySubject::GroupKnn: return "group-knn";
        case GeometrySubject::KnnGraph: return "knn-graph";
        case GeometrySubject::FpsFirstPoint: return "fps-first-point-seed";
        case GeometrySubject::BallFirstK: return "ball-first-k";
    }
    return "?";
}

namespace detail {

/// FPS seeded from whichever point happens to be first in the array; ties by
/// lowest index. Both choices leak input order.
inline std::vector<std::size_t> fps_first_point(const std::vector<Vec3>& pts, std::size_t m) {
    std::vector<std::size_t> picks;
    if (m == 0 || m > pts.size()) throw ValueError("fps: bad sample count");
    std::vector<double> min_d(pts.size());
    std::vector<std::uint8_t> taken(pts.size(), 0);
    picks.push_back(0);
    taken[0] = 1;
    for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = dist_sq(pts[i], pts[0]);
    while (picks.size() < m) {
        std::size_t best = 0;
        double bd = -1.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!taken[i] && min_d[i] > bd) {
                bd = min_d[i];
                best = i;
            }
        }
        picks.push_back(best);
        taken[best] = 1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            min_d[i] = std::min(min_d[i], dist_sq(pts[i], pts[best]));
        }
    }
    return picks;
}

/// Ball query keeping the first K in-ball points in input order.
inline geom::IndexGroups ball_first_k(const std::vector<Vec3>& pts,
                                      const std::vector<std::size_t>& centers, double radius,
                                      std::size_t K) {
    geom::IndexGroups out;
    out.centers = centers;
    out.groups.resize(centers.size());
    const double r2 = radius * radius;
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        auto& g = out.groups[ci];
        for (std::size_t i = 0; i < pts.size() && g.size() < K; ++i) {
            if (dist_sq(pts[i], pts[centers[ci]]) <= r2) g.push_back(i);
        }
        while (g.size() < K) g.push_back(g.front());
    }
    return out;
}

/// Canonical byte serialization of selected coordinate structures, for exact
/// comparison across permutations.
struct Canon {
    std::vector<double> data;

    void add(const Vec3& p) {
        data.push_back(p.x);
        data.push_back(p.y);
        data.push_back(p.z);
    }

    friend bool operator==(const Canon& a, const Canon& b) { return a.data == b.data; }
};

inline Canon canon_selection(const std::vector<Vec3>& pts, const std::vector<std::size_t>& idx) {
    std::vector<Vec3> sel;
    sel.reserve(idx.size());
    for (std::size_t i : idx) sel.push_back(pts[i]);
    std::sort(sel.begin(), sel.end(), lex_less);
    Canon c;
    for (const auto& p : sel) c.add(p);
    return c;
}

inline Canon canon_groups(const std::vector<Vec3>& pts, const geom::IndexGroups& g) {
    std::vector<std::pair<Vec3, std::vector<Vec3>>> entries;
    for (std::size_t ci = 0; ci < g.centers.size(); ++ci) {
        std::vector<Vec3> members;
        for (std::size_t m : g.groups[ci]) members.push_back(pts[m]);
        std::sort(members.begin(), members.end(), lex_less);
        entries.emplace_back(pts[g.centers[ci]], std::move(members));
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });
    Canon c;
    for (const auto& [center, members] : entries) {
        c.add(center);
        for (const auto& m : members) c.add(m);
    }
    return c;
}

inline Canon canon_graph(const std::vector<Vec3>& pts,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::array<Vec3, 2>> e;
    for (const auto& [u, v] : edges) e.push_back({pts[u], pts[v]});
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) {
        if (a[0].x != b[0].x || a[0].y != b[0].y || a[0].z != b[0].z) return lex_less(a[0], b[0]);
        return lex_less(a[1], b[1]);
    });
    Canon c;
    for (const auto& pair : e) {
        c.add(pair[0]);
        c.add(pair[1]);
    }
    return c;
}

inline Canon geometry_structure(GeometrySubject s, const std::vector<Vec3>& pts) {
    const std::size_t n = pts.size();
    const std::size_t m = std::max<std::size_t>(2, n / 4);
    switch (s) {
        case GeometrySubject::CentroidFps:
            return canon_selection(pts, geom::centroid_fps(pts, m));
        case GeometrySubject::FpsFirstPoint:
            return canon_selection(pts, fps_first_point(pts, m));
        case GeometrySubject::GroupBallKnn: {
            const auto centers = geom::centroid_fps(pts, m);
            return canon_groups(pts, geom::group_ball_knn(pts, centers, 1.2, 4));
        }
        case GeometrySubject::BallFirstK: {
            const auto centers = geom::centroid_fps(pts, m);
            return canon_groups(pts, ball_first_k(pts, centers, 1.2, 4));
        }
        case GeometrySubject::GroupKnn: {
            const auto centers = geom::centroid_fps(pts, m);
            return canon_groups(pts, geom::group_knn(pts, centers, 4));
        }
        case GeometrySubject::KnnGraph:
            return canon_graph(pts, geom::knn_graph(pts, 4));
    }
    throw ValueError("unknown geometry subject");
}

} // namespace detail

/// Exact structural equality under random permutation; error is 0 or 1.
inline CertReport certify_permutation_invariance(GeometrySubject subject, std::size_t trials,
                                                 std::uint64_t seed) {
    return detail::run_trials(
        geometry_subject_name(subject), "permutation-invariance", trials, 0.0, seed,
        [subject](rng::Stream& rng, std::size_t) {
            detail::TrialOutcome out;
            const std::size_t n = 16 + rng.index(33);
            auto pts = detail::random_points(n, rng);
            const auto before = detail::geometry_structure(subject, pts);
            std::vector<Vec3> shuffled = pts;
            rng.shuffle(shuffled);
            const auto after = detail::geometry_structure(subject, shuffled);
            out.error = before == after ? 0.0 : 1.0;
            out.input_digest = fnv1a(before.data.data(), before.data.size() * sizeof(double));
            return out;
        });
}

/// Classifier logits under a random permutation of the input points.
inline CertReport certify_permutation_logits(net::Network& n, std::size_t trials,
                                             double tolerance, std::uint64_t seed) {
    if (n.spec().classes == 0) throw StateError("permutation logits: network has no logits");
    const std::size_t pts = n.spec().input_points;
    return detail::run_trials(
        n.spec().name, "permutation-invariance", trials, tolerance, seed,
        [&n, pts](rng::Stream& rng, std::size_t) {
            detail::TrialOutcome out;
            auto v = detail::random_points(pts, rng);
            const RTensor before = n.forward(PointCloud::from_vectors(v)).logits;
            rng.shuffle(v);
            const RTensor after = n.forward(PointCloud::from_vectors(v)).logits;
            out.error = rel_err(after, before);
            out.input_digest = before.numel() == 0
                                   ? 0
                                   : fnv1a(before.data().data(),
                                           before.data().size() * sizeof(double));
            return out;
        },
        /*parallel=*/false);
}

// --------------------------------------------------------------------------
// Finite-difference gradient check over every scalar parameter of a network.
// --------------------------------------------------------------------------

inline CertReport gradcheck(net::Network& n, double h, double tolerance, std::uint64_t seed) {
    rng::Stream rng = rng::Stream::fork(seed, 0);
    const PointCloud cloud =
        PointCloud::from_vectors(detail::random_points(n.spec().input_points, rng));
    const std::size_t label = n.spec().classes > 0 ? rng.index(n.spec().classes) : 0;

    const auto loss_of = [&]() {
        const auto out = n.forward(cloud, false, nullptr);
        if (n.spec().classes > 0) return q2r::softmax_cross_entropy(out.logits, label).loss;
        return net::chamfer(out.points, cloud.points).loss;
    };

    // Analytic gradients.
    n.zero_grads();
    const auto out = n.forward(cloud, true, nullptr);
    if (n.spec().classes > 0) {
        n.backward(q2r::softmax_cross_entropy(out.logits, label).grad);
    } else {
        n.backward(net::chamfer(out.points, cloud.points).pred_grad);
    }

    CertReport rep;
    rep.subject = n.spec().name;
    rep.property = "gradient-check";
    rep.tolerance = tolerance;
    rep.seed = seed;
    for (auto& p : n.params()) {
        for (std::size_t j = 0; j < p.value.numel(); ++j) {
            const double saved = p.value[j];
            p.value[j] = saved + h;
            const double lp = loss_of();
            p.value[j] = saved - h;
            const double lm = loss_of();
            p.value[j] = saved;
            const double gn = (lp - lm) / (2.0 * h);
            const double ga = p.grad[j];
            const double err = std::abs(ga - gn) / (std::abs(ga) + std::abs(gn) + 1e-12);
            ++rep.trials;
            rep.max_relative_error = std::max(rep.max_relative_error, err);
            if (!(err <= tolerance)) {
                rep.failures.push_back(
                    {rep.trials - 1, seed, p.name + "[" + std::to_string(j) + "]", err});
            }
        }
    }
    return rep;
}

// --------------------------------------------------------------------------
// Mutation audit: deliberately broken variants must fail their certificates.
// A certification pipeline that cannot reject these would be vacuous.
// --------------------------------------------------------------------------

struct MutationAudit {
    std::vector<CertReport> reports; // each expected to FAIL
    [[nodiscard]] bool all_detected() const {
        for (const auto& r : reports) {
            if (r.pass()) return false;
        }
        return true;
    }
};

inline MutationAudit run_mutation_audit(std::size_t trials, std::uint64_t seed) {
    MutationAudit audit;
    audit.reports.push_back(
        certify_layer_equivariance(LayerSubject::QConvBiased, trials, 1e-11, seed));
    audit.reports.push_back(
        certify_layer_equivariance(LayerSubject::ReluComponentwise, trials, 1e-11, seed + 1));
    audit.reports.push_back(
        certify_permutation_invariance(GeometrySubject::FpsFirstPoint, trials, seed + 2));
    audit.reports.push_back(
        certify_permutation_invariance(GeometrySubject::BallFirstK, trials, seed + 3));
    return audit;
}

} // namespace reqnn::cert
