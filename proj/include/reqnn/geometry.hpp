#pragma once

#include <array>
#include <optional>
#include <utility>

#include "reqnn/layers.hpp"

namespace reqnn {

/// A 3D point cloud held as pure quaternions, with an optional class label.
struct PointCloud {
    QTensor points; // rank 1, every element pure
    std::optional<int> label;

    PointCloud() = default;

    explicit PointCloud(QTensor pts, std::optional<int> lbl = std::nullopt)
        : points(std::move(pts)), label(lbl) {
        if (!points.is_pure()) throw ValueError("point cloud elements must be pure quaternions");
    }

    static PointCloud from_vectors(const std::vector<Vec3>& v,
                                   std::optional<int> lbl = std::nullopt) {
        QTensor t({v.size()});
        for (std::size_t i = 0; i < v.size(); ++i) t.set(i, Quaternion::pure(v[i]));
        return PointCloud(std::move(t), lbl);
    }

    [[nodiscard]] std::size_t size() const { return points.numel(); }
    [[nodiscard]] Vec3 point(std::size_t i) const { return points.at(i).vec(); }

    [[nodiscard]] std::vector<Vec3> to_vectors() const {
        std::vector<Vec3> v(size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = point(i);
        return v;
    }
};

inline PointCloud rotate_cloud(const Rotor& r, const PointCloud& c) {
    return PointCloud(rotate_tensor(r, c.points), c.label);
}

namespace geom {

/// Centroid accumulated in lexicographically sorted order, so the result is
/// bit-identical under any permutation of the input.
inline Vec3 centroid(const std::vector<Vec3>& pts) {
    if (pts.empty()) throw ValueError("centroid of an empty point set");
    std::vector<Vec3> s = pts;
    std::sort(s.begin(), s.end(), lex_less);
    Vec3 acc{};
    for (const Vec3& p : s) acc += p;
    return (1.0 / static_cast<double>(s.size())) * acc;
}

inline double bbox_diagonal(const std::vector<Vec3>& pts) {
    if (pts.empty()) throw ValueError("bounding box of an empty point set");
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    return norm(hi - lo);
}

/// Farthest point sampling seeded from the centroid: the first pick is the
/// point farthest from the centroid, so the result does not depend on input
/// order. Distance ties go to the lexicographically largest coordinate tuple.
/// With emit_centroid the centroid itself counts as the first of the m
/// samples and only m-1 input points are selected.
inline std::vector<std::size_t> centroid_fps(const std::vector<Vec3>& pts, std::size_t m,
                                             bool emit_centroid = false) {
    const std::size_t want = emit_centroid ? (m > 0 ? m - 1 : 0) : m;
    if (want > pts.size()) {
        throw ValueError("fps: cannot select " + std::to_string(want) + " of " +
                         std::to_string(pts.size()) + " points");
    }
    std::vector<std::size_t> picks;
    if (want == 0) return picks;
    const Vec3 c = centroid(pts);
    std::vector<double> min_d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = dist_sq(pts[i], c);
    std::vector<std::uint8_t> taken(pts.size(), 0);
    picks.reserve(want);
    for (std::size_t round = 0; round < want; ++round) {
        std::size_t best = pts.size();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (taken[i]) continue;
            if (best == pts.size() || min_d[i] > min_d[best] ||
                (min_d[i] == min_d[best] && lex_less(pts[best], pts[i]))) {
                best = i;
            }
        }
        taken[best] = 1;
        picks.push_back(best);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            min_d[i] = std::min(min_d[i], dist_sq(pts[i], pts[best]));
        }
    }
    return picks;
}

struct IndexGroups {
    std::vector<std::size_t> centers;            // indices into the cloud
    std::vector<std::vector<std::size_t>> groups; // one list of K members per center
};

namespace detail {

/// Candidates ordered by distance to the center; ties prefer the
/// lexicographically largest coordinate tuple. Pure value comparison, so the
/// order is independent of input indexing.
inline void sort_by_distance(std::vector<std::size_t>& idx, const std::vector<Vec3>& pts,
                             const Vec3& center) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double da = dist_sq(pts[a], center), db = dist_sq(pts[b], center);
        if (da != db) return da < db;
        return lex_less(pts[b], pts[a]);
    });
}

} // namespace detail

/// Ball query with k-NN behaviour inside the radius: the K nearest in-ball
/// points form the group. When fewer than K points fall inside the ball the
/// group is padded by repeating the nearest in-ball point. The center itself
/// lies in its own ball, so a group is never empty.
inline IndexGroups group_ball_knn(const std::vector<Vec3>& pts,
                                  const std::vector<std::size_t>& centers, double radius,
                                  std::size_t K) {
    if (!(radius > 0.0)) throw ValueError("ball query: radius must be positive");
    if (K == 0) throw ValueError("ball query: group size must be positive");
    IndexGroups out;
    out.centers = centers;
    out.groups.resize(centers.size());
    const double r2 = radius * radius;
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const Vec3 c = pts.at(centers[ci]);
        std::vector<std::size_t> in_ball;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (dist_sq(pts[i], c) <= r2) in_ball.push_back(i);
        }
        detail::sort_by_distance(in_ball, pts, c);
        if (in_ball.size() > K) in_ball.resize(K);
        while (in_ball.size() < K) in_ball.push_back(in_ball.front());
        out.groups[ci] = std::move(in_ball);
    }
    return out;
}

/// Plain k nearest neighbours of each center (the center itself included).
inline IndexGroups group_knn(const std::vector<Vec3>& pts,
                             const std::vector<std::size_t>& centers, std::size_t K) {
    if (K == 0 || K > pts.size()) {
        throw ValueError("knn grouping: need 1 <= K <= point count, got K=" + std::to_string(K));
    }
    IndexGroups out;
    out.centers = centers;
    out.groups.resize(centers.size());
    std::vector<std::size_t> all(pts.size());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        detail::sort_by_distance(all, pts, pts.at(centers[ci]));
        out.groups[ci].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(K));
    }
    return out;
}

/// Directed k-NN graph, self excluded. Edges are (node, neighbour).
inline std::vector<std::pair<std::size_t, std::size_t>> knn_graph(const std::vector<Vec3>& pts,
                                                                  std::size_t k) {
    if (k == 0 || k + 1 > pts.size()) {
        throw ValueError("knn graph: need 1 <= k <= n-1, got k=" + std::to_string(k) +
                         " for n=" + std::to_string(pts.size()));
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(pts.size() * k);
    std::vector<std::size_t> cand;
    for (std::size_t u = 0; u < pts.size(); ++u) {
        cand.clear();
        for (std::size_t v = 0; v < pts.size(); ++v) {
            if (v != u) cand.push_back(v);
        }
        detail::sort_by_distance(cand, pts, pts[u]);
        for (std::size_t j = 0; j < k; ++j) edges.emplace_back(u, cand[j]);
    }
    return edges;
}

/// Gaussian kernel density at each point. Depends only on pairwise distances,
/// so it is invariant under rotation and permutes with the points.
inline RTensor density_estimate(const std::vector<Vec3>& pts, double bandwidth) {
    if (!(bandwidth > 0.0)) throw ValueError("density: bandwidth must be positive");
    if (pts.empty()) throw ValueError("density of an empty point set");
    RTensor rho({pts.size()});
    const double inv = -1.0 / (2.0 * bandwidth * bandwidth);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < pts.size(); ++j) s += std::exp(inv * dist_sq(pts[i], pts[j]));
        rho[i] = s / static_cast<double>(pts.size());
    }
    return rho;
}

inline double default_bandwidth(const std::vector<Vec3>& pts) {
    const double d = 0.1 * bbox_diagonal(pts);
    if (!(d > 0.0)) throw ValueError("density: degenerate cloud, specify a bandwidth");
    return d;
}

/// Scales each point's feature row by its inverse density, upweighting sparse
/// regions. The scale is a rotation-invariant real, so features keep
/// co-rotating with the input.
inline QTensor density_weighting(const std::vector<Vec3>& pts, const QTensor& features,
                                 double bandwidth) {
    if (features.rank() != 2 || features.rows() != pts.size()) {
        throw ShapeError("density weighting: features must be [n,d] with one row per point");
    }
    const RTensor rho = density_estimate(pts, bandwidth);
    QTensor out(features.shape());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double w = 1.0 / std::max(rho[i], 1e-12);
        for (std::size_t c = 0; c < features.cols(); ++c) {
            out.set(i, c, w * features.at(i, c));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PCA local reference frame.
// ---------------------------------------------------------------------------

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Cyclic Jacobi eigensolver for a symmetric 3x3 matrix. Returns eigenvalues
/// in descending order with matching unit eigenvectors.
inline void sym3_eigen(Mat3 a, std::array<double, 3>& vals, std::array<Vec3, 3>& vecs) {
    Mat3 v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        if (off < 1e-30) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int r = 0; r < 3; ++r) {
                    const double arp = a[r][p], arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double apr = a[p][r], aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for (int r = 0; r < 3; ++r) {
                    const double vrp = v[r][p], vrq = v[r][q];
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
        }
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] > a[j][j]; });
    for (int i = 0; i < 3; ++i) {
        vals[static_cast<std::size_t>(i)] = a[order[static_cast<std::size_t>(i)]]
                                             [order[static_cast<std::size_t>(i)]];
        vecs[static_cast<std::size_t>(i)] = {v[0][order[static_cast<std::size_t>(i)]],
                                             v[1][order[static_cast<std::size_t>(i)]],
                                             v[2][order[static_cast<std::size_t>(i)]]};
    }
}

} // namespace detail

struct LocalFrame {
    Vec3 origin;                 // centroid
    std::array<Vec3, 3> axes;    // right-handed orthonormal basis, det +1
    std::array<double, 3> eigenvalues;
    std::vector<Vec3> coords;    // input points expressed in the frame
};

/// PCA frame over the covariance of the points. Throws DegenerateFrameError
/// when consecutive eigenvalues are closer than 1e-9 (the frame would be
/// arbitrary); callers fall back to raw distances in that case. The first two
/// axes are oriented so the farthest point from the centroid projects
/// non-negatively onto them, the third axis completes a right-handed basis.
inline LocalFrame pca_lrf(const std::vector<Vec3>& pts) {
    if (pts.size() < 2) throw DegenerateFrameError("pca frame: need at least 2 points");
    const Vec3 c = centroid(pts);
    detail::Mat3 cov{};
    for (const Vec3& p : pts) {
        const Vec3 d = p - c;
        cov[0][0] += d.x * d.x; cov[0][1] += d.x * d.y; cov[0][2] += d.x * d.z;
        cov[1][1] += d.y * d.y; cov[1][2] += d.y * d.z;
        cov[2][2] += d.z * d.z;
    }
    const double inv_n = 1.0 / static_cast<double>(pts.size());
    cov[0][0] *= inv_n; cov[0][1] *= inv_n; cov[0][2] *= inv_n;
    cov[1][1] *= inv_n; cov[1][2] *= inv_n; cov[2][2] *= inv_n;
    cov[1][0] = cov[0][1]; cov[2][0] = cov[0][2]; cov[2][1] = cov[1][2];

    std::array<double, 3> vals{};
    std::array<Vec3, 3> vecs{};
    detail::sym3_eigen(cov, vals, vecs);
    if (vals[0] - vals[1] < 1e-9 || vals[1] - vals[2] < 1e-9) {
        throw DegenerateFrameError("pca frame: eigenvalue gaps " +
                                   std::to_string(vals[0] - vals[1]) + ", " +
                                   std::to_string(vals[1] - vals[2]) +
                                   " below 1e-9, frame is arbitrary");
    }

    // Points by decreasing distance from the centroid, ties lex-largest first.
    std::vector<std::size_t> far(pts.size());
    for (std::size_t i = 0; i < far.size(); ++i) far[i] = i;
    std::sort(far.begin(), far.end(), [&](std::size_t a, std::size_t b) {
        const double da = dist_sq(pts[a], c), db = dist_sq(pts[b], c);
        if (da != db) return da > db;
        return lex_less(pts[b], pts[a]);
    });
    for (int axis = 0; axis < 2; ++axis) {
        for (std::size_t i : far) {
            const double proj = dot(vecs[static_cast<std::size_t>(axis)], pts[i] - c);
            if (std::abs(proj) > 1e-12) {
                if (proj < 0.0) {
                    vecs[static_cast<std::size_t>(axis)] =
                        -1.0 * vecs[static_cast<std::size_t>(axis)];
                }
                break;
            }
        }
    }
    vecs[2] = cross(vecs[0], vecs[1]);

    LocalFrame f;
    f.origin = c;
    f.axes = vecs;
    f.eigenvalues = vals;
    f.coords.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = pts[i] - c;
        f.coords[i] = {dot(d, vecs[0]), dot(d, vecs[1]), dot(d, vecs[2])};
    }
    return f;
}

// ---------------------------------------------------------------------------
// Coordinate weighting: a small real MLP maps each point's frame coordinates
// to a scalar that scales the point's feature row. Frame coordinates are
// rotation-invariant, real scalars commute with rotation, so the composite
// stays equivariant.
// ---------------------------------------------------------------------------

struct CoordWeightNet {
    RTensor w1, b1, w2, b2; // [h,3], [h], [1,h], [1]

    static CoordWeightNet init(std::size_t hidden, rng::Stream& rng) {
        CoordWeightNet n;
        n.w1 = RTensor({hidden, 3});
        n.b1 = RTensor({hidden});
        n.w2 = RTensor({1, hidden});
        n.b2 = RTensor({1});
        const double s1 = std::sqrt(1.0 / 3.0);
        const double s2 = std::sqrt(1.0 / static_cast<double>(hidden));
        for (auto& v : n.w1.data()) v = rng.uniform(-s1, s1);
        for (auto& v : n.b1.data()) v = rng.uniform(-s1, s1);
        for (auto& v : n.w2.data()) v = rng.uniform(-s2, s2);
        for (auto& v : n.b2.data()) v = rng.uniform(-s2, s2);
        return n;
    }

    [[nodiscard]] std::size_t hidden() const { return b1.numel(); }

    [[nodiscard]] double eval(const Vec3& p) const {
        double out = b2[0];
        for (std::size_t h = 0; h < hidden(); ++h) {
            const double pre = w1.at(h, 0) * p.x + w1.at(h, 1) * p.y + w1.at(h, 2) * p.z + b1[h];
            if (pre > 0.0) out += w2.at(0, h) * pre;
        }
        return out;
    }

    struct Grads {
        RTensor w1, b1, w2, b2;
    };

    [[nodiscard]] Grads zero_grads() const {
        return {RTensor(w1.shape()), RTensor(b1.shape()), RTensor(w2.shape()), RTensor(b2.shape())};
    }

    /// Accumulates parameter gradients for one evaluation site.
    void backward(const Vec3& p, double dout, Grads& g) const {
        g.b2[0] += dout;
        for (std::size_t h = 0; h < hidden(); ++h) {
            const double pre = w1.at(h, 0) * p.x + w1.at(h, 1) * p.y + w1.at(h, 2) * p.z + b1[h];
            if (pre <= 0.0) continue;
            g.w2.at(0, h) += dout * pre;
            const double dh = dout * w2.at(0, h);
            g.w1.at(h, 0) += dh * p.x;
            g.w1.at(h, 1) += dh * p.y;
            g.w1.at(h, 2) += dh * p.z;
            g.b1[h] += dh;
        }
    }
};

/// Scales feature row k by net(frame coordinates of point k).
/// features: [n, d] with one row per point.
inline QTensor coords_weighting(const std::vector<Vec3>& frame_coords,
                                const CoordWeightNet& net, const QTensor& features) {
    if (features.rank() != 2 || features.rows() != frame_coords.size()) {
        throw ShapeError("coords weighting: features must be [n,d] with one row per coordinate");
    }
    QTensor out(features.shape());
    for (std::size_t i = 0; i < frame_coords.size(); ++i) {
        const double s = net.eval(frame_coords[i]);
        for (std::size_t c = 0; c < features.cols(); ++c) out.set(i, c, s * features.at(i, c));
    }
    return out;
}

struct CoordsWeightingGrads {
    CoordWeightNet::Grads net;
    QTensor features;
};

inline CoordsWeightingGrads coords_weighting_backward(const std::vector<Vec3>& frame_coords,
                                                      const CoordWeightNet& net,
                                                      const QTensor& features,
                                                      const QTensor& gout) {
    check_same_shape(features, gout, "coords weighting backward");
    CoordsWeightingGrads g{net.zero_grads(), QTensor(features.shape())};
    for (std::size_t i = 0; i < frame_coords.size(); ++i) {
        const double s = net.eval(frame_coords[i]);
        double ds = 0.0;
        for (std::size_t c = 0; c < features.cols(); ++c) {
            g.features.set(i, c, s * gout.at(i, c));
            ds += dot4(features.at(i, c), gout.at(i, c));
        }
        net.backward(frame_coords[i], ds, g.net);
    }
    return g;
}

// PointCloud conveniences mirroring the vector-based ops.
inline std::vector<std::size_t> centroid_fps(const PointCloud& c, std::size_t m,
                                             bool emit_centroid = false) {
    return centroid_fps(c.to_vectors(), m, emit_centroid);
}
inline IndexGroups group_ball_knn(const PointCloud& c, const std::vector<std::size_t>& centers,
                                  double radius, std::size_t K) {
    return group_ball_knn(c.to_vectors(), centers, radius, K);
}
inline IndexGroups group_knn(const PointCloud& c, const std::vector<std::size_t>& centers,
                             std::size_t K) {
    return group_knn(c.to_vectors(), centers, K);
}
inline std::vector<std::pair<std::size_t, std::size_t>> knn_graph(const PointCloud& c,
                                                                  std::size_t k) {
    return knn_graph(c.to_vectors(), k);
}
inline RTensor density_estimate(const PointCloud& c, double bandwidth) {
    return density_estimate(c.to_vectors(), bandwidth);
}
inline LocalFrame pca_lrf(const PointCloud& c) { return pca_lrf(c.to_vectors()); }

} // namespace geom
} // namespace reqnn
