#pragma once

#include "reqnn/geometry.hpp"

namespace reqnn::data {

/// Synthetic 3-class benchmark: points sampled on a unit sphere, on the
/// surface of a cube, and on two parallel square planes. After unit-sphere
/// normalization the classes differ in their radius distributions, which is
/// exactly the information a rotation-invariant classifier can use.
enum class ShapeClass : int { Sphere = 0, Cube = 1, ParallelPlanes = 2 };

struct DatasetSpec {
    std::size_t classes = 3;       // 1..3 of the shape classes above
    std::size_t points = 64;
    std::size_t train_count = 300; // totals over all classes
    std::size_t test_count = 150;
    std::size_t test_rotations = 10;
    double jitter = 0.02;          // gaussian sigma added per coordinate
    bool unit_sphere = true;
    std::uint64_t seed = 0;
};

/// Recenters on the centroid and scales the farthest point to radius 1.
inline PointCloud normalize_unit_sphere(const PointCloud& cloud) {
    auto pts = cloud.to_vectors();
    const Vec3 c = geom::centroid(pts);
    double max_r = 0.0;
    for (auto& p : pts) {
        p = p - c;
        max_r = std::max(max_r, norm(p));
    }
    if (!(max_r > 0.0)) throw ValueError("normalize: all points coincide");
    for (auto& p : pts) p = (1.0 / max_r) * p;
    return PointCloud::from_vectors(pts, cloud.label);
}

namespace detail {

inline Vec3 sample_sphere(rng::Stream& rng) {
    for (;;) {
        const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        const double n = norm(v);
        if (n > 1e-9) return (1.0 / n) * v;
    }
}

inline Vec3 sample_cube(rng::Stream& rng) {
    const std::size_t face = rng.index(6);
    const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
    const double s = face % 2 == 0 ? 1.0 : -1.0;
    switch (face / 2) {
        case 0: return {s, a, b};
        case 1: return {a, s, b};
        default: return {a, b, s};
    }
}

inline Vec3 sample_planes(rng::Stream& rng) {
    const double z = rng.index(2) == 0 ? 0.35 : -0.35;
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), z};
}

} // namespace detail

inline PointCloud sample_cloud(ShapeClass cls, const DatasetSpec& ds, rng::Stream& rng) {
    std::vector<Vec3> pts(ds.points);
    for (auto& p : pts) {
        switch (cls) {
            case ShapeClass::Sphere: p = detail::sample_sphere(rng); break;
            case ShapeClass::Cube: p = detail::sample_cube(rng); break;
            case ShapeClass::ParallelPlanes: p = detail::sample_planes(rng); break;
        }
        p += Vec3{ds.jitter * rng.normal(), ds.jitter * rng.normal(), ds.jitter * rng.normal()};
    }
    PointCloud c = PointCloud::from_vectors(pts, static_cast<int>(cls));
    return ds.unit_sphere ? normalize_unit_sphere(c) : c;
}

struct Dataset {
    std::vector<PointCloud> train;
    std::vector<PointCloud> test;         // canonical poses
    std::vector<PointCloud> rotated_test; // test_rotations randomly rotated copies per test cloud
};

/// Deterministic for a fixed spec seed. Counts are split evenly over the
/// classes; remainders go to the lower class indices.
inline Dataset synth_dataset(const DatasetSpec& ds) {
    if (ds.classes == 0 || ds.classes > 3) throw ValueError("dataset: classes must be 1..3");
    if (ds.points < 8) throw ValueError("dataset: need at least 8 points per cloud");
    if (ds.train_count == 0 || ds.test_count == 0) throw ValueError("dataset: empty split");

    Dataset out;
    const auto fill = [&](std::vector<PointCloud>& dst, std::size_t total, std::uint64_t salt) {
        for (std::size_t i = 0; i < total; ++i) {
            const auto cls = static_cast<ShapeClass>(i % ds.classes);
            rng::Stream rng = rng::Stream::fork(ds.seed, salt + i);
            dst.push_back(sample_cloud(cls, ds, rng));
        }
    };
    fill(out.train, ds.train_count, 0x10000);
    fill(out.test, ds.test_count, 0x20000);

    for (std::size_t i = 0; i < out.test.size(); ++i) {
        for (std::size_t j = 0; j < ds.test_rotations; ++j) {
            rng::Stream rng = rng::Stream::fork(ds.seed, 0x30000 + i * 1000 + j);
            out.rotated_test.push_back(rotate_cloud(random_rotor(rng), out.test[i]));
        }
    }
    return out;
}

} // namespace reqnn::data
