#pragma once

#include <cmath>

#include "reqnn/core.hpp"

namespace reqnn {

/// Quaternion w + x i + y j + z k over doubles. Points in 3D are embedded as
/// pure quaternions (w = 0).
struct Quaternion {
    double w = 0.0, x = 0.0, y = 0.0, z = 0.0;

    constexpr Quaternion() = default;
    constexpr Quaternion(double w_, double x_, double y_, double z_)
        : w(w_), x(x_), y(y_), z(z_) {}

    static constexpr Quaternion pure(double x_, double y_, double z_) {
        return {0.0, x_, y_, z_};
    }
    static constexpr Quaternion pure(const Vec3& v) { return {0.0, v.x, v.y, v.z}; }
    static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

    [[nodiscard]] constexpr bool is_pure() const { return w == 0.0; }
    [[nodiscard]] constexpr Vec3 vec() const { return {x, y, z}; }
};

constexpr Quaternion operator+(const Quaternion& p, const Quaternion& q) {
    return {p.w + q.w, p.x + q.x, p.y + q.y, p.z + q.z};
}

constexpr Quaternion operator-(const Quaternion& p, const Quaternion& q) {
    return {p.w - q.w, p.x - q.x, p.y - q.y, p.z - q.z};
}

constexpr Quaternion operator-(const Quaternion& q) { return {-q.w, -q.x, -q.y, -q.z}; }

constexpr Quaternion operator*(double s, const Quaternion& q) {
    return {s * q.w, s * q.x, s * q.y, s * q.z};
}

constexpr Quaternion operator*(const Quaternion& q, double s) { return s * q; }

/// Hamilton product. Components follow the basis rules i^2 = j^2 = k^2 = -1,
/// ij = k, jk = i, ki = j (and the anti-commuted counterparts).
constexpr Quaternion operator*(const Quaternion& p, const Quaternion& q) {
    return {
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    };
}

constexpr bool operator==(const Quaternion& p, const Quaternion& q) {
    return p.w == q.w && p.x == q.x && p.y == q.y && p.z == q.z;
}

constexpr Quaternion conj(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

constexpr double norm_sq(const Quaternion& q) {
    return q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
}

inline double norm(const Quaternion& q) { return std::sqrt(norm_sq(q)); }

/// Euclidean inner product of the 4 components.
constexpr double dot4(const Quaternion& p, const Quaternion& q) {
    return p.w * q.w + p.x * q.x + p.y * q.y + p.z * q.z;
}

inline Quaternion normalized(const Quaternion& q) {
    const double n = norm(q);
    if (n < 1e-300) throw ValueError("cannot normalize a zero quaternion");
    return (1.0 / n) * q;
}

} // namespace reqnn
