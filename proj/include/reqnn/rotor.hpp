#pragma once

#include <cmath>

#include "reqnn/tensor.hpp"

namespace reqnn {

/// Unit quaternion cos(t/2) + sin(t/2)(o1 i + o2 j + o3 k) acting on points by
/// the sandwich product R q conj(R). Keeps axis/angle provenance: angle lies
/// in [0, 2pi) and quat() reconstructs from axis()/angle() within 1e-12.
class Rotor {
public:
    static Rotor from_axis_angle(const Vec3& axis, double angle) {
        if (!std::isfinite(angle)) throw ValueError("rotor angle must be finite");
        const double n = norm(axis);
        if (!(n > 1e-300) || !std::isfinite(n)) {
            throw ValueError("rotor axis must be a nonzero finite vector");
        }
        double t = std::fmod(angle, 2.0 * M_PI);
        if (t < 0.0) t += 2.0 * M_PI;
        const Vec3 o = (1.0 / n) * axis;
        const double c = std::cos(0.5 * t), s = std::sin(0.5 * t);
        Rotor r;
        r.q_ = normalized({c, s * o.x, s * o.y, s * o.z});
        r.axis_ = o;
        r.angle_ = t;
        return r;
    }

    /// Normalizes q and derives the axis/angle pair. q and -q induce the same
    /// rotation map (double cover); both are accepted.
    static Rotor from_quaternion(const Quaternion& q) {
        Quaternion u = normalized(q);
        const double s = std::sqrt(u.x * u.x + u.y * u.y + u.z * u.z);
        Rotor r;
        if (s < 1e-300) {
            // +-identity; the axis is arbitrary.
            r.q_ = Quaternion::identity();
            r.axis_ = {0.0, 0.0, 1.0};
            r.angle_ = 0.0;
            return r;
        }
        r.q_ = u;
        r.axis_ = (1.0 / s) * Vec3{u.x, u.y, u.z};
        r.angle_ = 2.0 * std::atan2(s, u.w); // in (0, 2pi) since s > 0
        return r;
    }

    static Rotor identity() { return from_quaternion(Quaternion::identity()); }

    [[nodiscard]] const Quaternion& quat() const { return q_; }
    [[nodiscard]] const Vec3& axis() const { return axis_; }
    [[nodiscard]] double angle() const { return angle_; }

    [[nodiscard]] Rotor inverse() const { return from_quaternion(conj(q_)); }

private:
    Rotor() = default;
    Quaternion q_ = Quaternion::identity();
    Vec3 axis_{0.0, 0.0, 1.0};
    double angle_ = 0.0;
};

/// compose(b, a) applies a first, then b.
inline Rotor compose(const Rotor& b, const Rotor& a) {
    return Rotor::from_quaternion(b.quat() * a.quat());
}

/// Sandwich product R q conj(R). A pure input stays pure: the real part of
/// the result is a rounding residual and is clamped to exact 0 when at most
/// 1e-12 in magnitude.
inline Quaternion rotate(const Rotor& r, const Quaternion& q) {
    Quaternion out = r.quat() * q * conj(r.quat());
    if (q.w == 0.0 && std::abs(out.w) <= 1e-12) out.w = 0.0;
    return out;
}

inline Vec3 rotate_point(const Rotor& r, const Vec3& p) {
    return rotate(r, Quaternion::pure(p)).vec();
}

inline QTensor rotate_tensor(const Rotor& r, const QTensor& t) {
    return qt_map(t, [&r](const Quaternion& q) { return rotate(r, q); });
}

/// Uniform rotation: a 4D standard normal scaled to the unit sphere.
inline Rotor random_rotor(rng::Stream& rng) {
    for (;;) {
        const Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (norm(q) > 1e-6) return Rotor::from_quaternion(q);
    }
}

} // namespace reqnn
