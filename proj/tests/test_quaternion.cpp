#include <catch2/catch_amalgamated.hpp>

#include "reqnn/quaternion.hpp"
#include "reqnn/core.hpp"

using namespace reqnn;

namespace {

bool close(const Quaternion& a, const Quaternion& b, double tol = 1e-12) {
    return std::abs(a.w - b.w) <= tol && std::abs(a.x - b.x) <= tol &&
           std::abs(a.y - b.y) <= tol && std::abs(a.z - b.z) <= tol;
}

Quaternion random_quat(rng::Stream& rng) {
    return {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
            rng.uniform(-2.0, 2.0)};
}

} // namespace

TEST_CASE("hamilton product matches a hand-computed value") {
    // (1,2,3,4)(5,6,7,8), expanded on paper from the component formula.
    const Quaternion p{1, 2, 3, 4}, q{5, 6, 7, 8};
    CHECK(p * q == Quaternion{-60, 12, 30, 24});
    // reversed order differs (the commutator is twice the vector cross term)
    CHECK(q * p == Quaternion{-60, 20, 14, 32});
}

TEST_CASE("basis element multiplication table") {
    const Quaternion one = Quaternion::identity();
    const Quaternion i{0, 1, 0, 0}, j{0, 0, 1, 0}, k{0, 0, 0, 1};
    CHECK(i * i == -one);
    CHECK(j * j == -one);
    CHECK(k * k == -one);
    CHECK(i * j == k);
    CHECK(j * i == -k);
    CHECK(j * k == i);
    CHECK(k * j == -i);
    CHECK(k * i == j);
    CHECK(i * k == -j);
    CHECK(i * j * k == -one);
}

TEST_CASE("identity and scalar embedding") {
    const Quaternion q{0.5, -1.5, 2.0, 3.25};
    CHECK(Quaternion::identity() * q == q);
    CHECK(q * Quaternion::identity() == q);
    CHECK(2.0 * q == Quaternion{1.0, -3.0, 4.0, 6.5});
    CHECK(q * 2.0 == 2.0 * q);
    CHECK(q - q == Quaternion{});
    CHECK(-q == Quaternion{-0.5, 1.5, -2.0, -3.25});
}

TEST_CASE("conjugation is an anti-automorphism") {
    rng::Stream rng(41);
    for (int t = 0; t < 200; ++t) {
        const Quaternion p = random_quat(rng), q = random_quat(rng);
        CHECK(close(conj(p * q), conj(q) * conj(p)));
        CHECK(conj(conj(p)) == p);
    }
}

TEST_CASE("norm is multiplicative and q conj(q) is real") {
    rng::Stream rng(42);
    for (int t = 0; t < 200; ++t) {
        const Quaternion p = random_quat(rng), q = random_quat(rng);
        CHECK(norm(p * q) == Catch::Approx(norm(p) * norm(q)).epsilon(1e-12));
        const Quaternion r = q * conj(q);
        CHECK(r.w == Catch::Approx(norm_sq(q)).epsilon(1e-12));
        CHECK(std::abs(r.x) <= 1e-12 * norm_sq(q));
        CHECK(std::abs(r.y) <= 1e-12 * norm_sq(q));
        CHECK(std::abs(r.z) <= 1e-12 * norm_sq(q));
    }
}

TEST_CASE("hamilton product is associative to rounding") {
    rng::Stream rng(43);
    for (int t = 0; t < 200; ++t) {
        const Quaternion p = random_quat(rng), q = random_quat(rng), r = random_quat(rng);
        const Quaternion a = (p * q) * r, b = p * (q * r);
        const double scale = norm(p) * norm(q) * norm(r) + 1e-300;
        CHECK(norm(a - b) / scale <= 1e-14);
    }
}

TEST_CASE("pure quaternions embed 3d points") {
    const Quaternion q = Quaternion::pure(1.0, -2.0, 3.0);
    CHECK(q.is_pure());
    CHECK(q.w == 0.0);
    CHECK(q.vec().x == 1.0);
    CHECK(q.vec().y == -2.0);
    CHECK(q.vec().z == 3.0);
    CHECK(Quaternion::pure(Vec3{4, 5, 6}) == Quaternion{0, 4, 5, 6});
    CHECK_FALSE(Quaternion::identity().is_pure());
    // product of pure p, q: real part is -dot, vector part is cross
    const Quaternion a = Quaternion::pure(1, 0, 0), b = Quaternion::pure(0, 1, 0);
    CHECK(a * b == Quaternion{0, 0, 0, 1});
}

TEST_CASE("norms, dot4 and normalization") {
    const Quaternion q{1, 2, 3, 4};
    CHECK(norm_sq(q) == 30.0);
    CHECK(norm(q) == Catch::Approx(std::sqrt(30.0)).epsilon(1e-15));
    CHECK(dot4(q, Quaternion{2, 0, 1, -1}) == 1.0);

    const Quaternion u = normalized(q);
    CHECK(norm(u) == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(close(norm(q) * u, q, 1e-12));
    CHECK_THROWS_AS(normalized(Quaternion{}), ValueError);
}
