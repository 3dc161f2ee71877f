#include <catch2/catch_amalgamated.hpp>

#include "reqnn/tensor.hpp"

using namespace reqnn;

TEST_CASE("qtensor shape bookkeeping") {
    QTensor t({3, 4});
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 12);
    CHECK(t.rows() == 3);
    CHECK(t.cols() == 4);
    CHECK(t.extent(0) == 3);
    CHECK(t.extent(1) == 4);
    CHECK(t.is_pure()); // zero-initialized

    t.set(1, 2, Quaternion{1, 2, 3, 4});
    CHECK(t.at(1, 2) == Quaternion{1, 2, 3, 4});
    CHECK(t.at(1 * 4 + 2) == Quaternion{1, 2, 3, 4});
    CHECK_FALSE(t.is_pure());

    const QTensor empty({0, 5});
    CHECK(empty.numel() == 0);

    CHECK(shape_to_string({3, 4}) == "[3,4]");
    CHECK(shape_numel({2, 3, 4}) == 24);
}

TEST_CASE("qtensor from_elements and equality") {
    const QTensor a = QTensor::from_elements({{1, 0, 0, 0}, {0, 1, 0, 0}});
    CHECK(a.rank() == 1);
    CHECK(a.numel() == 2);
    QTensor b({2});
    b.set(0, Quaternion::identity());
    b.set(1, Quaternion{0, 1, 0, 0});
    CHECK(a == b);
    b.set(1, Quaternion{0, 1, 0, 1e-300});
    CHECK_FALSE(a == b);
}

TEST_CASE("qtensor reshape keeps data and rejects bad element counts") {
    QTensor t({2, 3});
    for (std::size_t i = 0; i < 6; ++i) t.set(i, Quaternion::pure(double(i), 0, 0));
    const QTensor r = t.reshaped({3, 2});
    CHECK(r.rows() == 3);
    for (std::size_t i = 0; i < 6; ++i) CHECK(r.at(i) == t.at(i));
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
    CHECK_THROWS_WITH(t.reshaped({4, 2}),
                      Catch::Matchers::ContainsSubstring("[2,3]") &&
                          Catch::Matchers::ContainsSubstring("[4,2]"));
}

TEST_CASE("elementwise arithmetic helpers") {
    const QTensor a = QTensor::from_elements({{1, 2, 3, 4}, {0, 1, 0, 0}});
    const QTensor b = QTensor::from_elements({{4, 3, 2, 1}, {1, 0, 0, 0}});
    const QTensor sum = qt_add(a, b);
    CHECK(sum.at(0) == Quaternion{5, 5, 5, 5});
    CHECK(sum.at(1) == Quaternion{1, 1, 0, 0});
    CHECK(qt_sub(sum, b) == a);
    CHECK(qt_scale(2.0, a).at(0) == Quaternion{2, 4, 6, 8});
    CHECK(qt_conj(a).at(0) == Quaternion{1, -2, -3, -4});

    const QTensor c({3});
    CHECK_THROWS_AS(qt_add(a, c), ShapeError);
}

TEST_CASE("norm helpers") {
    const QTensor a = QTensor::from_elements({{1, 2, 3, 4}, {0, 3, 4, 0}});
    const RTensor n2 = qt_norm_sq(a);
    CHECK(n2[0] == 30.0);
    CHECK(n2[1] == 25.0);
    const RTensor n = qt_norm(a);
    CHECK(n[1] == 5.0);
    CHECK(n.shape() == a.shape());
}

TEST_CASE("qtensor digest separates tensors and is stable") {
    const QTensor a = QTensor::from_elements({{1, 2, 3, 4}});
    QTensor b = a;
    CHECK(a.digest() == b.digest());
    b.set(0, Quaternion{1, 2, 3, 5});
    CHECK(a.digest() != b.digest());
}

TEST_CASE("rtensor basics") {
    RTensor t({2, 2});
    t.at(0, 0) = 1.0;
    t.at(0, 1) = 2.0;
    t.at(1, 0) = 3.0;
    t.at(1, 1) = 4.0;
    CHECK(t[3] == 4.0);
    CHECK(t.numel() == 4);

    const RTensor v = RTensor::from_values({5, 6, 7});
    CHECK(v.rank() == 1);
    CHECK(v[2] == 7.0);

    const RTensor r = t.reshaped({4});
    CHECK(r[1] == 2.0);
    CHECK_THROWS_AS(t.reshaped({3}), ShapeError);

    RTensor u = t;
    CHECK(u == t);
    u[0] = -1.0;
    CHECK_FALSE(u == t);
}

TEST_CASE("shape mismatch reporting names the operation") {
    const QTensor a({2}), b({3});
    CHECK_THROWS_WITH(check_same_shape(a, b, "somewhere"),
                      Catch::Matchers::StartsWith("somewhere:"));
    const RTensor c({2}), d({2, 1});
    CHECK_THROWS_AS(check_same_shape(c, d, "op"), ShapeError);
}
