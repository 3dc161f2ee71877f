#include <catch2/catch_amalgamated.hpp>

#include "reqnn/layers.hpp"

using namespace reqnn;
using namespace reqnn::layers;

namespace {

QTensor random_pure(std::vector<std::size_t> shape, rng::Stream& rng) {
    QTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t.set(i, Quaternion::pure(rng.normal(), rng.normal(), rng.normal()));
    }
    return t;
}

double rel_gap(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-12); }

/// Central-difference derivative of `loss` with respect to component `comp`
/// (0..3) of element `i` of `t`.
template <typename Loss>
double fd_quat(QTensor t, std::size_t i, int comp, double h, Loss&& loss) {
    auto bump = [&](double d) {
        Quaternion q = t.at(i);
        (comp == 0 ? q.w : comp == 1 ? q.x : comp == 2 ? q.y : q.z) += d;
        t.set(i, q);
        const double v = loss(t);
        q = t.at(i);
        (comp == 0 ? q.w : comp == 1 ? q.x : comp == 2 ? q.y : q.z) -= d;
        t.set(i, q);
        return v;
    };
    return (bump(h) - bump(-h)) / (2.0 * h);
}

double comp(const Quaternion& q, int c) { return c == 0 ? q.w : c == 1 ? q.x : c == 2 ? q.y : q.z; }

} // namespace

TEST_CASE("qconv applies the real weight to every component") {
    RTensor w({2, 2});
    w.at(0, 0) = 2.0; w.at(0, 1) = 0.0;
    w.at(1, 0) = 1.0; w.at(1, 1) = -1.0;
    const QTensor f = QTensor::from_elements({{0, 1, 0, 0}, {0, 0, 1, 0}});
    const QTensor out = qconv(w, f);
    REQUIRE(out.numel() == 2);
    CHECK(out.at(0) == Quaternion{0, 2, 0, 0});
    CHECK(out.at(1) == Quaternion{0, 1, -1, 0});

    // batched form handles each point independently
    QTensor batch({2, 2});
    batch.set(0, 0, f.at(0));
    batch.set(0, 1, f.at(1));
    batch.set(1, 0, Quaternion{1, 0, 0, 1});
    batch.set(1, 1, Quaternion{0, 0, 0, 2});
    const QTensor bout = qconv(w, batch);
    REQUIRE(bout.rows() == 2);
    REQUIRE(bout.cols() == 2);
    CHECK(bout.at(0, 0) == out.at(0));
    CHECK(bout.at(0, 1) == out.at(1));
    CHECK(bout.at(1, 0) == Quaternion{2, 0, 0, 2});
    CHECK(bout.at(1, 1) == Quaternion{1, 0, 0, -1});
}

TEST_CASE("qconv rejects mismatched shapes") {
    const RTensor w({2, 3});
    CHECK_THROWS_AS(qconv(w, QTensor({4})), ShapeError);
    CHECK_THROWS_AS(qconv(w, QTensor({5, 4})), ShapeError);
    CHECK_THROWS_AS(qconv(RTensor({4}), QTensor({4})), ShapeError);
    CHECK_THROWS_AS(qconv(w, QTensor({2, 2, 3})), ShapeError);
}

TEST_CASE("qconv commutes with rotation") {
    rng::Stream rng(11);
    for (int t = 0; t < 50; ++t) {
        RTensor w({3, 2});
        for (auto& v : w.data()) v = rng.normal();
        const QTensor f = random_pure({4, 2}, rng);
        const Rotor r = random_rotor(rng);
        const QTensor a = qconv(w, rotate_tensor(r, f));
        const QTensor b = rotate_tensor(r, qconv(w, f));
        for (std::size_t i = 0; i < a.numel(); ++i) {
            CHECK(norm(a.at(i) - b.at(i)) <= 1e-12 * (1.0 + norm(b.at(i))));
        }
    }
}

TEST_CASE("qconv backward matches central differences") {
    rng::Stream rng(12);
    RTensor w({2, 3});
    for (auto& v : w.data()) v = rng.normal();
    const QTensor f = random_pure({2, 3}, rng);
    const QTensor gout = random_pure({2, 2}, rng);
    const auto grads = qconv_backward(w, f, gout);

    auto loss_w = [&](const RTensor& wt) {
        const QTensor out = qconv(wt, f);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += dot4(gout.at(i), out.at(i));
        return s;
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.numel(); ++i) {
        RTensor wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        const double fd = (loss_w(wp) - loss_w(wm)) / (2.0 * h);
        CHECK(rel_gap(fd, grads.weight[i]) <= 1e-6);
    }
    auto loss_f = [&](const QTensor& ft) {
        const QTensor out = qconv(w, ft);
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += dot4(gout.at(i), out.at(i));
        return s;
    };
    for (std::size_t i = 0; i < f.numel(); ++i) {
        for (int c = 0; c < 4; ++c) {
            const double fd = fd_quat(f, i, c, h, loss_f);
            CHECK(rel_gap(fd, comp(grads.input.at(i), c)) <= 1e-6);
        }
    }
}

TEST_CASE("qrelu rescales small norms and keeps directions") {
    const QTensor f = QTensor::from_elements({{0, 3, 0, 0}, {0, 0.5, 0, 0}});
    const QTensor out = qrelu(f, ReluMode::Constant, 1.0);
    CHECK(out.at(0) == Quaternion{0, 3, 0, 0});        // above threshold: identity
    CHECK(norm(out.at(1) - Quaternion{0, 0.25, 0, 0}) <= 1e-15); // 0.5/1 * 0.5

    // batch mean: norms 1 and 3 give threshold 2
    const QTensor g = QTensor::from_elements({{0, 1, 0, 0}, {0, 0, 3, 0}});
    const QTensor bout = qrelu(g, ReluMode::BatchMean);
    CHECK(norm(bout.at(0) - Quaternion{0, 0.5, 0, 0}) <= 1e-15);
    CHECK(bout.at(1) == Quaternion{0, 0, 3, 0});

    CHECK_THROWS_AS(qrelu(f, ReluMode::Constant, 0.0), ValueError);
    CHECK_THROWS_AS(qrelu(f, ReluMode::Constant, -1.0), ValueError);
    CHECK_THROWS_AS(qrelu(QTensor({0}), ReluMode::BatchMean), ValueError);
}

TEST_CASE("qrelu commutes with rotation in both modes") {
    rng::Stream rng(13);
    for (int t = 0; t < 50; ++t) {
        const QTensor f = random_pure({6}, rng);
        const Rotor r = random_rotor(rng);
        for (ReluMode mode : {ReluMode::Constant, ReluMode::BatchMean}) {
            const QTensor a = qrelu(rotate_tensor(r, f), mode, 1.3);
            const QTensor b = rotate_tensor(r, qrelu(f, mode, 1.3));
            for (std::size_t i = 0; i < a.numel(); ++i) {
                CHECK(norm(a.at(i) - b.at(i)) <= 1e-12 * (1.0 + norm(b.at(i))));
            }
        }
    }
}

TEST_CASE("qrelu backward matches central differences away from the threshold") {
    // Norms are pinned far from the kink at |f| = thr in both modes, so the
    // h = 1e-6 stencil stays on one side of it.
    QTensor f({2});
    f.set(0, Quaternion::pure(0.3, -0.2, 0.1));  // norm ~0.37, shrunk when c = 1
    f.set(1, Quaternion{1.8, 0.4, -0.3, 2.2});   // norm ~2.9, passed through
    const QTensor gout = QTensor::from_elements({{0.7, -0.3, 0.2, 0.5}, {-0.4, 1.1, 0.6, -0.2}});
    const double h = 1e-6;
    for (ReluMode mode : {ReluMode::Constant, ReluMode::BatchMean}) {
        const QTensor gin = qrelu_backward(f, gout, mode, 1.0);
        auto loss = [&](const QTensor& ft) {
            const QTensor out = qrelu(ft, mode, 1.0);
            double s = 0.0;
            for (std::size_t i = 0; i < out.numel(); ++i) s += dot4(gout.at(i), out.at(i));
            return s;
        };
        for (std::size_t i = 0; i < f.numel(); ++i) {
            for (int c = 0; c < 4; ++c) {
                const double fd = fd_quat(f, i, c, h, loss);
                CHECK(rel_gap(fd, comp(gin.at(i), c)) <= 1e-6);
            }
        }
    }
}

TEST_CASE("batch mean threshold couples gradients across elements") {
    // With every norm below the mean-norm threshold the identity branch never
    // fires, so any correct gradient must include the threshold sensitivity.
    QTensor f({2});
    f.set(0, Quaternion::pure(1.0, 0.0, 0.0));
    f.set(1, Quaternion::pure(0.0, 1.2, 0.0));
    QTensor gout({2});
    gout.set(0, Quaternion::pure(1.0, 0.0, 0.0)); // probes element 0 only
    const QTensor gin = qrelu_backward(f, gout, ReluMode::BatchMean);
    // element 1 still receives gradient through the shared threshold
    CHECK(norm(gin.at(1)) > 1e-3);
}

TEST_CASE("qbatchnorm divides by the per element rms norm") {
    const double eps = 1e-5;
    std::vector<QTensor> batch(2, QTensor({1}));
    batch[0].set(0, Quaternion::pure(2.0, 0.0, 0.0));
    batch[1].set(0, Quaternion{});
    const auto out = qbatchnorm(batch, eps);
    const double div = std::sqrt(0.5 * (4.0 + 0.0) + eps);
    CHECK(norm(out[0].at(0) - (1.0 / div) * batch[0].at(0)) <= 1e-15);
    CHECK(norm(out[1].at(0)) == 0.0);

    CHECK_THROWS_AS(qbatchnorm({}, eps), ValueError);
    CHECK_THROWS_AS(qbatchnorm(batch, 0.0), ValueError);
    std::vector<QTensor> ragged = {QTensor({1}), QTensor({2})};
    CHECK_THROWS_AS(qbatchnorm(ragged, eps), ShapeError);
}

TEST_CASE("qbatchnorm_scaled validates and applies the gamma factors") {
    std::vector<QTensor> batch(2, QTensor({2}));
    batch[0].set(0, Quaternion::pure(1, 0, 0));
    batch[0].set(1, Quaternion::pure(0, 2, 0));
    batch[1].set(0, Quaternion::pure(0, 0, 3));
    batch[1].set(1, Quaternion::pure(1, 1, 0));
    const RTensor gamma = RTensor::from_values({2.0, 0.5});
    const auto plain = qbatchnorm(batch);
    const auto scaled = qbatchnorm_scaled(batch, gamma);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(norm(scaled[j].at(0) - 2.0 * plain[j].at(0)) <= 1e-15);
        CHECK(norm(scaled[j].at(1) - 0.5 * plain[j].at(1)) <= 1e-15);
    }
    CHECK_THROWS_AS(qbatchnorm_scaled(batch, RTensor::from_values({1.0})), ShapeError);
    CHECK_THROWS_AS(qbatchnorm_scaled(batch, RTensor::from_values({1.0, -1.0})), ValueError);
}

TEST_CASE("qbatchnorm commutes with rotation") {
    rng::Stream rng(14);
    for (int t = 0; t < 50; ++t) {
        std::vector<QTensor> batch;
        for (int j = 0; j < 3; ++j) batch.push_back(random_pure({4}, rng));
        const Rotor r = random_rotor(rng);
        std::vector<QTensor> rotated;
        for (const auto& b : batch) rotated.push_back(rotate_tensor(r, b));
        const auto a = qbatchnorm(rotated);
        const auto b = qbatchnorm(batch);
        for (std::size_t j = 0; j < batch.size(); ++j) {
            for (std::size_t i = 0; i < batch[j].numel(); ++i) {
                const Quaternion expect = rotate(r, b[j].at(i));
                CHECK(norm(a[j].at(i) - expect) <= 1e-12 * (1.0 + norm(expect)));
            }
        }
    }
}

TEST_CASE("qbatchnorm backward matches central differences") {
    rng::Stream rng(15);
    std::vector<QTensor> batch;
    for (int j = 0; j < 3; ++j) batch.push_back(random_pure({2}, rng));
    std::vector<QTensor> gout;
    for (int j = 0; j < 3; ++j) gout.push_back(random_pure({2}, rng));
    const auto gin = qbatchnorm_backward(batch, gout);

    auto loss = [&](const std::vector<QTensor>& b) {
        const auto out = qbatchnorm(b);
        double s = 0.0;
        for (std::size_t j = 0; j < out.size(); ++j) {
            for (std::size_t i = 0; i < out[j].numel(); ++i) s += dot4(gout[j].at(i), out[j].at(i));
        }
        return s;
    };
    const double h = 1e-6;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        for (std::size_t i = 0; i < batch[j].numel(); ++i) {
            for (int c = 0; c < 4; ++c) {
                auto bumped = batch;
                Quaternion q = bumped[j].at(i);
                (c == 0 ? q.w : c == 1 ? q.x : c == 2 ? q.y : q.z) += h;
                bumped[j].set(i, q);
                const double up = loss(bumped);
                (c == 0 ? q.w : c == 1 ? q.x : c == 2 ? q.y : q.z) -= 2.0 * h;
                bumped[j].set(i, q);
                const double down = loss(bumped);
                const double fd = (up - down) / (2.0 * h);
                CHECK(rel_gap(fd, comp(gin[j].at(i), c)) <= 1e-6);
            }
        }
    }
}

TEST_CASE("norm pooling picks the largest norm with a lexicographic tie break") {
    const QTensor f = QTensor::from_elements({{0, 1, 0, 0}, {0, 0, 3, 0}, {0, 2, 0, 0}});
    CHECK(qmaxpool_index(f) == 1);
    CHECK(qmaxpool(f) == Quaternion{0, 0, 3, 0});

    // equal norms: the larger (x, y, z, w) tuple wins
    const QTensor tie = QTensor::from_elements({{0, 0, 1, 0}, {0, 1, 0, 0}});
    CHECK(qmaxpool_index(tie) == 1);
    CHECK_FALSE(pool_less(tie.at(1), tie.at(0)));
    CHECK(pool_less(tie.at(0), tie.at(1)));

    CHECK_THROWS_AS(qmaxpool(QTensor({0})), ValueError);
}

TEST_CASE("elementwise pooling is per channel") {
    QTensor f({2, 2});
    f.set(0, 0, Quaternion::pure(5, 0, 0));
    f.set(0, 1, Quaternion::pure(0, 1, 0));
    f.set(1, 0, Quaternion::pure(0, 0, 2));
    f.set(1, 1, Quaternion::pure(0, 4, 0));
    const auto idx = qmaxpool_elementwise_indices(f);
    REQUIRE(idx.size() == 2);
    CHECK(idx[0] == 0);
    CHECK(idx[1] == 1);
    const QTensor out = qmaxpool_elementwise(f);
    CHECK(out.at(0) == f.at(0, 0));
    CHECK(out.at(1) == f.at(1, 1));
    CHECK_THROWS_AS(qmaxpool_elementwise(QTensor({3})), ShapeError);
    CHECK_THROWS_AS(qmaxpool_elementwise(QTensor({0, 2})), ShapeError);
}

TEST_CASE("pooling winner is stable under rotation") {
    rng::Stream rng(16);
    for (int t = 0; t < 50; ++t) {
        const QTensor f = random_pure({7}, rng);
        if (qmaxpool_near_tie(f, 1e-6)) continue;
        const Rotor r = random_rotor(rng);
        CHECK(qmaxpool_index(rotate_tensor(r, f)) == qmaxpool_index(f));
    }
}

TEST_CASE("near tie detectors") {
    const QTensor close = QTensor::from_elements({{0, 1, 0, 0}, {0, 0, 1.0 + 1e-9, 0}});
    CHECK(qmaxpool_near_tie(close, 1e-6));
    const QTensor apart = QTensor::from_elements({{0, 1, 0, 0}, {0, 0, 2, 0}});
    CHECK_FALSE(qmaxpool_near_tie(apart, 1e-6));
    CHECK_FALSE(qmaxpool_near_tie(QTensor({1}), 1e-6));

    QTensor m({2, 2});
    m.set(0, 0, Quaternion::pure(1, 0, 0));
    m.set(1, 0, Quaternion::pure(0, 1.0 + 1e-6, 0));
    m.set(0, 1, Quaternion::pure(2, 0, 0));
    m.set(1, 1, Quaternion::pure(0, 0, 5));
    CHECK(qmaxpool_elementwise_near_tie(m, 1e-3)); // channel 0 gap is 1e-6
    CHECK_FALSE(qmaxpool_elementwise_near_tie(m, 1e-9));
}

TEST_CASE("dropout keeps or kills whole quaternions") {
    rng::Stream rng(17);
    const QTensor f = QTensor::from_elements({{1, 2, 3, 4}, {4, 3, 2, 1}, {0, 1, 1, 0}});

    // eval mode is the identity
    CHECK(qdropout(f, 0.5, false, rng) == f);
    // p = 0 keeps everything at scale 1
    CHECK(qdropout(f, 0.0, true, rng) == f);

    CHECK_THROWS_AS(dropout_mask(3, 1.0, rng), ValueError);
    CHECK_THROWS_AS(dropout_mask(3, -0.1, rng), ValueError);
    CHECK_THROWS_AS(qdropout(f, 1.0, false, rng), ValueError);
    CHECK_THROWS_AS(qdropout_apply(f, {1, 0}, 0.5), ShapeError);

    // identical streams give identical masks
    rng::Stream a = rng::Stream::fork(9, 1), b = rng::Stream::fork(9, 1);
    CHECK(dropout_mask(64, 0.3, a) == dropout_mask(64, 0.3, b));

    // surviving elements are scaled by 1/(1-p), dropped ones are zero
    rng::Stream c = rng::Stream::fork(9, 2);
    const auto keep = dropout_mask(f.numel(), 0.5, c);
    const QTensor out = qdropout_apply(f, keep, 0.5);
    for (std::size_t i = 0; i < f.numel(); ++i) {
        if (keep[i]) CHECK(norm(out.at(i) - 2.0 * f.at(i)) == 0.0);
        else CHECK(norm(out.at(i)) == 0.0);
    }

    // keep fraction concentrates near 1 - p
    rng::Stream d = rng::Stream::fork(9, 3);
    const auto big = dropout_mask(4000, 0.3, d);
    double kept = 0;
    for (auto k : big) kept += k;
    CHECK(std::abs(kept / 4000.0 - 0.7) <= 0.05);
}

TEST_CASE("guarded norm is finite at zero") {
    CHECK(guarded_norm(Quaternion{}) == Catch::Approx(1e-10).epsilon(1e-12));
    CHECK(guarded_norm(Quaternion{0, 3, 4, 0}) == Catch::Approx(5.0).epsilon(1e-12));
}
