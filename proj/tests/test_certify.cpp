#include <catch2/catch_amalgamated.hpp>

#include "reqnn/certify.hpp"

using namespace reqnn;
using nlohmann::json;

TEST_CASE("relative error metric") {
    const QTensor a = QTensor::from_elements({{2, 0, 0, 0}});
    const QTensor b = QTensor::from_elements({{1, 0, 0, 0}});
    CHECK(cert::rel_err(a, a) == 0.0);
    CHECK(cert::rel_err(a, b) == Catch::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(cert::rel_err(a, QTensor({2})), ShapeError);

    CHECK(cert::rel_err(RTensor::from_values({3.0}), RTensor::from_values({1.0})) ==
          Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("every shipped layer certifies rotation equivariance") {
    for (cert::LayerSubject s : cert::certified_layer_subjects()) {
        const auto rep = cert::certify_layer_equivariance(s, 50, 1e-11, 90);
        INFO(rep.subject);
        CHECK(rep.pass());
        CHECK(rep.trials == 50);
        CHECK(rep.max_relative_error <= 1e-11);
        CHECK(rep.property == "rotation-equivariance");
    }
}

TEST_CASE("certificates are reproducible for a fixed seed") {
    const auto a = cert::certify_layer_equivariance(cert::LayerSubject::QConv, 40, 1e-11, 91);
    const auto b = cert::certify_layer_equivariance(cert::LayerSubject::QConv, 40, 1e-11, 91);
    CHECK(a.max_relative_error == b.max_relative_error);
    CHECK(a.tie_resamples == b.tie_resamples);

    const auto c = cert::certify_layer_equivariance(cert::LayerSubject::QConv, 40, 1e-11, 92);
    CHECK(a.max_relative_error != c.max_relative_error); // different draws

    const json j = a.to_json();
    CHECK(j["pass"] == true);
    CHECK(j["trials"] == 40);
    CHECK(j["subject"] == "qconv");
    CHECK(j["failures"].is_array());
}

TEST_CASE("all layer certificates run as a batch") {
    const auto reports = cert::certify_all_layers(25, 1e-11, 93);
    CHECK(reports.size() == cert::certified_layer_subjects().size());
    for (const auto& r : reports) {
        INFO(r.subject);
        CHECK(r.pass());
    }
}

TEST_CASE("network feature maps co-rotate with the cloud") {
    for (const char* name : {"micro-pointnet-cls", "micro-pointnetpp-cls", "micro-edgeconv-cls",
                             "micro-pointnet-ae"}) {
        auto n = net::Network::build(net::gradcheck_spec(name, 1));
        const auto rep = cert::certify_network_equivariance(n, 25, 1e-9, 94);
        INFO(name);
        CHECK(rep.pass());
    }
}

TEST_CASE("classifier logits ignore rotations") {
    auto n = net::Network::build(net::gradcheck_spec("micro-pointnet-cls", 1));
    const auto rep = cert::certify_output_invariance(n, 25, 1e-9, 95);
    CHECK(rep.pass());
    CHECK(rep.property == "rotation-invariance");

    auto ae = net::Network::build(net::gradcheck_spec("micro-pointnet-ae", 1));
    CHECK_THROWS_AS(cert::certify_output_invariance(ae, 5, 1e-9, 95), StateError);
}

TEST_CASE("geometric selections ignore input order") {
    for (cert::GeometrySubject s :
         {cert::GeometrySubject::CentroidFps, cert::GeometrySubject::GroupBallKnn,
          cert::GeometrySubject::GroupKnn, cert::GeometrySubject::KnnGraph}) {
        const auto rep = cert::certify_permutation_invariance(s, 50, 96);
        INFO(cert::geometry_subject_name(s));
        CHECK(rep.pass());
        CHECK(rep.max_relative_error == 0.0);
    }
}

TEST_CASE("classifier logits ignore point order") {
    auto n = net::Network::build(net::gradcheck_spec("micro-edgeconv-cls", 1));
    const auto rep = cert::certify_permutation_logits(n, 25, 1e-6, 97);
    CHECK(rep.pass());

    auto ae = net::Network::build(net::gradcheck_spec("micro-pointnet-ae", 1));
    CHECK_THROWS_AS(cert::certify_permutation_logits(ae, 5, 1e-6, 97), StateError);
}

TEST_CASE("finite differences confirm every parameter gradient") {
    auto n = net::Network::build(net::gradcheck_spec("micro-pointnet-cls", 4));
    const auto rep = cert::gradcheck(n, 1e-4, 1e-4, 4);
    CHECK(rep.pass());
    CHECK(rep.trials == n.param_scalar_count());
    CHECK(rep.max_relative_error <= 1e-4);
}

TEST_CASE("broken variants are caught by their certificates") {
    const auto audit = cert::run_mutation_audit(100, 98);
    REQUIRE(audit.reports.size() == 4);
    for (const auto& r : audit.reports) {
        INFO(r.subject);
        CHECK_FALSE(r.pass());
        CHECK_FALSE(r.failures.empty());
    }
    CHECK(audit.all_detected());
}
