#pragma once

#include "reqnn/network.hpp"

namespace reqnn::net {

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "micro-pointnet-cls",
        "micro-pointnetpp-cls",
        "micro-edgeconv-cls",
        "micro-pointnet-ae",
    };
    return names;
}

/// Shipped architectures. All are well under 50k parameters and accept
/// 64-point clouds by default.
inline NetworkSpec preset_spec(const std::string& name, std::uint64_t seed = 0) {
    NetworkSpec s;
    s.name = name;
    s.seed = seed;
    s.input_points = 64;
    if (name == "micro-pointnet-cls") {
        s.classes = 3;
        s.layers = {
            LayerDesc::qconv(1, 16),  LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qnorm(),
            LayerDesc::qconv(16, 16), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qnorm(),
            LayerDesc::qconv(16, 32), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::bridge(),
            LayerDesc::fc(32, 24, true),
            LayerDesc::fc(24, 16, true),
            LayerDesc::fc(16, 3, false),
        };
    } else if (name == "micro-pointnetpp-cls") {
        s.classes = 3;
        s.layers = {
            LayerDesc::sa(16, 0.6, 8, {16, 16}),
            LayerDesc::qnorm(),
            LayerDesc::sa(4, 2.5, 8, {32, 32}),
            LayerDesc::qnorm(),
            LayerDesc::bridge(),
            LayerDesc::fc(128, 32, true),
            LayerDesc::fc(32, 16, true),
            LayerDesc::fc(16, 3, false),
        };
    } else if (name == "micro-edgeconv-cls") {
        s.classes = 3;
        s.layers = {
            LayerDesc::edgeconv(8, {16, 16}),
            LayerDesc::qnorm(),
            LayerDesc::edgeconv(8, {32, 32}),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::bridge(),
            LayerDesc::fc(32, 24, true),
            LayerDesc::fc(24, 16, true),
            LayerDesc::fc(16, 3, false),
        };
    } else if (name == "micro-pointnet-ae") {
        s.classes = 0;
        // A per-point encoder sees one channel everywhere and its latents
        // collapse to a rank-2 subspace; edge features break that degeneracy.
        // The decoder emits more points than the input so the resampled
        // targets can always be covered.
        s.layers = {
            LayerDesc::edgeconv(8, {32, 48}),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::qconv(48, 96), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qconv(96, 128),
        };
    } else {
        throw ValueError("unknown preset '" + name + "'");
    }
    validate_spec(s);
    return s;
}

/// Scaled-down instance of each preset (well under 500 scalar parameters)
/// for finite-difference gradient checks.
inline NetworkSpec gradcheck_spec(const std::string& name, std::uint64_t seed = 0) {
    NetworkSpec s;
    s.name = name + "-gradcheck";
    s.seed = seed;
    if (name == "micro-pointnet-cls") {
        s.input_points = 8;
        s.classes = 3;
        s.layers = {
            LayerDesc::qconv(1, 4), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qnorm(),
            LayerDesc::qconv(4, 6), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::bridge(),
            LayerDesc::fc(6, 5, true),
            LayerDesc::fc(5, 3, false),
        };
    } else if (name == "micro-pointnetpp-cls") {
        s.input_points = 12;
        s.classes = 3;
        s.layers = {
            LayerDesc::sa(4, 1.0, 4, {4, 4}),
            LayerDesc::qnorm(),
            LayerDesc::sa(2, 3.0, 4, {6, 6}),
            LayerDesc::qnorm(),
            LayerDesc::bridge(),
            LayerDesc::fc(12, 6, true),
            LayerDesc::fc(6, 3, false),
        };
    } else if (name == "micro-edgeconv-cls") {
        s.input_points = 10;
        s.classes = 3;
        s.layers = {
            LayerDesc::edgeconv(3, {4, 4}),
            LayerDesc::qnorm(),
            LayerDesc::edgeconv(3, {6, 6}),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::bridge(),
            LayerDesc::fc(6, 4, true),
            LayerDesc::fc(4, 3, false),
        };
    } else if (name == "micro-pointnet-ae") {
        s.input_points = 8;
        s.classes = 0;
        s.layers = {
            LayerDesc::edgeconv(3, {4, 4}),
            LayerDesc::qnorm(),
            LayerDesc::pool_points(),
            LayerDesc::qconv(4, 6), LayerDesc::qrelu(layers::ReluMode::BatchMean),
            LayerDesc::qconv(6, 8),
        };
    } else {
        throw ValueError("unknown preset '" + name + "'");
    }
    validate_spec(s);
    return s;
}

} // namespace reqnn::net
