#pragma once

#include "stpf/scene.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace stpf {

struct SampleConfig {
    int surface_count = 4000;       // surface samples per scene
    double gaussian_sigma = 0.05;   // meters
    double uniform_ratio = 1.0 / 16.0;
    Vec3 box_min{-0.16, -0.16, 0.42};
    Vec3 box_max{0.16, 0.16, 0.70};
    std::uint64_t seed = 7;

    void validate() const;
};

/// Training queries in metric left-camera space with oracle labels.
struct QueryBatch {
    std::vector<Vec3> points;
    std::vector<double> labels;  // 1 inside, 0 outside
    int scene_id = 0;
};

/// Points on the zero level set (|sdf| <= 1e-4): sphere-trace random rays
/// aimed at the scene, then project onto the surface along the gradient.
std::vector<Vec3> sample_surface_points(const SdfScene& scene, int n, std::mt19937_64& rng);

/// Gaussian-perturbed surface points mixed with box-uniform points, labelled
/// by the occupancy oracle. Perturbed points leaving the box are clamped to it.
QueryBatch perturb_and_label(const std::vector<Vec3>& surface_points, const SdfScene& scene,
                             const SampleConfig& cfg, std::mt19937_64& rng);

}  // namespace stpf
