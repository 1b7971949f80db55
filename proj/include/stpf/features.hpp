#pragma once

#include "stpf/geometry.hpp"
#include "stpf/volumes.hpp"

#include <Eigen/Core>

#include <optional>

namespace stpf {

struct FeatureConfig {
    double t = 50.0;       // sharpness of the z-offset squashing
    bool use_psi = true;   // false feeds the raw z-offset (ablation)

    void validate() const;
};

/// 2 / (1 + exp(-t x)) - 1, evaluated as tanh(t x / 2). The result is kept
/// strictly inside (-1, 1) even where tanh rounds to +-1.
double psi_t(double x, double t);
double psi_t_derivative(double x, double t);

/// P_z minus the bilinearly interpolated depth at the left projection of P.
/// Empty when P projects outside the image or onto invalid depth.
std::optional<double> relative_z_offset(const Vec3& p, const DepthMap& depth, const RectifiedRig& rig);

/// Inputs of the implicit function for one query point.
struct QueryFeatures {
    Eigen::VectorXd pixel_feat;
    Eigen::VectorXd cost_feat;
    double confidence = 0.0;
    double z_code = 0.0;
    bool in_frustum = false;

    /// [pixel_feat, cost_feat, confidence, z_code]
    Eigen::VectorXd concat() const;
};

/// True when P is in front of the camera, projects inside the left image and
/// its disparity coordinate lies inside the volume.
bool in_stereo_frustum(const Vec3& p, const RectifiedRig& rig, const VolumeStrides& strides);

QueryFeatures assemble_query_features(const Vec3& p, const FeatureGrid& pixel_features, const Volume4& cost,
                                      const Grid4<double>& confidence, const DepthMap& depth,
                                      const RectifiedRig& rig, const VolumeStrides& strides,
                                      const FeatureConfig& cfg);

}  // namespace stpf
