#pragma once

#include "stpf/descriptors.hpp"
#include "stpf/features.hpp"
#include "stpf/model.hpp"
#include "stpf/params.hpp"
#include "stpf/volumes.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace stpf {

/// Everything that fixes the shapes of the stereo head and the implicit
/// function.
struct ModelConfig {
    RectifiedRig rig;
    VolumeStrides strides;
    FeatureConfig features;
    DescriptorBank descriptors;
    int smoothing_radius = 1;
    int cost_channels = 8;            // channels of the aggregated cost volume
    std::vector<int> hidden{128, 128};
    double leaky_slope = 0.01;
    double score_quadratic_init = 2000.0;

    int input_channels() const { return descriptors.channels(); }
    int feature_width() const { return input_channels() + cost_channels + 2; }
    MlpShape mlp_shape() const;
    void validate() const;
};

/// Trainable state: the confidence scoring layer ("stereo", stage 1) and the
/// channel mix + MLP ("occupancy", stage 2).
struct OccupancyModel {
    ModelConfig config;
    ParamSet stereo;
    ParamSet occupancy;

    static OccupancyModel create(const ModelConfig& config, std::uint64_t seed);

    ConfidenceScore score() const;
    ChannelMix mix() const;
};

/// Parameter-free products of one stereo pair.
struct StereoEvidence {
    FeatureGrid left_features;
    FeatureGrid right_features;
    CostVolume cost;                      // initial feature cost volume
    Volume4 smoothed;                     // box-smoothed cost volume
    std::vector<std::uint8_t> foreground; // full-resolution left silhouette
};

StereoEvidence prepare_evidence(const ModelConfig& config, const Image& left, const Image& right);

/// Products that depend on the scoring parameters.
struct StereoPrediction {
    ConfidenceVolume conf;
    DisparityMap coarse;     // volume resolution, in full-resolution pixels
    DisparityMap disparity;  // full resolution, restricted to the foreground
    DepthMap depth;
};

StereoPrediction predict_stereo(const ModelConfig& config, const StereoEvidence& evidence, const ParamSet& stereo);

/// Aggregated cost volume materialized from the smoothed evidence.
Volume4 aggregated_cost(const OccupancyModel& model, const StereoEvidence& evidence);

/// Back-propagates gradients on the confidence volume (D x H x W, may be
/// empty) and on the full-resolution disparity (may be empty) into the
/// scoring parameters.
void stereo_backward(const ModelConfig& config, const StereoEvidence& evidence, const StereoPrediction& prediction,
                     std::span<const double> grad_psi, std::span<const double> grad_disparity, ParamSet& grad_stereo);

/// Multi-scale disparity loss of the current prediction against ground truth.
double disparity_loss_and_grad(const ModelConfig& config, const StereoEvidence& evidence,
                               const StereoPrediction& prediction, const DisparityMap& gt,
                               const LossWeights& weights, ParamSet* grad_stereo);

/// Gathered implicit-function inputs of a point batch.
struct BatchFeatures {
    std::vector<std::size_t> active;  // indices of in-frustum points
    Eigen::MatrixXd x;                // feature_width x active.size()
    Eigen::MatrixXd smoothed;         // smoothed cost samples before the mix
    std::vector<Stencil3> voxel;
    std::vector<Stencil2> depth_taps;
    std::vector<double> z_offset;
};

/// `depth` selects the map used for the z-offset; nullptr uses the
/// predicted depth.
BatchFeatures gather_features(const OccupancyModel& model, const StereoEvidence& evidence,
                              const StereoPrediction& prediction, const DepthMap* depth,
                              std::span<const Vec3> points);

/// Occupancy per point; out-of-frustum points are 0.
std::vector<double> predict_occupancy(const OccupancyModel& model, const StereoEvidence& evidence,
                                      const StereoPrediction& prediction, const DepthMap* depth,
                                      std::span<const Vec3> points);

/// Mean BCE over in-frustum points and its gradients. `grad_stereo` is only
/// meaningful when `depth` is nullptr (z-offset from the predicted depth) or
/// through the confidence feature alone otherwise.
struct OccupancyLoss {
    double loss = 0.0;
    std::size_t used = 0;
};

OccupancyLoss occupancy_loss_and_grad(const OccupancyModel& model, const StereoEvidence& evidence,
                                      const StereoPrediction& prediction, const DepthMap* depth,
                                      std::span<const Vec3> points, std::span<const double> labels,
                                      ParamSet* grad_occupancy, ParamSet* grad_stereo);

}  // namespace stpf
