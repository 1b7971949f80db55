#include "stpf/features.hpp"

#include "stpf/error.hpp"

#include <algorithm>
#include <cmath>

namespace stpf {

namespace {
constexpr double kPsiBound = 1.0 - 0x1p-53;
}

void FeatureConfig::validate() const {
    if (!(t > 0.0)) throw ConfigError("features: t must be positive");
}

double psi_t(double x, double t) {
    return std::clamp(std::tanh(0.5 * t * x), -kPsiBound, kPsiBound);
}

double psi_t_derivative(double x, double t) {
    const double th = std::tanh(0.5 * t * x);
    return 0.5 * t * (1.0 - th * th);
}

std::optional<double> relative_z_offset(const Vec3& p, const DepthMap& depth, const RectifiedRig& rig) {
    if (!(p.z() > 0.0)) return std::nullopt;
    const Vec2 uv = project_left(p, rig);
    if (uv.x() < 0.0 || uv.y() < 0.0 || uv.x() > depth.width - 1 || uv.y() > depth.height - 1)
        return std::nullopt;
    double e = 0.0;
    if (!sample_map(depth, uv.y(), uv.x(), e)) return std::nullopt;
    return p.z() - e;
}

Eigen::VectorXd QueryFeatures::concat() const {
    Eigen::VectorXd out(pixel_feat.size() + cost_feat.size() + 2);
    out << pixel_feat, cost_feat, confidence, z_code;
    return out;
}

bool in_stereo_frustum(const Vec3& p, const RectifiedRig& rig, const VolumeStrides& strides) {
    if (!(p.z() > 0.0)) return false;
    const Vec2 uv = project_left(p, rig);
    if (uv.x() < 0.0 || uv.y() < 0.0 || uv.x() > rig.width - 1 || uv.y() > rig.height - 1) return false;
    const double d = depth_to_disparity(p.z(), rig) / strides.disparity_stride;
    return d >= 0.0 && d <= strides.disparity_bins() - 1;
}

QueryFeatures assemble_query_features(const Vec3& p, const FeatureGrid& pixel_features, const Volume4& cost,
                                      const Grid4<double>& confidence, const DepthMap& depth,
                                      const RectifiedRig& rig, const VolumeStrides& strides,
                                      const FeatureConfig& cfg) {
    QueryFeatures q;
    q.pixel_feat = Eigen::VectorXd::Zero(pixel_features.channels);
    q.cost_feat = Eigen::VectorXd::Zero(cost.channels);
    if (!in_stereo_frustum(p, rig, strides)) return q;
    const auto offset = relative_z_offset(p, depth, rig);
    if (!offset) return q;
    const Vec2 uv = project_left(p, rig);
    const VoxelCoord vc = volume_coordinate(p, rig, strides);
    q.pixel_feat = bilinear_sample(pixel_features, uv / double(pixel_features.stride_px));
    q.cost_feat = trilinear_sample(cost, vc);
    q.confidence = trilinear_sample(confidence, vc)[0];
    q.z_code = cfg.use_psi ? psi_t(*offset, cfg.t) : *offset;
    q.in_frustum = true;
    return q;
}

}  // namespace stpf
