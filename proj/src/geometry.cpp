#include "stpf/geometry.hpp"

#include "stpf/error.hpp"

#include <string>

namespace stpf {

void RectifiedRig::validate() const {
    if (!(focal_px > 0.0)) throw ConfigError("rig: focal_px must be positive");
    if (!(baseline_m > 0.0)) throw ConfigError("rig: baseline_m must be positive");
    if (width < 2 || height < 2) throw ConfigError("rig: width and height must be at least 2");
}

void VolumeStrides::validate(const RectifiedRig& rig) const {
    if (spatial_stride < 1 || disparity_stride < 1 || max_disparity < 1)
        throw ConfigError("volume: strides and max_disparity must be >= 1");
    if (max_disparity % disparity_stride != 0)
        throw ConfigError("volume: max_disparity (" + std::to_string(max_disparity) +
                          ") must be divisible by disparity_stride (" +
                          std::to_string(disparity_stride) + ")");
    if (rig.width % spatial_stride != 0 || rig.height % spatial_stride != 0)
        throw ConfigError("volume: image size " + std::to_string(rig.width) + "x" +
                          std::to_string(rig.height) + " must be divisible by spatial_stride (" +
                          std::to_string(spatial_stride) + ")");
}

Vec2 project_left(const Vec3& p, const RectifiedRig& rig) {
    if (!(p.z() > 0.0)) throw GeometryError("project_left: point is behind the camera");
    return {rig.focal_px * p.x() / p.z() + rig.cx, rig.focal_px * p.y() / p.z() + rig.cy};
}

Vec2 project_right(const Vec3& p, const RectifiedRig& rig) {
    if (!(p.z() > 0.0)) throw GeometryError("project_right: point is behind the camera");
    return {rig.focal_px * (p.x() - rig.baseline_m) / p.z() + rig.cx,
            rig.focal_px * p.y() / p.z() + rig.cy};
}

double disparity_to_depth(double disparity, const RectifiedRig& rig) {
    if (!(disparity > 0.0)) throw GeometryError("disparity_to_depth: disparity must be positive");
    return rig.bk() / disparity;
}

double depth_to_disparity(double depth, const RectifiedRig& rig) {
    if (!(depth > 0.0)) throw GeometryError("depth_to_disparity: depth must be positive");
    return rig.bk() / depth;
}

VoxelCoord volume_coordinate(const Vec3& p, const RectifiedRig& rig, const VolumeStrides& strides) {
    const Vec2 l = project_left(p, rig);
    const Vec2 r = project_right(p, rig);
    return {(l.x() - r.x()) / strides.disparity_stride, l.y() / strides.spatial_stride,
            l.x() / strides.spatial_stride};
}

Vec3 pixel_ray(double u, double v, const RectifiedRig& rig) {
    return Vec3((u - rig.cx) / rig.focal_px, (v - rig.cy) / rig.focal_px, 1.0).normalized();
}

Vec3 backproject(double u, double v, double z, const RectifiedRig& rig) {
    return {(u - rig.cx) / rig.focal_px * z, (v - rig.cy) / rig.focal_px * z, z};
}

}  // namespace stpf
