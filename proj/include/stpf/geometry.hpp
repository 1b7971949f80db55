#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace stpf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Pixel centers sit at integer coordinates, origin at the top-left pixel.

/// Calibrated, rectified stereo rig. The right camera is the left camera
/// translated by +baseline_m along the camera x axis.
struct RectifiedRig {
    double focal_px = 240.0;
    double baseline_m = 0.04;
    double cx = 95.5;
    double cy = 95.5;
    int width = 192;
    int height = 192;

    void validate() const;
    /// b * k, the numerator of every disparity/depth conversion.
    double bk() const { return baseline_m * focal_px; }
};

/// Down-sampling factors that map full-resolution pixels and disparities
/// onto volume cells.
struct VolumeStrides {
    int spatial_stride = 2;
    int disparity_stride = 1;
    int max_disparity = 24;

    void validate(const RectifiedRig& rig) const;
    int disparity_bins() const { return max_disparity / disparity_stride; }
    int volume_height(const RectifiedRig& rig) const { return rig.height / spatial_stride; }
    int volume_width(const RectifiedRig& rig) const { return rig.width / spatial_stride; }
    /// Horizontal shift, in volume cells, between consecutive disparity bins.
    double bin_shift() const { return double(disparity_stride) / double(spatial_stride); }
};

/// Continuous (disparity, y, x) voxel coordinate.
struct VoxelCoord {
    double d = 0.0;
    double y = 0.0;
    double x = 0.0;
};

Vec2 project_left(const Vec3& p, const RectifiedRig& rig);
Vec2 project_right(const Vec3& p, const RectifiedRig& rig);

double disparity_to_depth(double disparity, const RectifiedRig& rig);
double depth_to_disparity(double depth, const RectifiedRig& rig);

VoxelCoord volume_coordinate(const Vec3& p, const RectifiedRig& rig, const VolumeStrides& strides);

/// Unit-length viewing ray through a left-image pixel.
Vec3 pixel_ray(double u, double v, const RectifiedRig& rig);

/// Left-camera point seen at pixel (u, v) with depth z.
Vec3 backproject(double u, double v, double z, const RectifiedRig& rig);

}  // namespace stpf
