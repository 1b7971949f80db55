#pragma once

#include "stpf/descriptors.hpp"
#include "stpf/geometry.hpp"
#include "stpf/volumes.hpp"

#include <Eigen/Geometry>

#include <random>
#include <string>
#include <variant>
#include <vector>

namespace stpf {

struct Sphere {
    Vec3 center;
    double radius = 0.0;
};

struct Capsule {
    Vec3 a;
    Vec3 b;
    double radius = 0.0;
};

/// Oriented box: world = rotation * local + center.
struct Box {
    Vec3 center;
    Vec3 half_extents;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

using Primitive = std::variant<Sphere, Capsule, Box>;

/// Directional light in left-camera coordinates (pointing towards the light).
struct Light {
    Vec3 direction{0.0, 0.0, -1.0};
    double intensity = 1.0;
    double ambient = 0.25;
};

/// Min-union of analytic primitives.
struct SdfScene {
    std::vector<Primitive> primitives;
    Light light;
};

double sdf_eval(const SdfScene& scene, const Vec3& p);
double sdf_eval(const Primitive& prim, const Vec3& p);

/// 1 iff the point is inside or on the surface.
int occupancy_oracle(const SdfScene& scene, const Vec3& p);

/// Central-difference SDF gradient, normalized.
Vec3 sdf_normal(const SdfScene& scene, const Vec3& p, double h = 1e-5);

/// Axis-aligned bounds of the union.
void scene_bounds(const SdfScene& scene, Vec3& lo, Vec3& hi);

/// Uniform scale about `pivot`, then rotation about `pivot`, then translation.
SdfScene transform_scene(const SdfScene& scene, const Eigen::Matrix3d& rotation, const Vec3& translation,
                         double scale, const Vec3& pivot);

// Text form, one record per line:
//   sphere cx cy cz r
//   capsule ax ay az bx by bz r
//   box cx cy cz hx hy hz [rx ry rz]    (optional axis-angle rotation)
//   light lx ly lz intensity ambient
std::string format_scene(const SdfScene& scene);
SdfScene parse_scene(const std::string& text);

struct RenderConfig {
    double tolerance = 1e-5;  // meters
    int max_steps = 256;
    double max_distance = 50.0;
    bool texture = true;      // procedural albedo, flat 0.8 otherwise
};

struct RenderedPair {
    Image left;
    Image right;
    DepthMap depth;          // left view, meters
    DisparityMap disparity;  // left view, pixels
};

/// Procedural solid-texture albedo in [0.25, 1].
double surface_albedo(const Vec3& p);

RenderedPair render_stereo(const SdfScene& scene, const RectifiedRig& rig, const RenderConfig& cfg = {});

/// Ranges for procedural scenes. Every primitive's bounding sphere is kept
/// inside `box_min`..`box_max` and inside the left and right frusta.
struct SceneRanges {
    Vec3 box_min{-0.16, -0.16, 0.42};
    Vec3 box_max{0.16, 0.16, 0.70};
    int min_primitives = 1;
    int max_primitives = 3;
    double min_size = 0.025;
    double max_size = 0.055;
    double light_cone_deg = 30.0;
    double min_intensity = 0.8;
    double max_intensity = 1.2;
};

SdfScene random_scene(const SceneRanges& ranges, const RectifiedRig& rig, std::mt19937_64& rng);

/// Random light direction within the configured cone around the viewing axis.
Light random_light(const SceneRanges& ranges, std::mt19937_64& rng);

}  // namespace stpf
