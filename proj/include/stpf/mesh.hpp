#pragma once

#include "stpf/geometry.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stpf {

/// Indexed triangle set in left-camera space (meters).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    double area() const;
    /// Signed enclosed volume; positive for outward-facing windings.
    double signed_volume() const;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Edge statistics of a mesh.
struct MeshTopology {
    std::size_t edges = 0;
    std::size_t boundary_edges = 0;     // used by one triangle
    std::size_t nonmanifold_edges = 0;  // used by more than two
    long euler = 0;                     // V - E + F over referenced vertices

    bool closed() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshTopology mesh_topology(const TriangleMesh& mesh);

// ASCII OBJ with `v` and `f` records, 1-based indices.
std::string format_obj(const TriangleMesh& mesh);
TriangleMesh parse_obj(const std::string& text);
void save_obj(const TriangleMesh& mesh, const std::string& path);
TriangleMesh load_obj(const std::string& path);

// ---------------------------------------------------------------------------
// Isosurface extraction.

/// Axis-aligned sampling lattice in camera space.
struct ReconGrid {
    Vec3 box_min{-0.16, -0.16, 0.42};
    Vec3 box_max{0.16, 0.16, 0.70};
    std::array<int, 3> resolution{96, 96, 96};  // nodes per axis
    double iso = 0.5;

    void validate() const;
    Vec3 spacing() const;
};

/// Scalar samples on a regular lattice, x fastest.
struct Lattice {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 origin = Vec3::Zero();
    Vec3 spacing = Vec3::Ones();
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return (std::size_t(k) * std::size_t(dims[1]) + std::size_t(j)) * std::size_t(dims[0]) + std::size_t(i);
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3 node(int i, int j, int k) const {
        return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
    }
    /// Trilinear interpolation at a metric position (clamped).
    double interpolate(const Vec3& p) const;
};

/// Evaluates a batch of points into values.
using FieldFunction = std::function<void(std::span<const Vec3>, std::span<double>)>;

/// Samples the field on a res[0] x res[1] x res[2] node lattice spanning
/// [lo, hi], padded with one layer of `pad_value`.
Lattice sample_lattice(const FieldFunction& field, const Vec3& lo, const Vec3& hi, const std::array<int, 3>& res,
                       double pad_value);

/// Samples the field on every grid node and surrounds the result with one
/// layer of `pad_value` on all faces.
Lattice evaluate_field(const FieldFunction& field, const ReconGrid& grid, double pad_value = 0.0);

/// Marching cubes with the classic 256-case table and linear edge
/// interpolation. Nodes with value >= iso are inside; vertices on shared
/// edges are welded. Returns an empty mesh when nothing crosses iso.
TriangleMesh marching_cubes(const Lattice& lattice, double iso);

/// Closed mesh of an analytic field sampled at `resolution` nodes per axis
/// over the padded box; inside is field >= 0.
TriangleMesh mesh_implicit(const std::function<double(const Vec3&)>& inside_field, const Vec3& lo, const Vec3& hi,
                           int resolution);

// ---------------------------------------------------------------------------
// Metrics (reported in centimeters).

/// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy for exact nearest-surface queries.
class MeshDistance {
public:
    explicit MeshDistance(const TriangleMesh& mesh);
    double distance(const Vec3& p) const;
    double distance_brute_force(const Vec3& p) const;

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };
    int build(int begin, int end);
    double triangle_distance2(int tri, const Vec3& p) const;

    const TriangleMesh& mesh_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Mean exact point-to-surface distance, in cm.
double point_to_surface(std::span<const Vec3> points, const TriangleMesh& target);

/// Area-weighted uniform surface samples with a fixed seed.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

struct SurfaceMetrics {
    double p2s_cm = 0.0;      // recon samples -> ground-truth surface
    double reverse_cm = 0.0;  // ground-truth samples -> recon surface
    double chamfer_cm = 0.0;  // mean of both directions
};

SurfaceMetrics chamfer(const TriangleMesh& recon, const TriangleMesh& gt, int samples_per_side = 10000,
                       std::uint64_t seed = 1234);

/// `p2s_cm=<v> chamfer_cm=<v>`
std::string format_metrics_line(const SurfaceMetrics& m);
/// Parses the key=value metrics line (or a report containing it).
SurfaceMetrics parse_metrics_report(const std::string& text);

}  // namespace stpf
