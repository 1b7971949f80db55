#include "stpf/mesh.hpp"

#include "stpf/error.hpp"
#include "stpf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <regex>

namespace stpf {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

MeshDistance::MeshDistance(const TriangleMesh& mesh) : mesh_(mesh) {
    if (mesh.triangles.empty()) throw DataError("MeshDistance: empty mesh");
    order_.resize(mesh.triangles.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
    nodes_.reserve(2 * order_.size());
    build(0, int(order_.size()));
}

int MeshDistance::build(int begin, int end) {
    Node node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (int i = begin; i < end; ++i)
        for (int v : mesh_.triangles[std::size_t(order_[std::size_t(i)])]) {
            node.lo = node.lo.cwiseMin(mesh_.vertices[std::size_t(v)]);
            node.hi = node.hi.cwiseMax(mesh_.vertices[std::size_t(v)]);
        }
    node.begin = begin;
    node.end = end;
    const int id = int(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= 4) return id;
    int axis;
    (node.hi - node.lo).maxCoeff(&axis);
    auto centroid = [&](int t) {
        const auto& tri = mesh_.triangles[std::size_t(t)];
        return (mesh_.vertices[std::size_t(tri[0])][axis] + mesh_.vertices[std::size_t(tri[1])][axis] +
                mesh_.vertices[std::size_t(tri[2])][axis]);
    };
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return centroid(a) < centroid(b); });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[std::size_t(id)].left = l;
    nodes_[std::size_t(id)].right = r;
    return id;
}

double MeshDistance::triangle_distance2(int tri, const Vec3& p) const {
    const auto& t = mesh_.triangles[std::size_t(tri)];
    return (p - closest_point_on_triangle(p, mesh_.vertices[std::size_t(t[0])], mesh_.vertices[std::size_t(t[1])],
                                          mesh_.vertices[std::size_t(t[2])]))
        .squaredNorm();
}

double MeshDistance::distance(const Vec3& p) const {
    auto box_d2 = [&](const Node& n) {
        const Vec3 d = (n.lo - p).cwiseMax(p - n.hi).cwiseMax(0.0);
        return d.squaredNorm();
    };
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, int>> stack{{box_d2(nodes_[0]), 0}};
    while (!stack.empty()) {
        const auto [d2, id] = stack.back();
        stack.pop_back();
        if (d2 >= best) continue;
        const Node& n = nodes_[std::size_t(id)];
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) best = std::min(best, triangle_distance2(order_[std::size_t(i)], p));
            continue;
        }
        const double dl = box_d2(nodes_[std::size_t(n.left)]);
        const double dr = box_d2(nodes_[std::size_t(n.right)]);
        // Push the farther child first so the nearer one is expanded next.
        if (dl < dr) {
            stack.emplace_back(dr, n.right);
            stack.emplace_back(dl, n.left);
        } else {
            stack.emplace_back(dl, n.left);
            stack.emplace_back(dr, n.right);
        }
    }
    return std::sqrt(best);
}

double MeshDistance::distance_brute_force(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) best = std::min(best, triangle_distance2(int(t), p));
    return std::sqrt(best);
}

double point_to_surface(std::span<const Vec3> points, const TriangleMesh& target) {
    if (points.empty()) return 0.0;
    const MeshDistance dist(target);
    std::vector<double> d(points.size());
    parallel_for(points.size(), 1024, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) d[i] = dist.distance(points[i]);
    });
    double acc = 0.0;
    for (double v : d) acc += v;
    return 100.0 * acc / double(points.size());
}

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
    if (mesh.triangles.empty()) throw DataError("sample_mesh_surface: empty mesh");
    std::vector<double> cdf(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        total += triangle_area(mesh.vertices[std::size_t(tri[0])], mesh.vertices[std::size_t(tri[1])],
                               mesh.vertices[std::size_t(tri[2])]);
        cdf[t] = total;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(std::size_t(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        const double r = uni(rng) * total;
        const auto t = std::size_t(std::min<std::ptrdiff_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin(),
                                                            std::ptrdiff_t(cdf.size()) - 1));
        const auto& tri = mesh.triangles[t];
        const double s = std::sqrt(uni(rng)), u = uni(rng);
        const Vec3& a = mesh.vertices[std::size_t(tri[0])];
        const Vec3& b = mesh.vertices[std::size_t(tri[1])];
        const Vec3& c = mesh.vertices[std::size_t(tri[2])];
        out.push_back((1.0 - s) * a + s * (1.0 - u) * b + s * u * c);
    }
    return out;
}

SurfaceMetrics chamfer(const TriangleMesh& recon, const TriangleMesh& gt, int samples_per_side, std::uint64_t seed) {
    if (recon.empty() || gt.empty()) throw DataError("chamfer: empty mesh");
    const auto recon_pts = sample_mesh_surface(recon, samples_per_side, seed);
    const auto gt_pts = sample_mesh_surface(gt, samples_per_side, seed);
    SurfaceMetrics m;
    m.p2s_cm = point_to_surface(recon_pts, gt);
    m.reverse_cm = point_to_surface(gt_pts, recon);
    m.chamfer_cm = 0.5 * (m.p2s_cm + m.reverse_cm);
    return m;
}

std::string format_metrics_line(const SurfaceMetrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "p2s_cm=%.6f chamfer_cm=%.6f", m.p2s_cm, m.chamfer_cm);
    return buf;
}

SurfaceMetrics parse_metrics_report(const std::string& text) {
    static const std::regex line(R"(p2s_cm=([-+0-9.eE]+)\s+chamfer_cm=([-+0-9.eE]+))");
    std::smatch m;
    if (!std::regex_search(text, m, line)) throw DataError("metrics report: no p2s_cm/chamfer_cm line");
    SurfaceMetrics out;
    out.p2s_cm = std::stod(m[1].str());
    out.chamfer_cm = std::stod(m[2].str());
    out.reverse_cm = 2.0 * out.chamfer_cm - out.p2s_cm;
    return out;
}

}  // namespace stpf
