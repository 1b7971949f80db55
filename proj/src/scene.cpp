#include "stpf/scene.hpp"

#include "stpf/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace stpf {

namespace {

struct SdfVisitor {
    const Vec3& p;
    double operator()(const Sphere& s) const { return (p - s.center).norm() - s.radius; }
    double operator()(const Capsule& c) const {
        const Vec3 ab = c.b - c.a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        return (p - (c.a + t * ab)).norm() - c.radius;
    }
    double operator()(const Box& b) const {
        const Vec3 q = (b.rotation.transpose() * (p - b.center)).cwiseAbs() - b.half_extents;
        return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
};

void bounding_sphere(const Primitive& prim, Vec3& center, double& radius) {
    if (const auto* s = std::get_if<Sphere>(&prim)) {
        center = s->center;
        radius = s->radius;
    } else if (const auto* c = std::get_if<Capsule>(&prim)) {
        center = 0.5 * (c->a + c->b);
        radius = 0.5 * (c->b - c->a).norm() + c->radius;
    } else {
        const auto& b = std::get<Box>(prim);
        center = b.center;
        radius = b.half_extents.norm();
    }
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice_value(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t octave) {
    std::uint64_t h = mix64(std::uint64_t(i) * 0x8da6b343ULL ^ mix64(std::uint64_t(j) * 0xd8163841ULL ^
                                                                     mix64(std::uint64_t(k) * 0xcb1ab31fULL ^ octave)));
    return double(h >> 11) * 0x1p-53;
}

double value_noise(const Vec3& p, double cell, std::uint64_t octave) {
    const Vec3 q = p / cell;
    const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
    const auto i = std::int64_t(fx), j = std::int64_t(fy), k = std::int64_t(fz);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tx = smooth(q.x() - fx), ty = smooth(q.y() - fy), tz = smooth(q.z() - fz);
    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double w = (a ? tx : 1.0 - tx) * (b ? ty : 1.0 - ty) * (c ? tz : 1.0 - tz);
                acc += w * lattice_value(i + a, j + b, k + c, octave);
            }
    return acc;
}

bool inside_frustum(const Vec3& center, double radius, const Vec3& origin, const RectifiedRig& rig) {
    const Vec3 p = center - origin;
    const double xs[2] = {(0.0 - rig.cx) / rig.focal_px, (rig.width - 1 - rig.cx) / rig.focal_px};
    const double ys[2] = {(0.0 - rig.cy) / rig.focal_px, (rig.height - 1 - rig.cy) / rig.focal_px};
    // Inward plane normals of the four side planes through the camera center.
    const Vec3 normals[4] = {Vec3(1.0, 0.0, -xs[0]).normalized(), Vec3(-1.0, 0.0, xs[1]).normalized(),
                             Vec3(0.0, 1.0, -ys[0]).normalized(), Vec3(0.0, -1.0, ys[1]).normalized()};
    for (const Vec3& n : normals)
        if (n.dot(p) < radius) return false;
    return p.z() > radius;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

}  // namespace

double sdf_eval(const Primitive& prim, const Vec3& p) { return std::visit(SdfVisitor{p}, prim); }

double sdf_eval(const SdfScene& scene, const Vec3& p) {
    if (scene.primitives.empty()) throw DataError("sdf_eval: scene has no primitives");
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : scene.primitives) d = std::min(d, sdf_eval(prim, p));
    return d;
}

int occupancy_oracle(const SdfScene& scene, const Vec3& p) { return sdf_eval(scene, p) <= 0.0 ? 1 : 0; }

Vec3 sdf_normal(const SdfScene& scene, const Vec3& p, double h) {
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        g[a] = sdf_eval(scene, p + e) - sdf_eval(scene, p - e);
    }
    const double n = g.norm();
    return n > 0.0 ? Vec3(g / n) : Vec3(0.0, 0.0, -1.0);
}

void scene_bounds(const SdfScene& scene, Vec3& lo, Vec3& hi) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& prim : scene.primitives) {
        Vec3 c;
        double r;
        bounding_sphere(prim, c, r);
        if (const auto* b = std::get_if<Box>(&prim)) {
            const Vec3 ext = b->rotation.cwiseAbs() * b->half_extents;
            lo = lo.cwiseMin(c - ext);
            hi = hi.cwiseMax(c + ext);
        } else if (const auto* cap = std::get_if<Capsule>(&prim)) {
            lo = lo.cwiseMin(cap->a.cwiseMin(cap->b) - Vec3::Constant(cap->radius));
            hi = hi.cwiseMax(cap->a.cwiseMax(cap->b) + Vec3::Constant(cap->radius));
        } else {
            lo = lo.cwiseMin(c - Vec3::Constant(r));
            hi = hi.cwiseMax(c + Vec3::Constant(r));
        }
    }
}

SdfScene transform_scene(const SdfScene& scene, const Eigen::Matrix3d& rotation, const Vec3& translation,
                         double scale, const Vec3& pivot) {
    auto map = [&](const Vec3& p) -> Vec3 { return rotation * ((p - pivot) * scale) + pivot + translation; };
    SdfScene out;
    out.light = scene.light;
    for (const auto& prim : scene.primitives) {
        if (const auto* s = std::get_if<Sphere>(&prim)) {
            out.primitives.push_back(Sphere{map(s->center), s->radius * scale});
        } else if (const auto* c = std::get_if<Capsule>(&prim)) {
            out.primitives.push_back(Capsule{map(c->a), map(c->b), c->radius * scale});
        } else {
            const auto& b = std::get<Box>(prim);
            out.primitives.push_back(Box{map(b.center), b.half_extents * scale, rotation * b.rotation});
        }
    }
    return out;
}

std::string format_scene(const SdfScene& scene) {
    std::ostringstream os;
    char buf[512];
    for (const auto& prim : scene.primitives) {
        if (const auto* s = std::get_if<Sphere>(&prim)) {
            std::snprintf(buf, sizeof buf, "sphere %.17g %.17g %.17g %.17g\n", s->center.x(), s->center.y(),
                          s->center.z(), s->radius);
        } else if (const auto* c = std::get_if<Capsule>(&prim)) {
            std::snprintf(buf, sizeof buf, "capsule %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", c->a.x(), c->a.y(),
                          c->a.z(), c->b.x(), c->b.y(), c->b.z(), c->radius);
        } else {
            const auto& b = std::get<Box>(prim);
            const Eigen::AngleAxisd aa(b.rotation);
            const Vec3 rv = aa.axis() * aa.angle();
            if (aa.angle() == 0.0)
                std::snprintf(buf, sizeof buf, "box %.17g %.17g %.17g %.17g %.17g %.17g\n", b.center.x(),
                              b.center.y(), b.center.z(), b.half_extents.x(), b.half_extents.y(), b.half_extents.z());
            else
                std::snprintf(buf, sizeof buf, "box %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                              b.center.x(), b.center.y(), b.center.z(), b.half_extents.x(), b.half_extents.y(),
                              b.half_extents.z(), rv.x(), rv.y(), rv.z());
        }
        os << buf;
    }
    const Light& l = scene.light;
    std::snprintf(buf, sizeof buf, "light %.17g %.17g %.17g %.17g %.17g\n", l.direction.x(), l.direction.y(),
                  l.direction.z(), l.intensity, l.ambient);
    os << buf;
    return os.str();
}

SdfScene parse_scene(const std::string& text) {
    SdfScene scene;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        std::vector<double> v;
        for (double x; ls >> x;) v.push_back(x);
        if (!ls.eof()) throw DataError("scene line " + std::to_string(lineno) + ": bad number");
        auto need = [&](std::size_t lo, std::size_t hi) {
            if (v.size() < lo || v.size() > hi)
                throw DataError("scene line " + std::to_string(lineno) + ": wrong field count for " + kind);
        };
        if (kind == "sphere") {
            need(4, 4);
            scene.primitives.push_back(Sphere{{v[0], v[1], v[2]}, v[3]});
        } else if (kind == "capsule") {
            need(7, 7);
            scene.primitives.push_back(Capsule{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]});
        } else if (kind == "box") {
            if (v.size() != 6 && v.size() != 9)
                throw DataError("scene line " + std::to_string(lineno) + ": wrong field count for box");
            Box b{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
            if (v.size() == 9) {
                const Vec3 rv(v[6], v[7], v[8]);
                const double angle = rv.norm();
                if (angle > 0.0) b.rotation = Eigen::AngleAxisd(angle, rv / angle).toRotationMatrix();
            }
            scene.primitives.push_back(b);
        } else if (kind == "light") {
            need(5, 5);
            scene.light = Light{Vec3(v[0], v[1], v[2]), v[3], v[4]};
        } else {
            throw DataError("scene line " + std::to_string(lineno) + ": unknown record '" + kind + "'");
        }
    }
    if (scene.primitives.empty()) throw DataError("scene: no primitives");
    return scene;
}

double surface_albedo(const Vec3& p) {
    const double n = 0.6 * value_noise(p, 0.007, 1) + 0.4 * value_noise(p, 0.018, 2);
    return 0.25 + 0.75 * n;
}

RenderedPair render_stereo(const SdfScene& scene, const RectifiedRig& rig, const RenderConfig& cfg) {
    rig.validate();
    if (scene.primitives.empty()) throw DataError("render_stereo: empty scene");
    const int H = rig.height, W = rig.width;
    RenderedPair out{Image(1, H, W), Image(1, H, W), DepthMap(H, W), DisparityMap(H, W)};
    const Vec3 light = scene.light.direction.normalized();

    auto trace = [&](const Vec3& origin, const Vec3& dir, Vec3& hit) {
        double t = 0.0;
        for (int step = 0; step < cfg.max_steps; ++step) {
            const Vec3 p = origin + t * dir;
            const double d = sdf_eval(scene, p);
            if (d < cfg.tolerance) {
                hit = p;
                return true;
            }
            t += d;
            if (t > cfg.max_distance) return false;
        }
        return false;
    };
    auto shade = [&](const Vec3& p) {
        const Vec3 n = sdf_normal(scene, p);
        const double lambert = std::max(0.0, n.dot(light));
        const double albedo = cfg.texture ? surface_albedo(p) : 0.8;
        const double a = scene.light.ambient;
        return float(std::clamp(albedo * (a + (1.0 - a) * scene.light.intensity * lambert), 0.0, 1.0));
    };

    const Vec3 right_origin(rig.baseline_m, 0.0, 0.0);
    for (int v = 0; v < H; ++v)
        for (int u = 0; u < W; ++u) {
            const Vec3 dir = pixel_ray(u, v, rig);
            Vec3 hit;
            if (trace(Vec3::Zero(), dir, hit)) {
                out.left.at(0, v, u) = shade(hit);
                const std::size_t i = out.depth.index(v, u);
                out.depth.values[i] = hit.z();
                out.depth.valid[i] = 1;
                out.disparity.values[i] = depth_to_disparity(hit.z(), rig);
                out.disparity.valid[i] = 1;
            }
            if (trace(right_origin, dir, hit)) out.right.at(0, v, u) = shade(hit);
        }
    return out;
}

Light random_light(const SceneRanges& ranges, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double cone = ranges.light_cone_deg * std::numbers::pi / 180.0;
    // Uniform over the spherical cap around -z (towards the camera).
    const double cos_theta = 1.0 - uni(rng) * (1.0 - std::cos(cone));
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double phi = 2.0 * std::numbers::pi * uni(rng);
    Light l;
    l.direction = Vec3(sin_theta * std::cos(phi), sin_theta * std::sin(phi), -cos_theta);
    l.intensity = ranges.min_intensity + (ranges.max_intensity - ranges.min_intensity) * uni(rng);
    return l;
}

SdfScene random_scene(const SceneRanges& ranges, const RectifiedRig& rig, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto lerp = [&](double a, double b) { return a + (b - a) * uni(rng); };
    std::uniform_int_distribution<int> count(ranges.min_primitives, ranges.max_primitives);
    std::uniform_int_distribution<int> kind(0, 2);
    SdfScene scene;
    const int n = count(rng);
    const Vec3 right_origin(rig.baseline_m, 0.0, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000) throw ConfigError("random_scene: placement box cannot hold the requested primitives");
            const double s = lerp(ranges.min_size, ranges.max_size);
            Primitive prim;
            switch (kind(rng)) {
                case 0:
                    prim = Sphere{Vec3::Zero(), s};
                    break;
                case 1: {
                    const Vec3 axis = random_rotation(rng).col(0);
                    const double half = lerp(0.6, 1.2) * s;
                    prim = Capsule{-half * axis, half * axis, lerp(0.4, 0.6) * s};
                    break;
                }
                default:
                    prim = Box{Vec3::Zero(), Vec3(lerp(0.5, 1.0) * s, lerp(0.5, 1.0) * s, lerp(0.5, 1.0) * s),
                               random_rotation(rng)};
            }
            Vec3 c0;
            double r;
            bounding_sphere(prim, c0, r);
            const Vec3 lo = ranges.box_min + Vec3::Constant(r), hi = ranges.box_max - Vec3::Constant(r);
            if ((hi - lo).minCoeff() <= 0.0) continue;
            const Vec3 c(lerp(lo.x(), hi.x()), lerp(lo.y(), hi.y()), lerp(lo.z(), hi.z()));
            if (!inside_frustum(c, r, Vec3::Zero(), rig) || !inside_frustum(c, r, right_origin, rig)) continue;
            SdfScene one;
            one.primitives.push_back(prim);
            scene.primitives.push_back(transform_scene(one, Eigen::Matrix3d::Identity(), c, 1.0, Vec3::Zero()).primitives[0]);
            break;
        }
    }
    scene.light = random_light(ranges, rng);
    return scene;
}

}  // namespace stpf
