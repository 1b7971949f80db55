#include "stpf/sampling.hpp"

#include "stpf/error.hpp"

#include <cmath>

namespace stpf {

void SampleConfig::validate() const {
    if (!(gaussian_sigma > 0.0)) throw ConfigError("sampling: gaussian_sigma must be positive");
    if (!(uniform_ratio >= 0.0 && uniform_ratio <= 1.0)) throw ConfigError("sampling: uniform_ratio must be in [0,1]");
    if (surface_count < 0) throw ConfigError("sampling: surface_count must be >= 0");
    if (!((box_max - box_min).minCoeff() > 0.0)) throw ConfigError("sampling: box must have positive volume");
    if (!(box_min.z() > 0.0)) throw ConfigError("sampling: box must lie in front of the camera");
}

std::vector<Vec3> sample_surface_points(const SdfScene& scene, int n, std::mt19937_64& rng) {
    std::vector<Vec3> out;
    if (n <= 0) return out;
    out.reserve(std::size_t(n));
    Vec3 lo, hi;
    scene_bounds(scene, lo, hi);
    const Vec3 center = 0.5 * (lo + hi);
    const double radius = 0.5 * (hi - lo).norm() + 1e-3;
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    long misses = 0;
    while (int(out.size()) < n) {
        // Origin on a sphere enclosing the scene, aimed at a random point of the bounds.
        Vec3 dir(g(rng), g(rng), g(rng));
        dir.normalize();
        const Vec3 origin = center + 2.0 * radius * dir;
        const Vec3 target(lo.x() + (hi.x() - lo.x()) * uni(rng), lo.y() + (hi.y() - lo.y()) * uni(rng),
                          lo.z() + (hi.z() - lo.z()) * uni(rng));
        const Vec3 ray = (target - origin).normalized();
        double t = 0.0;
        bool hit = false;
        Vec3 p = origin;
        for (int step = 0; step < 512 && t < 4.0 * radius; ++step) {
            p = origin + t * ray;
            const double d = sdf_eval(scene, p);
            if (d < 1e-6) {
                hit = true;
                break;
            }
            t += d;
        }
        if (!hit) {
            if (++misses > 1000L * n + 100000L) throw DataError("sample_surface_points: no surface in view");
            continue;
        }
        for (int it = 0; it < 20; ++it) {
            const double d = sdf_eval(scene, p);
            if (std::abs(d) <= 1e-7) break;
            p -= d * sdf_normal(scene, p, 1e-6);
        }
        if (std::abs(sdf_eval(scene, p)) <= 1e-4) out.push_back(p);
    }
    return out;
}

QueryBatch perturb_and_label(const std::vector<Vec3>& surface_points, const SdfScene& scene,
                             const SampleConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    std::normal_distribution<double> g(0.0, cfg.gaussian_sigma);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    QueryBatch batch;
    batch.points.reserve(surface_points.size());
    for (const Vec3& s : surface_points) {
        Vec3 p;
        if (uni(rng) < cfg.uniform_ratio) {
            p = Vec3(cfg.box_min.x() + (cfg.box_max.x() - cfg.box_min.x()) * uni(rng),
                     cfg.box_min.y() + (cfg.box_max.y() - cfg.box_min.y()) * uni(rng),
                     cfg.box_min.z() + (cfg.box_max.z() - cfg.box_min.z()) * uni(rng));
        } else {
            p = s + Vec3(g(rng), g(rng), g(rng));
            p = p.cwiseMax(cfg.box_min).cwiseMin(cfg.box_max);
        }
        batch.points.push_back(p);
        batch.labels.push_back(double(occupancy_oracle(scene, p)));
    }
    return batch;
}

}  // namespace stpf
