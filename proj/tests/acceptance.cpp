// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "gradcheck.hpp"
#include "meshes.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

#include "stpf/features.hpp"
#include "stpf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace stpf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %d %s: %s; runtime %.2f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), s, limit_s);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome psi_suite() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double odd = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        odd = std::max(odd, std::abs(psi_t(x, 50.0) + psi_t(-x, 50.0)));
    }
    const double ref = double(oracle::psi(0.1L, 50.0L));
    const double v = psi_t(0.1, 50.0);
    bool monotone = true;
    double prev = -2.0;
    for (int i = 0; i < 1000; ++i) {
        const double y = psi_t(-1.0 + 2.0 * i / 999.0, 50.0);
        monotone = monotone && y >= prev;
        prev = y;
    }
    const bool pass = odd <= 1e-12 && std::abs(v - 0.986614) <= 1e-5 && std::abs(v - ref) <= 1e-12 && monotone;
    return {pass, fmt("max |psi(x)+psi(-x)| = %.1e, psi_50(0.1) = %.7f (oracle %.7f), monotone = %g", odd, v, ref,
                      monotone)};
}

// --- 2 ---------------------------------------------------------------------

Outcome cost_volume_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> C(1, 4), D(1, 8), HW(1, 12);
    int mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int c = C(rng), d = D(rng), h = HW(rng), w = HW(rng);
        const FeatureGrid l = oracle::random_grid(c, h, w, rng), r = oracle::random_grid(c, h, w, rng);
        const CostVolume cv = build_cost_volume(l, r, d);
        std::vector<float> cost;
        std::vector<int> mask;
        oracle::cost_volume(l, r, d, cost, mask);
        if (cv.cost.data != cost) ++mismatches;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (int(cv.masked[i]) != mask[i]) {
                ++mismatches;
                break;
            }
    }
    return {mismatches == 0, fmt("%.0f of 20 random volumes differ from the triple-loop oracle", mismatches)};
}

// --- 3 ---------------------------------------------------------------------

Outcome soft_argmax_oracle() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> Dd(1, 24), HW(1, 12), S(1, 3);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int D = Dd(rng), H = HW(rng), W = HW(rng);
        VolumeStrides s;
        s.disparity_stride = S(rng);
        ConfidenceVolume c{Grid4<double>(1, D, H, W, s), std::vector<std::uint8_t>(std::size_t(H) * W, 1)};
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double sum = 0.0;
                for (int d = 0; d < D; ++d) sum += c.psi.at(0, d, y, x) = u(rng);
                for (int d = 0; d < D; ++d) c.psi.at(0, d, y, x) /= sum;
            }
        const auto brute = oracle::soft_argmax(c.psi.data, D, H, W, s.disparity_stride);
        const DisparityMap e = expected_disparity(c);
        for (std::size_t i = 0; i < brute.size(); ++i) worst = std::max(worst, std::abs(e.values[i] - brute[i]));
    }
    bool onehot = true;
    for (int k = 0; k < 8; ++k) {
        ConfidenceVolume hot{Grid4<double>(1, 8, 1, 1), {1}};
        hot.psi.at(0, k, 0, 0) = 1.0;
        onehot = onehot && expected_disparity(hot).values[0] == double(k);
    }
    VolumeStrides s3;
    s3.disparity_stride = 3;
    s3.max_disparity = 72;
    ConfidenceVolume uni{Grid4<double>(1, 24, 1, 1, s3, 1.0 / 24.0), {1}};
    const double mean = expected_disparity(uni).values[0];
    const bool pass = worst <= 1e-6 && onehot && std::abs(mean - 34.5) <= 1e-6;
    return {pass, fmt("max deviation from brute force %.1e, one-hot exact = %g, uniform 24 bins stride 3 -> %.9f",
                      worst, onehot, mean)};
}

// --- 4 ---------------------------------------------------------------------

Outcome gradient_check() {
    double worst = 0.0;
    std::string worst_name;
    for (std::uint64_t seed : {101u, 202u}) {
        gradcheck::Problem pb = gradcheck::make_problem(seed);
        auto groups = gradcheck::check_occupancy(pb);
        for (const auto& e : gradcheck::check_disparity(pb)) groups.push_back(e);
        for (const auto& e : groups)
            if (e.rel > worst || !std::isfinite(e.rel)) {
                worst = e.rel;
                worst_name = e.name;
            }
    }
    return {worst <= 1e-6, fmt("worst relative error %.2e", worst) + " (" + worst_name +
                               ") over all L_Occu and L_Disp parameter groups, 8-point batches, 4x6x8 volume"};
}

// --- 5 ---------------------------------------------------------------------

Outcome geometry_round_trips() {
    const RectifiedRig rig;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uz(0.5, 10.0), uxy(-2.0, 2.0);
    double depth_err = 0.0, tri_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double z = uz(rng);
        depth_err = std::max(depth_err, std::abs(disparity_to_depth(depth_to_disparity(z, rig), rig) - z) / z);
        const Vec3 p(uxy(rng), uxy(rng), uz(rng));
        const double shift = project_left(p, rig).x() - project_right(p, rig).x();
        tri_err = std::max(tri_err, std::abs(shift - rig.bk() / p.z()));
    }
    return {depth_err <= 1e-12 && tri_err <= 1e-10,
            fmt("disparity<->depth max relative error %.1e, triangulation max error %.1e px", depth_err, tri_err)};
}

// --- 6 ---------------------------------------------------------------------

Outcome renderer_consistency() {
    const RectifiedRig rig;
    std::mt19937_64 rng(6);
    double worst = 0.0;
    std::size_t valid = 0;
    for (int k = 0; k < 10; ++k) {
        const SdfScene s = random_scene(SceneRanges{}, rig, rng);
        const RenderedPair r = render_stereo(s, rig);
        for (std::size_t i = 0; i < r.depth.values.size(); ++i) {
            if (!r.depth.valid[i]) continue;
            ++valid;
            worst = std::max(worst, std::abs(r.disparity.values[i] - depth_to_disparity(r.depth.values[i], rig)));
        }
    }
    RectifiedRig plane_rig;
    plane_rig.focal_px = 1000.0;
    plane_rig.baseline_m = 0.1;
    SdfScene plane;
    plane.primitives.push_back(Box{Vec3(0, 0, 2.01), Vec3(5, 5, 0.01)});
    RenderConfig tight;
    tight.tolerance = 1e-7;
    const RenderedPair p = render_stereo(plane, plane_rig, tight);
    double plane_err = 0.0;
    bool all_valid = true;
    for (std::size_t i = 0; i < p.disparity.values.size(); ++i) {
        all_valid = all_valid && p.disparity.valid[i];
        plane_err = std::max(plane_err, std::abs(p.disparity.values[i] - 50.0));
    }
    return {valid > 0 && worst <= 1e-5 && all_valid && plane_err <= 1e-3,
            fmt("%.0f valid pixels over 10 scenes, max |disparity - bk/depth| %.1e; plane max |d - 50| %.1e",
                double(valid), worst, plane_err)};
}

// --- 7 ---------------------------------------------------------------------

Outcome marching_cubes_sphere() {
    const Lattice lat = sample_lattice(
        [](std::span<const Vec3> p, std::span<double> out) {
            for (std::size_t i = 0; i < p.size(); ++i) out[i] = 1.0 - p[i].norm();
        },
        Vec3(-1, -1, -1), Vec3(1, 1, 1), {64, 64, 64}, 0.0);
    const TriangleMesh m = marching_cubes(lat, 0.5);
    const double cell = 2.0 / 63.0;
    double worst = 0.0;
    for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(v.norm() - 0.5));
    const MeshTopology t = mesh_topology(m);
    const SurfaceMetrics c = chamfer(m, refmesh::icosphere(Vec3::Zero(), 0.5, 6));
    const bool pass = !m.empty() && worst <= 0.5 * std::sqrt(3.0) * cell && t.closed() && t.euler == 2 &&
                      c.chamfer_cm <= 100.0 * cell;
    std::ostringstream os;
    os << "max |r - 0.5| " << fmt("%.2e", worst) << " (bound " << fmt("%.2e", 0.5 * std::sqrt(3.0) * cell)
       << "), boundary edges " << t.boundary_edges << ", non-manifold " << t.nonmanifold_edges << ", Euler " << t.euler
       << ", chamfer " << fmt("%.4f cm (bound %.4f cm)", c.chamfer_cm, 100.0 * cell);
    return {pass, os.str()};
}

// --- 8 ---------------------------------------------------------------------

std::vector<TrainingScene> render_all(const PipelineConfig& cfg) {
    std::vector<TrainingScene> out;
    for (const SdfScene& s : generate_scenes(cfg)) out.push_back({s, render_quantized(s, cfg)});
    return out;
}

Outcome desk_end_to_end() {
    const PipelineConfig cfg;  // desk profile defaults
    PipelineConfig held_cfg = cfg;
    held_cfg.seed = cfg.seed + 1000;
    held_cfg.scene_count = 3;
    const auto train = render_all(cfg);
    const auto held = render_all(held_cfg);

    TrainState st = init_training(cfg);
    train_two_stage(st, train, cfg, cfg.train.stage1_epochs);
    std::vector<double> median;
    for (const auto& h : held) {
        const StereoEvidence ev = prepare_evidence(cfg.model, h.pair.left, h.pair.right);
        median.push_back(median_disparity_error(predict_stereo(cfg.model, ev, st.model.stereo).disparity,
                                                h.pair.disparity));
    }
    train_two_stage(st, train, cfg);

    const double bound = 2.0 * 100.0 * cfg.grid.spacing().maxCoeff();
    bool pass = train.size() == 10;
    std::ostringstream os;
    os << "stage-1 median |d err| px:";
    for (double m : median) {
        os << ' ' << fmt("%.3f", m);
        pass = pass && m < 0.5;
    }
    os << " (< 0.5); chamfer cm:";
    std::ostringstream topo;
    for (const auto& h : held) {
        const Reconstruction r = reconstruct(st.model, h.pair.left, h.pair.right, cfg.grid);
        if (r.mesh.empty()) {
            os << " empty";
            pass = false;
            continue;
        }
        const SurfaceMetrics m = chamfer(r.mesh, mesh_scene(h.scene));
        const MeshTopology t = mesh_topology(r.mesh);
        os << ' ' << fmt("%.3f", m.chamfer_cm);
        topo << ' ' << t.boundary_edges;
        pass = pass && m.chamfer_cm < bound && t.closed();
    }
    os << " (< " << fmt("%.3f", bound) << " = 2 x cell); open boundary edges:" << topo.str();
    return {pass, os.str()};
}

// --- 9 ---------------------------------------------------------------------

// Small cube floating in front of a thick slab. Rays through the cube see the
// slab only as occluded geometry; its rear face is the back surface.
constexpr double kSlabFront = 0.58, kSlabRear = 0.68;

SdfScene two_layer_scene(double ox, double oy, double cube_front, double half) {
    SdfScene s;
    s.primitives.push_back(Box{Vec3(ox, oy, cube_front + half), Vec3(half, half, half)});
    const double hz = 0.5 * (kSlabRear - kSlabFront);
    s.primitives.push_back(Box{Vec3(0.0, 0.0, kSlabFront + hz), Vec3(0.12, 0.12, hz)});
    return s;
}

struct BackSurface {
    double variance = 0.0;
    double mean = 0.0;
    int rays = 0;
    int empty = 0;  // rays with no occupied sample
};

// Depth of the last occupied sample along rays in a band across the left and
// right silhouette edges of the cube.
BackSurface back_surface(const OccupancyModel& model, const PipelineConfig& cfg, const TrainingScene& ts) {
    const RectifiedRig& rig = model.config.rig;
    const StereoEvidence ev = prepare_evidence(model.config, ts.pair.left, ts.pair.right);
    const StereoPrediction pred = predict_stereo(model.config, ev, model.stereo);
    const Box& cube = std::get<Box>(ts.scene.primitives[0]);
    const double half = cube.half_extents.x(), zf = cube.center.z() - half;
    const int v0 = int(std::ceil(rig.cy + rig.focal_px * (cube.center.y() - 0.6 * half) / zf));
    const int v1 = int(std::floor(rig.cy + rig.focal_px * (cube.center.y() + 0.6 * half) / zf));
    BackSurface out;
    std::vector<double> depths;
    for (double edge : {cube.center.x() - half, cube.center.x() + half}) {
        const double u_edge = std::round(rig.cx + rig.focal_px * edge / zf);
        for (int du = -8; du <= 8; ++du)
            for (int v = v0; v <= v1; v += 2) {
                std::vector<Vec3> ray;
                for (double z = cfg.grid.box_min.z(); z <= cfg.grid.box_max.z(); z += 0.001)
                    ray.push_back(backproject(u_edge + du, v, z, rig));
                const auto occ = predict_occupancy(model, ev, pred, nullptr, ray);
                ++out.rays;
                const auto last = std::find_if(occ.rbegin(), occ.rend(), [](double o) { return o >= 0.5; });
                if (last == occ.rend()) {
                    ++out.empty;
                    continue;
                }
                depths.push_back(ray[std::size_t(occ.rend() - last - 1)].z());
            }
    }
    if (depths.empty()) return out;
    for (double d : depths) out.mean += d;
    out.mean /= double(depths.size());
    for (double d : depths) out.variance += (d - out.mean) * (d - out.mean);
    out.variance /= double(depths.size());
    return out;
}

Outcome psi_ablation() {
    const PipelineConfig cfg;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrainingScene> train;
    for (int i = 0; i < 8; ++i) {
        SdfScene s = two_layer_scene(-0.06 + 0.12 * u(rng), -0.06 + 0.12 * u(rng), 0.44 + 0.04 * u(rng),
                                     0.025 + 0.01 * u(rng));
        s.light = random_light(cfg.scenes, rng);
        train.push_back({s, render_quantized(s, cfg)});
    }
    const SdfScene eval_scene = two_layer_scene(0.0, 0.0, 0.46, 0.03);
    const TrainingScene probe{eval_scene, render_quantized(eval_scene, cfg)};

    // Both variants share stage 1; only the z-offset encoding differs.
    TrainState with_psi = init_training(cfg);
    train_two_stage(with_psi, train, cfg, cfg.train.stage1_epochs);
    TrainState raw = with_psi;
    PipelineConfig raw_cfg = cfg;
    raw_cfg.model.features.use_psi = false;
    raw.model.config.features.use_psi = false;
    train_two_stage(with_psi, train, cfg);
    train_two_stage(raw, train, raw_cfg);

    const BackSurface a = back_surface(with_psi.model, cfg, probe);
    const BackSurface b = back_surface(raw.model, raw_cfg, probe);
    const double ratio = a.variance / b.variance;
    return {std::isfinite(ratio) && ratio < 1.0,
            fmt("back-surface depth variance with psi %.3e m^2 (mean %.3f m), raw z-offset %.3e m^2 (mean %.3f m), ",
                a.variance, a.mean, b.variance, b.mean) +
                fmt("ratio %.3f (< 1, true rear face at %.2f m); empty rays %.0f / %.0f", ratio, kSlabRear,
                    a.empty, b.empty) +
                fmt(" of %.0f", a.rays)};
}

// --- 10 --------------------------------------------------------------------

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
    std::size_t count_b = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
    if (names.size() != count_b) {
        why = "file counts differ";
        return false;
    }
    for (const auto& n : names)
        if (read_text_file((a / n).string()) != read_text_file((b / n).string())) {
            why = n + " differs";
            return false;
        }
    return true;
}

Outcome determinism() {
    PipelineConfig cfg;
    cfg.scene_count = 3;
    cfg.train.stage1_epochs = 2;
    cfg.train.stage2_epochs = 2;
    TempDir dir("determinism");
    cmd_gen(cfg, dir.file("gen1"));
    cmd_gen(cfg, dir.file("gen2"));
    std::string why_gen = "identical", why_train = "identical";
    const bool gen_ok = same_tree(dir.file("gen1"), dir.file("gen2"), why_gen);
    cmd_train(cfg, dir.file("gen1"), dir.file("train1"));
    cmd_train(cfg, dir.file("gen1"), dir.file("train2"));
    const bool train_ok = same_tree(dir.file("train1"), dir.file("train2"), why_train);
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.file("gen1"))) ++files;
    std::ostringstream os;
    os << "gen (" << files << " files): " << why_gen << "; train (model.ckpt, train_log.csv): " << why_train;
    return {gen_ok && train_ok, os.str()};
}

}  // namespace

int main() {
    criterion(1, "psi_t odd symmetry, value and monotonicity", 1.0, psi_suite);
    criterion(2, "cost volume equals triple-loop oracle", 1.0, cost_volume_oracle);
    criterion(3, "soft-argmax equals brute-force expectation", 1.0, soft_argmax_oracle);
    criterion(4, "analytic gradients match central differences", 30.0, gradient_check);
    criterion(5, "geometry round trips", 1.0, geometry_round_trips);
    criterion(6, "renderer depth/disparity consistency", 60.0, renderer_consistency);
    criterion(7, "marching-cubes sphere", 30.0, marching_cubes_sphere);
    criterion(8, "desk-scale end-to-end", 1800.0, desk_end_to_end);
    criterion(9, "psi_t ablation on a two-layer scene", 1800.0, psi_ablation);
    criterion(10, "gen/train determinism", 600.0, determinism);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
