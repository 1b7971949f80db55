#include "stpf/pipeline.hpp"

#include "stpf/error.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace stpf {

namespace {

std::string scene_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03zu", i);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<SdfScene> generate_scenes(const PipelineConfig& config) {
    std::vector<SdfScene> scenes;
    if (!config.scene_files.empty()) {
        for (const auto& path : config.scene_files) scenes.push_back(parse_scene(read_text_file(path)));
    } else {
        for (int i = 0; i < config.scene_count; ++i) {
            std::mt19937_64 rng(derive_seed(config.seed, 0x7363656e65ull, std::uint64_t(i)));
            scenes.push_back(random_scene(config.scenes, config.model.rig, rng));
        }
    }
    for (auto& s : scenes) s = parse_scene(format_scene(s));
    return scenes;
}

std::vector<std::string> cmd_gen(const PipelineConfig& config, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    const auto scenes = generate_scenes(config);
    std::vector<std::string> written;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string name = scene_name(i);
        const RenderedPair pair = render_quantized(scenes[i], config);
        const fs::path dir(out_dir);
        write_text_file((dir / (name + "_scene.txt")).string(), format_scene(scenes[i]));
        save_pgm(pair.left, (dir / (name + "_l.pgm")).string());
        save_pgm(pair.right, (dir / (name + "_r.pgm")).string());
        save_tensor(map_to_tensor(pair.depth), (dir / (name + "_depth.t32")).string());
        save_tensor(map_to_tensor(pair.disparity), (dir / (name + "_disp.t32")).string());
        for (const char* suffix : {"_scene.txt", "_l.pgm", "_r.pgm", "_depth.t32", "_disp.t32"})
            written.push_back(name + suffix);
    }
    std::string manifest;
    for (const auto& f : written) manifest += f + "\n";
    write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest);
    return written;
}

std::vector<TrainingScene> load_dataset(const std::string& data_dir) {
    if (!fs::is_directory(data_dir)) throw DataError("data directory not found: " + data_dir);
    const fs::path manifest = fs::path(data_dir) / "manifest.txt";
    if (!fs::exists(manifest)) throw DataError("no manifest.txt in " + data_dir + " (run `gen` first)");
    std::istringstream in(read_text_file(manifest.string()));
    std::vector<TrainingScene> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!ends_with(line, "_scene.txt")) continue;
        const std::string name = line.substr(0, line.size() - std::string("_scene.txt").size());
        const fs::path dir(data_dir);
        TrainingScene ts;
        ts.scene = parse_scene(read_text_file((dir / line).string()));
        ts.pair.left = load_pgm((dir / (name + "_l.pgm")).string());
        ts.pair.right = load_pgm((dir / (name + "_r.pgm")).string());
        ts.pair.depth = tensor_to_depth(load_tensor((dir / (name + "_depth.t32")).string()));
        ts.pair.disparity = tensor_to_disparity(load_tensor((dir / (name + "_disp.t32")).string()));
        out.push_back(std::move(ts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void add_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState& s) {
    add_params(ckpt, prefix + "m.", s.m);
    add_params(ckpt, prefix + "v.", s.v);
}

void read_adam(const Checkpoint& ckpt, const std::string& prefix, AdamState& s) {
    read_params(ckpt, prefix + "m.", s.m);
    read_params(ckpt, prefix + "v.", s.v);
}

}  // namespace

Checkpoint make_checkpoint(const TrainState& state, const PipelineConfig& config) {
    Checkpoint ckpt;
    std::ostringstream h;
    const MlpShape shape = state.model.config.mlp_shape();
    h << "widths";
    for (int w : shape.widths) h << ' ' << w;
    h << "\nstage " << state.stage << "\nnext_epoch " << state.next_epoch << "\nadam_steps "
      << state.stereo_adam.step << ' ' << state.occupancy_adam.step << '\n';
    for (const auto& e : state.log) h << "log " << e.stage << ' ' << e.epoch << ' ' << format_double(e.loss) << '\n';
    h << "config\n";
    std::istringstream cfg(format_config(config));
    std::string line;
    while (std::getline(cfg, line))
        if (!line.empty()) h << "  " << line << '\n';
    ckpt.header = h.str();
    add_params(ckpt, "stereo.", state.model.stereo);
    add_params(ckpt, "occupancy.", state.model.occupancy);
    add_adam(ckpt, "adam.stereo.", state.stereo_adam);
    add_adam(ckpt, "adam.occupancy.", state.occupancy_adam);
    return ckpt;
}

TrainState restore_checkpoint(const Checkpoint& ckpt, PipelineConfig& config) {
    std::istringstream in(ckpt.header);
    std::string line, cfg_text;
    int stage = 1, next_epoch = 0;
    std::int64_t steps[2] = {0, 0};
    std::vector<EpochLog> log;
    while (std::getline(in, line)) {
        if (line.rfind("  ", 0) == 0) {
            cfg_text += line.substr(2) + '\n';
            continue;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "stage") ls >> stage;
        else if (key == "next_epoch") ls >> next_epoch;
        else if (key == "adam_steps") ls >> steps[0] >> steps[1];
        else if (key == "log") {
            EpochLog e;
            std::string loss;
            ls >> e.stage >> e.epoch >> loss;
            e.loss = std::stod(loss);
            log.push_back(e);
        }
        if (!ls && key != "config" && key != "widths") throw DataError("checkpoint: malformed header line '" + line + "'");
    }
    config = parse_config(cfg_text);
    TrainState s;
    s.model = OccupancyModel::create(config.model, 0);
    read_params(ckpt, "stereo.", s.model.stereo);
    read_params(ckpt, "occupancy.", s.model.occupancy);
    s.stereo_adam = AdamState::like(s.model.stereo);
    s.occupancy_adam = AdamState::like(s.model.occupancy);
    read_adam(ckpt, "adam.stereo.", s.stereo_adam);
    read_adam(ckpt, "adam.occupancy.", s.occupancy_adam);
    s.stereo_adam.step = steps[0];
    s.occupancy_adam.step = steps[1];
    s.stage = stage;
    s.next_epoch = next_epoch;
    s.log = std::move(log);
    return s;
}

LoadedModel load_model(const std::string& checkpoint_path) {
    LoadedModel lm;
    TrainState s = restore_checkpoint(load_checkpoint(checkpoint_path), lm.config);
    lm.model = std::move(s.model);
    return lm;
}

std::string format_train_log(const std::vector<EpochLog>& log) {
    std::string out = "epoch,stage,loss\n";
    for (const auto& e : log)
        out += std::to_string(e.epoch) + "," + std::to_string(e.stage) + "," + format_double(e.loss) + "\n";
    return out;
}

TrainState cmd_train(const PipelineConfig& config, const std::string& data_dir, const std::string& out_dir,
                     const TrainOptions& options) {
    const auto scenes = load_dataset(data_dir);
    if (scenes.empty()) throw DataError("data directory " + data_dir + " holds no scenes");
    PipelineConfig cfg = config;
    TrainState state;
    if (!options.resume.empty()) {
        state = restore_checkpoint(load_checkpoint(options.resume), cfg);
    } else {
        state = init_training(cfg);
    }
    ensure_dir(out_dir);
    train_two_stage(state, scenes, cfg, options.epoch_budget, [&](const EpochLog& e) {
        if (options.verbose)
            std::cerr << "stage " << e.stage << " epoch " << e.epoch << " loss " << format_double(e.loss) << '\n';
    });
    save_checkpoint(make_checkpoint(state, cfg), (fs::path(out_dir) / "model.ckpt").string());
    write_text_file((fs::path(out_dir) / "train_log.csv").string(), format_train_log(state.log));
    return state;
}

// ---------------------------------------------------------------------------
// Inference

Reconstruction reconstruct(const OccupancyModel& model, const Image& left, const Image& right, const ReconGrid& grid,
                           const DepthMap* depth_override) {
    Reconstruction r;
    const StereoEvidence ev = prepare_evidence(model.config, left, right);
    r.stereo = predict_stereo(model.config, ev, model.stereo);
    const Lattice lat = evaluate_field(
        [&](std::span<const Vec3> pts, std::span<double> out) {
            const auto occ = predict_occupancy(model, ev, r.stereo, depth_override, pts);
            std::copy(occ.begin(), occ.end(), out.begin());
        },
        grid, 0.0);
    r.mesh = marching_cubes(lat, grid.iso);
    return r;
}

Reconstruction cmd_reconstruct(const std::string& model_path, const std::string& left_pgm,
                               const std::string& right_pgm, const ReconGrid& grid, const std::string& out_dir,
                               const ReconstructOptions& options) {
    const LoadedModel lm = load_model(model_path);
    const Image left = load_pgm(left_pgm), right = load_pgm(right_pgm);
    const auto& rig = lm.model.config.rig;
    if (left.width != rig.width || left.height != rig.height || right.width != rig.width || right.height != rig.height)
        throw DataError("stereo pair size does not match the model's rig");
    Reconstruction r;
    if (options.oracle_scene) {
        const SdfScene scene = parse_scene(read_text_file(*options.oracle_scene));
        const StereoEvidence ev = prepare_evidence(lm.model.config, left, right);
        r.stereo = predict_stereo(lm.model.config, ev, lm.model.stereo);
        const Lattice lat = evaluate_field(
            [&](std::span<const Vec3> pts, std::span<double> out) {
                for (std::size_t i = 0; i < pts.size(); ++i) out[i] = double(occupancy_oracle(scene, pts[i]));
            },
            grid, 0.0);
        r.mesh = marching_cubes(lat, grid.iso);
    } else if (options.gt_depth) {
        const DepthMap depth = tensor_to_depth(load_tensor(*options.gt_depth));
        r = reconstruct(lm.model, left, right, grid, &depth);
    } else {
        r = reconstruct(lm.model, left, right, grid);
    }
    ensure_dir(out_dir);
    save_obj(r.mesh, (fs::path(out_dir) / "recon.obj").string());
    save_tensor(map_to_tensor(r.stereo.depth), (fs::path(out_dir) / "depth_pred.t32").string());
    if (r.mesh.empty()) {
        r.warned_empty = true;
        std::cerr << "warning: reconstruction is empty; the grid may lie outside the stereo frustum\n";
    }
    return r;
}

TriangleMesh mesh_scene(const SdfScene& scene, int resolution) {
    Vec3 lo, hi;
    scene_bounds(scene, lo, hi);
    const Vec3 margin = Vec3::Constant(0.02 + 2.0 * (hi - lo).maxCoeff() / resolution);
    return mesh_implicit([&](const Vec3& p) { return -sdf_eval(scene, p); }, lo - margin, hi + margin, resolution);
}

TriangleMesh load_ground_truth(const std::string& path) {
    if (ends_with(path, ".obj")) return load_obj(path);
    return mesh_scene(parse_scene(read_text_file(path)));
}

std::string format_metrics_report(const SurfaceMetrics& m) {
    std::ostringstream os;
    os << "# surface metrics, centimeters\n"
       << "p2s (recon -> gt): " << format_double(m.p2s_cm) << "\n"
       << "reverse (gt -> recon): " << format_double(m.reverse_cm) << "\n"
       << "chamfer: " << format_double(m.chamfer_cm) << "\n"
       << format_metrics_line(m) << "\n";
    return os.str();
}

SurfaceMetrics cmd_eval(const std::string& recon_obj, const std::string& ground_truth, const std::string& out_report) {
    const TriangleMesh recon = load_obj(recon_obj);
    if (recon.empty()) throw DataError("reconstruction " + recon_obj + " has no triangles");
    const TriangleMesh gt = load_ground_truth(ground_truth);
    if (gt.empty()) throw DataError("ground truth " + ground_truth + " has no triangles");
    const SurfaceMetrics m = chamfer(recon, gt);
    const fs::path parent = fs::path(out_report).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    write_text_file(out_report, format_metrics_report(m));
    return m;
}

Grid2<float> normal_map(const DepthMap& depth, const RectifiedRig& rig) {
    const int H = depth.height, W = depth.width;
    Grid2<float> n(3, H, W);
    auto point = [&](int y, int x, Vec3& p) {
        if (x < 0 || y < 0 || x >= W || y >= H) return false;
        const std::size_t i = std::size_t(y) * W + x;
        if (!depth.valid[i]) return false;
        p = backproject(x, y, depth.values[i], rig);
        return true;
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Vec3 c, a, b;
            if (!point(y, x, c)) continue;
            // Central difference where both neighbours exist, one-sided otherwise.
            Vec3 du, dv;
            if (point(y, x + 1, a) && point(y, x - 1, b)) du = a - b;
            else if (point(y, x + 1, a)) du = a - c;
            else if (point(y, x - 1, b)) du = c - b;
            else continue;
            if (point(y + 1, x, a) && point(y - 1, x, b)) dv = a - b;
            else if (point(y + 1, x, a)) dv = a - c;
            else if (point(y - 1, x, b)) dv = c - b;
            else continue;
            Vec3 nn = du.cross(dv);
            if (nn.norm() == 0.0) continue;
            nn.normalize();
            if (nn.dot(c) > 0.0) nn = -nn;
            for (int k = 0; k < 3; ++k) n.at(k, y, x) = float(nn[k]);
        }
    return n;
}

StereoPrediction cmd_depth(const std::string& model_path, const std::string& left_pgm, const std::string& right_pgm,
                           const std::string& out_dir) {
    const LoadedModel lm = load_model(model_path);
    const Image left = load_pgm(left_pgm), right = load_pgm(right_pgm);
    const StereoEvidence ev = prepare_evidence(lm.model.config, left, right);
    StereoPrediction pred = predict_stereo(lm.model.config, ev, lm.model.stereo);
    ensure_dir(out_dir);
    const fs::path dir(out_dir);
    save_tensor(map_to_tensor(pred.disparity), (dir / "disparity.t32").string());
    save_tensor(map_to_tensor(pred.depth), (dir / "depth.t32").string());
    save_tensor(grid_to_tensor(normal_map(pred.depth, lm.model.config.rig)), (dir / "normals.t32").string());
    return pred;
}

}  // namespace stpf
