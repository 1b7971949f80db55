#pragma once

#include "stpf/config.hpp"
#include "stpf/mesh.hpp"
#include "stpf/tensor_io.hpp"
#include "stpf/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stpf {

/// Scene description used by `gen`: explicit files from the config, or
/// random scenes drawn from the seed. Every scene passes through its text
/// form so the rendering matches the saved description exactly.
std::vector<SdfScene> generate_scenes(const PipelineConfig& config);

/// Writes `<name>_l.pgm`, `_r.pgm`, `_depth.t32`, `_disp.t32`, `_scene.txt`
/// per scene plus `manifest.txt` listing those files. Returns the manifest
/// entries.
std::vector<std::string> cmd_gen(const PipelineConfig& config, const std::string& out_dir);

/// Reads a directory written by cmd_gen.
std::vector<TrainingScene> load_dataset(const std::string& data_dir);

/// Checkpoint <-> training state. The header embeds the full configuration.
Checkpoint make_checkpoint(const TrainState& state, const PipelineConfig& config);
TrainState restore_checkpoint(const Checkpoint& ckpt, PipelineConfig& config);

struct LoadedModel {
    PipelineConfig config;
    OccupancyModel model;
};
LoadedModel load_model(const std::string& checkpoint_path);

std::string format_train_log(const std::vector<EpochLog>& log);

struct TrainOptions {
    std::string resume;    // checkpoint to continue from
    int epoch_budget = -1; // stop after this many epochs (for staged runs)
    bool verbose = false;
};

/// Trains and writes `model.ckpt` and `train_log.csv` into `out_dir`.
TrainState cmd_train(const PipelineConfig& config, const std::string& data_dir, const std::string& out_dir,
                     const TrainOptions& options = {});

struct ReconstructOptions {
    std::optional<std::string> oracle_scene;  // bypass the model with the analytic occupancy
    std::optional<std::string> gt_depth;      // z-offset from this depth map instead of E
};

struct Reconstruction {
    TriangleMesh mesh;
    StereoPrediction stereo;
    bool warned_empty = false;
};

/// Occupancy field of a trained model on a stereo pair.
Reconstruction reconstruct(const OccupancyModel& model, const Image& left, const Image& right, const ReconGrid& grid,
                           const DepthMap* depth_override = nullptr);

/// Writes `recon.obj` and `depth_pred.t32` into `out_dir`.
Reconstruction cmd_reconstruct(const std::string& model_path, const std::string& left_pgm,
                               const std::string& right_pgm, const ReconGrid& grid, const std::string& out_dir,
                               const ReconstructOptions& options = {});

/// Dense ground-truth mesh of an analytic scene.
TriangleMesh mesh_scene(const SdfScene& scene, int resolution = 256);

/// Loads a ground truth given as OBJ or as scene text (meshed internally).
TriangleMesh load_ground_truth(const std::string& path);

std::string format_metrics_report(const SurfaceMetrics& m);

/// Writes the report to `out_report` and returns the metrics.
SurfaceMetrics cmd_eval(const std::string& recon_obj, const std::string& ground_truth, const std::string& out_report);

/// Camera-space unit normals (3 x H x W) from depth gradients, facing the
/// camera; pixels without valid neighbours are zero.
Grid2<float> normal_map(const DepthMap& depth, const RectifiedRig& rig);

/// Writes `disparity.t32`, `depth.t32`, `normals.t32` into `out_dir`.
StereoPrediction cmd_depth(const std::string& model_path, const std::string& left_pgm, const std::string& right_pgm,
                           const std::string& out_dir);

}  // namespace stpf
