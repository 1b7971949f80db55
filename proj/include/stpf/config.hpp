#pragma once

#include "stpf/implicit_model.hpp"
#include "stpf/mesh.hpp"
#include "stpf/model.hpp"
#include "stpf/sampling.hpp"
#include "stpf/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stpf {

/// Random similarity applied to a training scene each epoch.
struct AugmentConfig {
    bool enabled = true;       // stage 2
    bool stage1 = false;       // stereo matching gains little from it
    double translate_m = 0.02;
    double rotate_deg = 20.0;
    double scale_min = 0.9;
    double scale_max = 1.1;
};

struct TrainConfig {
    int stage1_epochs = 4;
    int stage2_epochs = 40;
    AdamConfig stereo_adam{10.0, 0.9, 0.999, 1e-8, 1e-4, 0.1, 10};
    AdamConfig occupancy_adam{1e-3, 0.9, 0.999, 1e-8, 1e-4, 0.1, 25};
    int batch_size = 256;
    bool predicted_depth = true;   // z-offset from E (true) or ground-truth depth
    bool single_precision = true;
    LossWeights loss;
    AugmentConfig augment;
};

struct PipelineConfig {
    ModelConfig model;
    SampleConfig sampling;
    SceneRanges scenes;
    int scene_count = 10;
    std::vector<std::string> scene_files;  // explicit scenes replace random ones
    RenderConfig render;
    TrainConfig train;
    ReconGrid grid;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    /// Throws ConfigError describing the first inconsistency.
    void validate() const;
};

/// Parses flat `key = value` text grouped by `[section]` headers. Unknown
/// keys and malformed values are rejected with the offending line number.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);
/// Full listing of every key; parse_config(format_config(c)) == c.
std::string format_config(const PipelineConfig& config);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace stpf
