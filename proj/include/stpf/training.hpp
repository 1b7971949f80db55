#pragma once

#include "stpf/config.hpp"
#include "stpf/implicit_model.hpp"
#include "stpf/model.hpp"
#include "stpf/scene.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace stpf {

/// One training example: the analytic scene plus its (8-bit) rendering.
struct TrainingScene {
    SdfScene scene;
    RenderedPair pair;
};

/// Renders `scene` and quantizes both views to 8 bits.
RenderedPair render_quantized(const SdfScene& scene, const PipelineConfig& config);

/// `loss` is measured after the epoch on the stored training scenes: the
/// disparity loss in stage 1, the mean BCE on fixed probe queries in stage 2.
struct EpochLog {
    int stage = 1;
    int epoch = 1;  // 1-based within the stage
    double loss = 0.0;
};

/// Resumable training state. `stage`/`next_epoch` point at the epoch that
/// runs next (0-based within the stage).
struct TrainState {
    OccupancyModel model;
    AdamState stereo_adam;
    AdamState occupancy_adam;
    int stage = 1;
    int next_epoch = 0;
    std::vector<EpochLog> log;

    bool finished(const TrainConfig& cfg) const;
};

TrainState init_training(const PipelineConfig& config);

/// Runs epochs until training finishes or `epoch_budget` epochs have run
/// (negative = unlimited). Each epoch draws its randomness from
/// (seed, stage, epoch) alone, so stopping and resuming reproduces the
/// uninterrupted run. Throws NumericError on a non-finite loss.
void train_two_stage(TrainState& state, const std::vector<TrainingScene>& scenes, const PipelineConfig& config,
                     int epoch_budget = -1, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Random similarity about the scene's bounding-box center, clamped so the
/// result still fits the scene box.
SdfScene augment_scene(const SdfScene& scene, const PipelineConfig& config, std::mt19937_64& rng);

/// Median absolute disparity error over pixels valid in both maps.
double median_disparity_error(const DisparityMap& pred, const DisparityMap& gt);

/// Deterministic 64-bit stream seed from a base seed and tags.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace stpf
