#pragma once

#include "stpf/params.hpp"
#include "stpf/volumes.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace stpf {

// ---------------------------------------------------------------------------
// Occupancy MLP: leaky hidden layers, sigmoid output.

struct MlpShape {
    std::vector<int> widths;  // input, hidden..., 1
    double leaky_slope = 0.01;

    int input_width() const { return widths.front(); }
    int layers() const { return int(widths.size()) - 1; }
    void validate() const;
};

/// Adds "mlp.w<i>" (out x in, row-major) and "mlp.b<i>" blocks with
/// He-style random weights and zero biases.
void add_mlp_params(ParamSet& params, const MlpShape& shape, std::uint64_t seed);

/// Per-layer pre-activations and activations kept for the backward pass.
struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;  // layer inputs, one column per sample
    std::vector<Eigen::MatrixXd> pre;     // pre-activations
};

/// Output logits for a batch given as columns of `x`.
Eigen::RowVectorXd mlp_logits(const ParamSet& params, const MlpShape& shape, const Eigen::MatrixXd& x,
                              MlpCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns d(loss)/d(input).
Eigen::MatrixXd mlp_backward(const ParamSet& params, const MlpShape& shape, const MlpCache& cache,
                             const Eigen::RowVectorXd& grad_logits, ParamSet& grads);

/// Occupancy of a single feature vector, strictly inside (0, 1).
double mlp_forward(const ParamSet& params, const MlpShape& shape, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Losses.

double sigmoid(double z);

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross entropy of probabilities (clamped to [eps, 1 - eps]).
double bce_loss(std::span<const double> pred, std::span<const double> label);

/// Mean binary cross entropy evaluated from logits; writes d(loss)/d(logit).
double bce_with_logits(const Eigen::RowVectorXd& logits, std::span<const double> label,
                       Eigen::RowVectorXd* grad = nullptr);

double smooth_l1(double x);
double smooth_l1_grad(double x);

/// Weights of the multi-scale disparity loss, finest scale first.
struct LossWeights {
    std::vector<double> lambdas{1.0, 1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0};
};

/// Average pooling by 2^level over valid pixels; a block is valid when it
/// holds at least one valid pixel.
DisparityMap pool_disparity(const DisparityMap& full, int level);

/// Sum over scales of lambda * mean smooth-L1 error. `pred_pyramid[w]` must
/// have the shape of the ground truth pooled to level w; pixels invalid on
/// either side are skipped and an empty scale contributes zero.
double disparity_loss(const std::vector<DisparityMap>& pred_pyramid, const DisparityMap& gt,
                      const LossWeights& weights);

/// Same loss built from a full-resolution prediction restricted to the
/// ground-truth support, with its gradient w.r.t. every prediction pixel.
double disparity_loss_full(const DisparityMap& pred, const DisparityMap& gt, const LossWeights& weights,
                           std::vector<double>* grad = nullptr);

// ---------------------------------------------------------------------------
// Adam with decoupled weight decay and step-wise learning-rate decay.

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double decay_factor = 0.1;
    int decay_every = 10;  // epochs; <= 0 disables the schedule
};

struct AdamState {
    ParamSet m;
    ParamSet v;
    std::int64_t step = 0;

    static AdamState like(const ParamSet& params);
    bool operator==(const AdamState& o) const { return step == o.step && m == o.m && v == o.v; }
};

double scheduled_lr(const AdamConfig& cfg, int epoch);

/// One update. With `single_precision`, parameters and moments are rounded
/// to float afterwards so checkpoints in f32 are lossless.
void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads, const AdamConfig& cfg, int epoch,
               bool single_precision = true);

}  // namespace stpf
