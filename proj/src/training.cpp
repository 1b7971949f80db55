#include "stpf/training.hpp"

#include "stpf/error.hpp"
#include "stpf/sampling.hpp"
#include "stpf/tensor_io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

namespace stpf {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // splitmix64 over the tags
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    h = mix(h ^ a);
    h = mix(h ^ b);
    return mix(h ^ c);
}

RenderedPair render_quantized(const SdfScene& scene, const PipelineConfig& config) {
    RenderedPair pair = render_stereo(scene, config.model.rig, config.render);
    pair.left = quantize_8bit(pair.left);
    pair.right = quantize_8bit(pair.right);
    return pair;
}

bool TrainState::finished(const TrainConfig& cfg) const {
    return stage > 2 || (stage == 2 && next_epoch >= cfg.stage2_epochs);
}

TrainState init_training(const PipelineConfig& config) {
    config.validate();
    TrainState s;
    s.model = OccupancyModel::create(config.model, derive_seed(config.seed, 0x6d6f64656cull));
    s.stereo_adam = AdamState::like(s.model.stereo);
    s.occupancy_adam = AdamState::like(s.model.occupancy);
    if (config.train.stage1_epochs == 0) s.stage = 2;
    return s;
}

namespace {

bool fits(const SdfScene& scene, const PipelineConfig& config) {
    Vec3 lo, hi;
    scene_bounds(scene, lo, hi);
    const auto& box = config.scenes;
    if ((lo - box.box_min).minCoeff() < 0.0 || (box.box_max - hi).minCoeff() < 0.0) return false;
    const auto& rig = config.model.rig;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(), (corner & 4) ? hi.z() : lo.z());
        for (const Vec2& uv : {project_left(p, rig), project_right(p, rig)})
            if (uv.x() < 0.0 || uv.y() < 0.0 || uv.x() > rig.width - 1.0 || uv.y() > rig.height - 1.0) return false;
    }
    return true;
}

}  // namespace

SdfScene augment_scene(const SdfScene& scene, const PipelineConfig& config, std::mt19937_64& rng) {
    const auto& aug = config.train.augment;
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> scale_dist(aug.scale_min, aug.scale_max);
    Vec3 lo, hi;
    scene_bounds(scene, lo, hi);
    const Vec3 pivot = 0.5 * (lo + hi);
    constexpr double kPi = 3.14159265358979323846;
    for (int attempt = 0; attempt < 32; ++attempt) {
        Vec3 axis(uni(rng), uni(rng), uni(rng));
        if (axis.norm() < 1e-6) axis = Vec3::UnitY();
        const double angle = uni(rng) * aug.rotate_deg * kPi / 180.0;
        const Eigen::Matrix3d R = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
        const Vec3 t(uni(rng) * aug.translate_m, uni(rng) * aug.translate_m, uni(rng) * aug.translate_m);
        const double s = scale_dist(rng);
        SdfScene out = transform_scene(scene, R, t, s, pivot);
        if (fits(out, config)) return out;
    }
    return scene;
}

double median_disparity_error(const DisparityMap& pred, const DisparityMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width) throw DimensionError("median_disparity_error: shape mismatch");
    std::vector<double> err;
    for (std::size_t i = 0; i < gt.values.size(); ++i)
        if (pred.valid[i] && gt.valid[i]) err.push_back(std::abs(pred.values[i] - gt.values[i]));
    if (err.empty()) return std::numeric_limits<double>::quiet_NaN();
    auto mid = err.begin() + std::ptrdiff_t(err.size() / 2);
    std::nth_element(err.begin(), mid, err.end());
    if (err.size() % 2 == 1) return *mid;
    const double upper = *mid;
    return 0.5 * (upper + *std::max_element(err.begin(), mid));
}

namespace {

struct Prepared {
    SdfScene scene;
    RenderedPair pair;
    StereoEvidence evidence;
};

void require_finite(double loss, int stage, int epoch, std::size_t scene) {
    if (std::isfinite(loss)) return;
    std::ostringstream msg;
    msg << "non-finite loss in stage " << stage << ", epoch " << epoch + 1 << ", scene " << scene
        << "; lower the learning rate or check the input data";
    throw NumericError(msg.str());
}

constexpr std::uint64_t kProbeTag = 0x70726f6265ull;

}  // namespace

void train_two_stage(TrainState& state, const std::vector<TrainingScene>& scenes, const PipelineConfig& config,
                     int epoch_budget, const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (scenes.empty()) throw DataError("training needs at least one scene");
    const TrainConfig& tc = config.train;
    const ModelConfig& mc = state.model.config;

    // Evidence of the stored (unaugmented) scenes is parameter-free and reused.
    std::vector<std::optional<Prepared>> base(scenes.size());
    auto stored = [&](std::size_t i) -> const Prepared& {
        if (!base[i]) base[i] = Prepared{scenes[i].scene, scenes[i].pair,
                                         prepare_evidence(mc, scenes[i].pair.left, scenes[i].pair.right)};
        return *base[i];
    };
    auto augmented = [&](std::size_t i, std::mt19937_64& rng) {
        Prepared p;
        p.scene = augment_scene(scenes[i].scene, config, rng);
        p.pair = render_quantized(p.scene, config);
        p.evidence = prepare_evidence(mc, p.pair.left, p.pair.right);
        return p;
    };
    // Stage-2 stereo outputs of the stored scenes (the stereo head is frozen).
    std::vector<std::optional<StereoPrediction>> frozen(scenes.size());
    auto frozen_prediction = [&](std::size_t i) -> const StereoPrediction& {
        if (!frozen[i]) frozen[i] = predict_stereo(mc, stored(i).evidence, state.model.stereo);
        return *frozen[i];
    };
    // Fixed probe queries: the logged stage-2 loss is measured on them after
    // every epoch, so epochs are compared on identical data.
    std::vector<std::optional<QueryBatch>> probes(scenes.size());
    auto probe = [&](std::size_t i) -> const QueryBatch& {
        if (!probes[i]) {
            std::mt19937_64 rng(derive_seed(config.seed, kProbeTag, i));
            const auto surface = sample_surface_points(scenes[i].scene, config.sampling.surface_count, rng);
            probes[i] = perturb_and_label(surface, scenes[i].scene, config.sampling, rng);
        }
        return *probes[i];
    };

    auto epoch_loss = [&](int stage) {
        double sum = 0.0, weight = 0.0;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            const Prepared& p = stored(i);
            if (stage == 1) {
                const StereoPrediction pred = predict_stereo(mc, p.evidence, state.model.stereo);
                sum += disparity_loss_and_grad(mc, p.evidence, pred, p.pair.disparity, tc.loss, nullptr);
                weight += 1.0;
            } else {
                const QueryBatch& q = probe(i);
                const DepthMap* depth = tc.predicted_depth ? nullptr : &p.pair.depth;
                const OccupancyLoss l = occupancy_loss_and_grad(state.model, p.evidence, frozen_prediction(i), depth,
                                                                q.points, q.labels, nullptr, nullptr);
                sum += l.loss * double(l.used);
                weight += double(l.used);
            }
        }
        return weight > 0.0 ? sum / weight : 0.0;
    };

    int ran = 0;
    while (!state.finished(tc) && (epoch_budget < 0 || ran < epoch_budget)) {
        if (state.stage == 1 && state.next_epoch >= tc.stage1_epochs) {
            state.stage = 2;
            state.next_epoch = 0;
            continue;
        }
        const int stage = state.stage;
        const int epoch = state.next_epoch;
        const bool augment = tc.augment.enabled && (stage == 2 || tc.augment.stage1);
        std::vector<std::size_t> order(scenes.size());
        std::iota(order.begin(), order.end(), std::size_t(0));
        std::mt19937_64 order_rng(derive_seed(config.seed, std::uint64_t(stage), std::uint64_t(epoch), 0xffffull));
        std::shuffle(order.begin(), order.end(), order_rng);

        for (std::size_t i : order) {
            std::mt19937_64 rng(derive_seed(config.seed, std::uint64_t(stage), std::uint64_t(epoch), i));
            std::optional<Prepared> fresh;
            if (augment) fresh = augmented(i, rng);
            const Prepared& p = fresh ? *fresh : stored(i);
            if (stage == 1) {
                const StereoPrediction pred = predict_stereo(mc, p.evidence, state.model.stereo);
                ParamSet grad = state.model.stereo.zeros_like();
                const double loss = disparity_loss_and_grad(mc, p.evidence, pred, p.pair.disparity, tc.loss, &grad);
                require_finite(loss, stage, epoch, i);
                adam_step(state.stereo_adam, state.model.stereo, grad, tc.stereo_adam, epoch, tc.single_precision);
                continue;
            }
            std::optional<StereoPrediction> fresh_pred;
            if (fresh) fresh_pred = predict_stereo(mc, p.evidence, state.model.stereo);
            const StereoPrediction& pred = fresh_pred ? *fresh_pred : frozen_prediction(i);
            const DepthMap* depth = tc.predicted_depth ? nullptr : &p.pair.depth;

            const auto surface = sample_surface_points(p.scene, config.sampling.surface_count, rng);
            const QueryBatch batch = perturb_and_label(surface, p.scene, config.sampling, rng);
            std::vector<std::size_t> idx(batch.points.size());
            std::iota(idx.begin(), idx.end(), std::size_t(0));
            std::shuffle(idx.begin(), idx.end(), rng);

            const std::size_t bs = std::size_t(tc.batch_size);
            for (std::size_t b0 = 0; b0 < idx.size(); b0 += bs) {
                const std::size_t b1 = std::min(idx.size(), b0 + bs);
                std::vector<Vec3> pts;
                std::vector<double> labels;
                for (std::size_t k = b0; k < b1; ++k) {
                    pts.push_back(batch.points[idx[k]]);
                    labels.push_back(batch.labels[idx[k]]);
                }
                ParamSet grad = state.model.occupancy.zeros_like();
                const OccupancyLoss l =
                    occupancy_loss_and_grad(state.model, p.evidence, pred, depth, pts, labels, &grad, nullptr);
                if (l.used == 0) continue;
                require_finite(l.loss, stage, epoch, i);
                adam_step(state.occupancy_adam, state.model.occupancy, grad, tc.occupancy_adam, epoch,
                          tc.single_precision);
            }
        }
        if (!state.model.stereo.all_finite() || !state.model.occupancy.all_finite())
            throw NumericError("non-finite parameters after stage " + std::to_string(stage) + " epoch " +
                               std::to_string(epoch + 1));
        const EpochLog entry{stage, epoch + 1, epoch_loss(stage)};
        require_finite(entry.loss, stage, epoch, 0);
        state.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        ++state.next_epoch;
        ++ran;
        if (state.stage == 1 && state.next_epoch >= tc.stage1_epochs) {
            state.stage = 2;
            state.next_epoch = 0;
        }
    }
}

}  // namespace stpf
