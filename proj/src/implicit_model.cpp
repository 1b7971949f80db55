#include "stpf/implicit_model.hpp"

#include "stpf/error.hpp"
#include "stpf/parallel.hpp"

#include <cmath>
#include <random>

namespace stpf {

MlpShape ModelConfig::mlp_shape() const {
    MlpShape s;
    s.widths.push_back(feature_width());
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(1);
    s.leaky_slope = leaky_slope;
    return s;
}

void ModelConfig::validate() const {
    rig.validate();
    strides.validate(rig);
    features.validate();
    if (descriptors.sigmas.empty()) throw ConfigError("model: descriptor bank needs at least one scale");
    if (smoothing_radius < 0) throw ConfigError("model: smoothing_radius must be >= 0");
    if (cost_channels < 1) throw ConfigError("model: cost_channels must be >= 1");
    mlp_shape().validate();
}

OccupancyModel OccupancyModel::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    OccupancyModel m;
    m.config = config;
    const int cin = config.input_channels();
    m.stereo.add("score.linear", {cin}, 0.0);
    m.stereo.add("score.quadratic", {cin}, config.score_quadratic_init);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(cin)));
    ParamBlock& w = m.occupancy.add("mix.weight", {config.cost_channels, cin});
    for (double& v : w.values) v = dist(rng);
    m.occupancy.add("mix.bias", {config.cost_channels});
    add_mlp_params(m.occupancy, config.mlp_shape(), rng());
    m.stereo.round_to_float();
    m.occupancy.round_to_float();
    return m;
}

ConfidenceScore OccupancyModel::score() const {
    return {stereo.values("score.linear"), stereo.values("score.quadratic")};
}

ChannelMix OccupancyModel::mix() const {
    return {config.input_channels(), config.cost_channels, occupancy.values("mix.weight"),
            occupancy.values("mix.bias")};
}

StereoEvidence prepare_evidence(const ModelConfig& config, const Image& left, const Image& right) {
    if (left.height != config.rig.height || left.width != config.rig.width || !left.same_shape(right))
        throw DimensionError("prepare_evidence: images do not match the rig");
    const int stride = config.strides.spatial_stride;
    StereoEvidence ev;
    ev.left_features = config.descriptors.compute(left, stride);
    ev.right_features = config.descriptors.compute(right, stride);
    ev.cost = build_cost_volume(ev.left_features, ev.right_features, config.strides.disparity_bins(),
                                config.strides.bin_shift(), config.strides);
    ev.smoothed = box_smooth(ev.cost.cost, config.smoothing_radius);
    ev.foreground = foreground_mask(left);
    return ev;
}

StereoPrediction predict_stereo(const ModelConfig& config, const StereoEvidence& evidence, const ParamSet& stereo) {
    StereoPrediction p;
    p.conf = confidence_volume(evidence.cost, {stereo.values("score.linear"), stereo.values("score.quadratic")});
    p.coarse = expected_disparity(p.conf);
    p.disparity = upsample_disparity(p.coarse, config.strides.spatial_stride, config.rig.height, config.rig.width);
    for (std::size_t i = 0; i < p.disparity.valid.size(); ++i)
        if (!evidence.foreground[i]) p.disparity.valid[i] = 0;
    p.depth = disparity_map_to_depth_map(p.disparity, config.rig);
    return p;
}

Volume4 aggregated_cost(const OccupancyModel& model, const StereoEvidence& evidence) {
    return aggregate_cost_volume(evidence.cost.cost, model.mix(), model.config.smoothing_radius);
}

void stereo_backward(const ModelConfig& config, const StereoEvidence& evidence, const StereoPrediction& prediction,
                     std::span<const double> grad_psi, std::span<const double> grad_disparity, ParamSet& grad_stereo) {
    const Grid4<double>& psi = prediction.conf.psi;
    const std::size_t plane = psi.plane();
    const std::size_t cells = psi.cells();
    const int D = psi.bins;

    // Full-resolution disparity -> coarse disparity (adjoint of the upsampling).
    std::vector<double> g_coarse(plane, 0.0);
    if (!grad_disparity.empty()) {
        const int H = config.rig.height, W = config.rig.width;
        const double inv = 1.0 / config.strides.spatial_stride;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const std::size_t i = std::size_t(y) * W + x;
                const double g = grad_disparity[i];
                if (g == 0.0 || !prediction.disparity.valid[i]) continue;
                const Stencil2 s = bilinear_stencil(psi.height, psi.width, y * inv, x * inv);
                for (int k = 0; k < 4; ++k) g_coarse[s.offset[k]] += s.weight[k] * g;
            }
    }

    const double ds = config.strides.disparity_stride;
    const std::size_t C = std::size_t(evidence.cost.cost.channels);
    auto g_lin = grad_stereo.values("score.linear");
    auto g_quad = grad_stereo.values("score.quadratic");
    std::vector<double> g_col(static_cast<std::size_t>(D));
    for (std::size_t p = 0; p < plane; ++p) {
        if (!prediction.conf.column_valid[p]) continue;
        double dot = 0.0;
        bool any = false;
        for (int d = 0; d < D; ++d) {
            const std::size_t k = std::size_t(d) * plane + p;
            double g = ds * d * g_coarse[p];
            if (!grad_psi.empty()) g += grad_psi[k];
            g_col[std::size_t(d)] = g;
            any = any || g != 0.0;
            dot += psi.data[k] * g;
        }
        if (!any) continue;
        for (int d = 0; d < D; ++d) {
            const std::size_t k = std::size_t(d) * plane + p;
            if (evidence.cost.masked[k]) continue;
            const double g_logit = psi.data[k] * (g_col[std::size_t(d)] - dot);
            if (g_logit == 0.0) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double v = evidence.cost.cost.data[c * cells + k];
                g_lin[c] += g_logit * v;
                g_quad[c] -= g_logit * v * v;
            }
        }
    }
}

double disparity_loss_and_grad(const ModelConfig& config, const StereoEvidence& evidence,
                               const StereoPrediction& prediction, const DisparityMap& gt,
                               const LossWeights& weights, ParamSet* grad_stereo) {
    std::vector<double> g;
    const double loss = disparity_loss_full(prediction.disparity, gt, weights, grad_stereo ? &g : nullptr);
    if (grad_stereo) stereo_backward(config, evidence, prediction, {}, g, *grad_stereo);
    return loss;
}

BatchFeatures gather_features(const OccupancyModel& model, const StereoEvidence& evidence,
                              const StereoPrediction& prediction, const DepthMap* depth,
                              std::span<const Vec3> points) {
    const ModelConfig& cfg = model.config;
    const DepthMap& e = depth ? *depth : prediction.depth;
    const int cin = cfg.input_channels();
    BatchFeatures b;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        if (!in_stereo_frustum(p, cfg.rig, cfg.strides)) continue;
        const Vec2 uv = project_left(p, cfg.rig);
        const Stencil2 taps = bilinear_stencil(e.height, e.width, uv.y(), uv.x());
        double ev = 0.0;
        bool ok = true;
        for (int k = 0; k < 4 && ok; ++k) {
            if (taps.weight[k] == 0.0) continue;
            ok = e.valid[taps.offset[k]] != 0;
            ev += taps.weight[k] * e.values[taps.offset[k]];
        }
        if (!ok) continue;
        b.active.push_back(i);
        b.depth_taps.push_back(taps);
        b.z_offset.push_back(p.z() - ev);
        b.voxel.push_back(trilinear_stencil(evidence.smoothed.bins, evidence.smoothed.height,
                                            evidence.smoothed.width, volume_coordinate(p, cfg.rig, cfg.strides)));
    }
    const auto n = Eigen::Index(b.active.size());
    b.x.resize(cfg.feature_width(), n);
    b.smoothed.resize(cin, n);
    const auto mix = model.mix();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        mix.weight.data(), mix.out, mix.in);
    Eigen::Map<const Eigen::VectorXd> bias(mix.bias.data(), mix.out);
    const std::size_t cells = evidence.smoothed.cells();
    const double stride = evidence.left_features.stride_px;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Vec3& p = points[b.active[std::size_t(j)]];
        const Vec2 uv = project_left(p, cfg.rig);
        b.x.col(j).head(cin) = bilinear_sample(evidence.left_features, uv / stride);
        const Stencil3& s = b.voxel[std::size_t(j)];
        for (int c = 0; c < cin; ++c) {
            const float* base = evidence.smoothed.data.data() + std::size_t(c) * cells;
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += s.weight[k] * double(base[s.offset[k]]);
            b.smoothed(c, j) = acc;
        }
        b.x.col(j).segment(cin, cfg.cost_channels) = w * b.smoothed.col(j) + bias;
        double conf = 0.0;
        for (int k = 0; k < 8; ++k) conf += s.weight[k] * prediction.conf.psi.data[s.offset[k]];
        b.x(cin + cfg.cost_channels, j) = conf;
        const double z = b.z_offset[std::size_t(j)];
        b.x(cin + cfg.cost_channels + 1, j) = cfg.features.use_psi ? psi_t(z, cfg.features.t) : z;
    }
    return b;
}

std::vector<double> predict_occupancy(const OccupancyModel& model, const StereoEvidence& evidence,
                                      const StereoPrediction& prediction, const DepthMap* depth,
                                      std::span<const Vec3> points) {
    std::vector<double> out(points.size(), 0.0);
    const MlpShape shape = model.config.mlp_shape();
    parallel_for(points.size(), 4096, [&](std::size_t begin, std::size_t end) {
        const BatchFeatures b = gather_features(model, evidence, prediction, depth, points.subspan(begin, end - begin));
        if (b.active.empty()) return;
        const Eigen::RowVectorXd logits = mlp_logits(model.occupancy, shape, b.x);
        for (std::size_t j = 0; j < b.active.size(); ++j)
            out[begin + b.active[j]] = sigmoid(logits[Eigen::Index(j)]);
    });
    return out;
}

OccupancyLoss occupancy_loss_and_grad(const OccupancyModel& model, const StereoEvidence& evidence,
                                      const StereoPrediction& prediction, const DepthMap* depth,
                                      std::span<const Vec3> points, std::span<const double> labels,
                                      ParamSet* grad_occupancy, ParamSet* grad_stereo) {
    if (points.size() != labels.size()) throw DimensionError("occupancy_loss: points/labels size mismatch");
    const ModelConfig& cfg = model.config;
    const MlpShape shape = cfg.mlp_shape();
    const BatchFeatures b = gather_features(model, evidence, prediction, depth, points);
    OccupancyLoss result;
    result.used = b.active.size();
    if (b.active.empty()) return result;

    std::vector<double> y(b.active.size());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = labels[b.active[j]];
    MlpCache cache;
    const Eigen::RowVectorXd logits = mlp_logits(model.occupancy, shape, b.x, &cache);
    Eigen::RowVectorXd g_logits;
    result.loss = bce_with_logits(logits, y, &g_logits);
    if (!grad_occupancy && !grad_stereo) return result;

    ParamSet scratch;
    ParamSet& g_occ = grad_occupancy ? *grad_occupancy : (scratch = model.occupancy.zeros_like());
    const Eigen::MatrixXd g_x = mlp_backward(model.occupancy, shape, cache, g_logits, g_occ);

    const int cin = cfg.input_channels();
    const int cout = cfg.cost_channels;
    // Channel mix.
    const Eigen::MatrixXd g_cost = g_x.middleRows(cin, cout);
    ParamBlock& gw = g_occ.block("mix.weight");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(gw.values.data(), cout, cin) +=
        g_cost * b.smoothed.transpose();
    ParamBlock& gb = g_occ.block("mix.bias");
    Eigen::Map<Eigen::VectorXd>(gb.values.data(), cout) += g_cost.rowwise().sum();

    if (!grad_stereo) return result;
    const Grid4<double>& psi = prediction.conf.psi;
    std::vector<double> g_psi(psi.cells(), 0.0);
    std::vector<double> g_disp;
    const bool through_depth = depth == nullptr;
    if (through_depth) g_disp.assign(std::size_t(cfg.rig.height) * cfg.rig.width, 0.0);
    for (std::size_t j = 0; j < b.active.size(); ++j) {
        const double g_conf = g_x(cin + cout, Eigen::Index(j));
        const Stencil3& s = b.voxel[j];
        for (int k = 0; k < 8; ++k) g_psi[s.offset[k]] += s.weight[k] * g_conf;
        if (!through_depth) continue;
        const double z = b.z_offset[j];
        const double dz = cfg.features.use_psi ? psi_t_derivative(z, cfg.features.t) : 1.0;
        const double g_e = -g_x(cin + cout + 1, Eigen::Index(j)) * dz;  // z = P_z - E
        const Stencil2& t = b.depth_taps[j];
        for (int k = 0; k < 4; ++k) {
            if (t.weight[k] == 0.0) continue;
            const double d = prediction.disparity.values[t.offset[k]];
            g_disp[t.offset[k]] += t.weight[k] * g_e * (-cfg.rig.bk() / (d * d));
        }
    }
    stereo_backward(cfg, evidence, prediction, g_psi, g_disp, *grad_stereo);
    return result;
}

}  // namespace stpf
