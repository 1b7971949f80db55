#include "stpf/model.hpp"

#include "stpf/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace stpf {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string weight_name(int layer) { return "mlp.w" + std::to_string(layer); }
std::string bias_name(int layer) { return "mlp.b" + std::to_string(layer); }

Eigen::Map<const RowMajor> weight_of(const ParamSet& params, int layer) {
    const ParamBlock& b = params.block(weight_name(layer));
    return {b.values.data(), b.shape[0], b.shape[1]};
}

Eigen::Map<const Eigen::VectorXd> bias_of(const ParamSet& params, int layer) {
    const ParamBlock& b = params.block(bias_name(layer));
    return {b.values.data(), Eigen::Index(b.values.size())};
}

}  // namespace

void MlpShape::validate() const {
    if (widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
    for (int w : widths)
        if (w < 1) throw ConfigError("mlp: layer widths must be positive");
    if (widths.back() != 1) throw ConfigError("mlp: output width must be 1");
}

void add_mlp_params(ParamSet& params, const MlpShape& shape, std::uint64_t seed) {
    shape.validate();
    std::mt19937_64 rng(seed);
    for (int l = 0; l < shape.layers(); ++l) {
        const int in = shape.widths[std::size_t(l)], out = shape.widths[std::size_t(l) + 1];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(in)));
        ParamBlock& w = params.add(weight_name(l), {out, in});
        for (double& v : w.values) v = dist(rng);
        params.add(bias_name(l), {out});
    }
}

Eigen::RowVectorXd mlp_logits(const ParamSet& params, const MlpShape& shape, const Eigen::MatrixXd& x,
                              MlpCache* cache) {
    if (x.rows() != shape.input_width())
        throw DimensionError("mlp: feature length " + std::to_string(x.rows()) + " != " +
                             std::to_string(shape.input_width()));
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Eigen::MatrixXd a = x;
    const int L = shape.layers();
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd z = weight_of(params, l) * a;
        z.colwise() += bias_of(params, l);
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(z);
        }
        if (l + 1 < L) {
            const double slope = shape.leaky_slope;
            a = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
        } else {
            a = std::move(z);
        }
    }
    return a.row(0);
}

Eigen::MatrixXd mlp_backward(const ParamSet& params, const MlpShape& shape, const MlpCache& cache,
                             const Eigen::RowVectorXd& grad_logits, ParamSet& grads) {
    const int L = shape.layers();
    Eigen::MatrixXd g = grad_logits;
    for (int l = L - 1; l >= 0; --l) {
        if (l + 1 < L) {
            const double slope = shape.leaky_slope;
            g = g.cwiseProduct(cache.pre[std::size_t(l)].unaryExpr(
                [slope](double v) { return v > 0.0 ? 1.0 : slope; }));
        }
        ParamBlock& gw = grads.block(weight_name(l));
        Eigen::Map<RowMajor>(gw.values.data(), gw.shape[0], gw.shape[1]) +=
            g * cache.inputs[std::size_t(l)].transpose();
        ParamBlock& gb = grads.block(bias_name(l));
        Eigen::Map<Eigen::VectorXd>(gb.values.data(), Eigen::Index(gb.values.size())) += g.rowwise().sum();
        g = weight_of(params, l).transpose() * g;
    }
    return g;
}

double mlp_forward(const ParamSet& params, const MlpShape& shape, const Eigen::VectorXd& x) {
    return sigmoid(mlp_logits(params, shape, x)[0]);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_loss(std::span<const double> pred, std::span<const double> label) {
    if (pred.size() != label.size()) throw DimensionError("bce_loss: size mismatch");
    if (pred.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
        acc -= label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
    }
    return acc / double(pred.size());
}

double bce_with_logits(const Eigen::RowVectorXd& logits, std::span<const double> label,
                       Eigen::RowVectorXd* grad) {
    const auto n = std::size_t(logits.size());
    if (n != label.size()) throw DimensionError("bce_with_logits: size mismatch");
    if (grad) grad->setZero(logits.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = logits[Eigen::Index(i)];
        // softplus(z) - y z, written to avoid overflow for large |z|
        acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - label[i] * z;
        if (grad) (*grad)[Eigen::Index(i)] = (sigmoid(z) - label[i]) / double(n);
    }
    return acc / double(n);
}

double smooth_l1(double x) {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
    if (x >= 1.0) return 1.0;
    if (x <= -1.0) return -1.0;
    return x;
}

DisparityMap pool_disparity(const DisparityMap& full, int level) {
    const int f = 1 << level;
    const int h = (full.height + f - 1) / f, w = (full.width + f - 1) / f;
    DisparityMap out(h, w);
    for (int by = 0; by < h; ++by)
        for (int bx = 0; bx < w; ++bx) {
            double acc = 0.0;
            int n = 0;
            for (int y = by * f; y < std::min(full.height, (by + 1) * f); ++y)
                for (int x = bx * f; x < std::min(full.width, (bx + 1) * f); ++x)
                    if (full.is_valid(y, x)) {
                        acc += full.at(y, x);
                        ++n;
                    }
            if (n > 0) {
                out.at(by, bx) = acc / n;
                out.valid[out.index(by, bx)] = 1;
            }
        }
    return out;
}

double disparity_loss(const std::vector<DisparityMap>& pred_pyramid, const DisparityMap& gt,
                      const LossWeights& weights) {
    if (pred_pyramid.size() < weights.lambdas.size())
        throw DimensionError("disparity_loss: prediction pyramid has fewer scales than weights");
    double total = 0.0;
    for (std::size_t w = 0; w < weights.lambdas.size(); ++w) {
        const DisparityMap g = pool_disparity(gt, int(w));
        const DisparityMap& p = pred_pyramid[w];
        if (p.height != g.height || p.width != g.width)
            throw DimensionError("disparity_loss: scale " + std::to_string(w) + " shape mismatch");
        double acc = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < g.values.size(); ++i)
            if (g.valid[i] && p.valid[i]) {
                acc += smooth_l1(p.values[i] - g.values[i]);
                ++n;
            }
        if (n > 0) total += weights.lambdas[w] * acc / n;
    }
    return total;
}

double disparity_loss_full(const DisparityMap& pred, const DisparityMap& gt, const LossWeights& weights,
                           std::vector<double>* grad) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw DimensionError("disparity_loss_full: shape mismatch");
    const int H = gt.height, W = gt.width;
    if (grad) grad->assign(std::size_t(H) * W, 0.0);
    double total = 0.0;
    for (std::size_t w = 0; w < weights.lambdas.size(); ++w) {
        const int f = 1 << w;
        const int bh = (H + f - 1) / f, bw = (W + f - 1) / f;
        struct Block {
            double err;
            int n;
        };
        std::vector<Block> blocks;
        blocks.reserve(std::size_t(bh) * bw);
        for (int by = 0; by < bh; ++by)
            for (int bx = 0; bx < bw; ++bx) {
                double sp = 0.0, sg = 0.0;
                int n = 0;
                for (int y = by * f; y < std::min(H, (by + 1) * f); ++y)
                    for (int x = bx * f; x < std::min(W, (bx + 1) * f); ++x) {
                        const std::size_t i = gt.index(y, x);
                        if (!gt.valid[i] || !pred.valid[i]) continue;
                        sp += pred.values[i];
                        sg += gt.values[i];
                        ++n;
                    }
                blocks.push_back({n > 0 ? (sp - sg) / n : 0.0, n});
            }
        int used = 0;
        double acc = 0.0;
        for (const Block& b : blocks)
            if (b.n > 0) {
                acc += smooth_l1(b.err);
                ++used;
            }
        if (used == 0) continue;
        const double lambda = weights.lambdas[w];
        total += lambda * acc / used;
        if (!grad) continue;
        for (int by = 0; by < bh; ++by)
            for (int bx = 0; bx < bw; ++bx) {
                const Block& b = blocks[std::size_t(by) * bw + bx];
                if (b.n == 0) continue;
                const double g = lambda * smooth_l1_grad(b.err) / (double(used) * b.n);
                for (int y = by * f; y < std::min(H, (by + 1) * f); ++y)
                    for (int x = bx * f; x < std::min(W, (bx + 1) * f); ++x) {
                        const std::size_t i = gt.index(y, x);
                        if (gt.valid[i] && pred.valid[i]) (*grad)[i] += g;
                    }
            }
    }
    return total;
}

AdamState AdamState::like(const ParamSet& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

double scheduled_lr(const AdamConfig& cfg, int epoch) {
    if (cfg.decay_every <= 0) return cfg.lr;
    return cfg.lr * std::pow(cfg.decay_factor, double(epoch / cfg.decay_every));
}

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads, const AdamConfig& cfg, int epoch,
               bool single_precision) {
    ++state.step;
    const double lr = scheduled_lr(cfg, epoch);
    const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    auto& pb = params.blocks();
    for (std::size_t i = 0; i < pb.size(); ++i) {
        auto& p = pb[i].values;
        const auto& g = grads.blocks()[i].values;
        auto& m = state.m.blocks()[i].values;
        auto& v = state.v.blocks()[i].values;
        if (g.size() != p.size()) throw DimensionError("adam_step: gradient layout mismatch");
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p[k] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p[k]);
        }
    }
    if (single_precision) {
        params.round_to_float();
        state.m.round_to_float();
        state.v.round_to_float();
    }
}

}  // namespace stpf
