#include "stpf/volumes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stpf {

namespace {

// Lower tap index and fractional weight for one clamped axis.
inline void axis_taps(int n, double c, int& i0, int& i1, double& t) {
    if (n == 1 || !(c > 0.0)) {
        i0 = 0;
        i1 = n > 1 ? 1 : 0;
        t = 0.0;
        return;
    }
    const double hi = double(n - 1);
    if (c >= hi) {
        i0 = n - 2;
        i1 = n - 1;
        t = 1.0;
        return;
    }
    i0 = int(std::floor(c));
    i1 = i0 + 1;
    t = c - double(i0);
}

}  // namespace

Stencil2 bilinear_stencil(int height, int width, double y, double x) {
    int y0, y1, x0, x1;
    double ty, tx;
    axis_taps(height, y, y0, y1, ty);
    axis_taps(width, x, x0, x1, tx);
    Stencil2 s;
    const auto w = std::size_t(width);
    s.offset[0] = std::size_t(y0) * w + std::size_t(x0);
    s.offset[1] = std::size_t(y0) * w + std::size_t(x1);
    s.offset[2] = std::size_t(y1) * w + std::size_t(x0);
    s.offset[3] = std::size_t(y1) * w + std::size_t(x1);
    s.weight[0] = (1.0 - ty) * (1.0 - tx);
    s.weight[1] = (1.0 - ty) * tx;
    s.weight[2] = ty * (1.0 - tx);
    s.weight[3] = ty * tx;
    return s;
}

Stencil3 trilinear_stencil(int bins, int height, int width, const VoxelCoord& c) {
    int d0, d1, y0, y1, x0, x1;
    double td, ty, tx;
    axis_taps(bins, c.d, d0, d1, td);
    axis_taps(height, c.y, y0, y1, ty);
    axis_taps(width, c.x, x0, x1, tx);
    const auto plane = std::size_t(height) * std::size_t(width);
    const auto w = std::size_t(width);
    const int ds[2] = {d0, d1};
    const int ys[2] = {y0, y1};
    const int xs[2] = {x0, x1};
    const double wd[2] = {1.0 - td, td};
    const double wy[2] = {1.0 - ty, ty};
    const double wx[2] = {1.0 - tx, tx};
    Stencil3 s;
    int k = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e, ++k) {
                s.offset[k] = std::size_t(ds[a]) * plane + std::size_t(ys[b]) * w + std::size_t(xs[e]);
                s.weight[k] = wd[a] * wy[b] * wx[e];
            }
    return s;
}

bool sample_map(const ScalarMap& map, double y, double x, double& value) {
    const Stencil2 s = bilinear_stencil(map.height, map.width, y, x);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (s.weight[k] == 0.0) continue;
        if (!map.valid[s.offset[k]]) return false;
        acc += s.weight[k] * map.values[s.offset[k]];
    }
    value = acc;
    return true;
}

CostVolume build_cost_volume(const FeatureGrid& left, const FeatureGrid& right, int bins,
                             double bin_shift, VolumeStrides strides) {
    if (!left.same_shape(right)) throw DimensionError("build_cost_volume: left/right shape mismatch");
    if (bins < 1) throw DimensionError("build_cost_volume: need at least one disparity bin");
    const int C = left.channels, H = left.height, W = left.width;
    CostVolume out{Volume4(C, bins, H, W, strides), std::vector<std::uint8_t>(std::size_t(bins) * H * W, 0)};
    for (int d = 0; d < bins; ++d) {
        for (int j = 0; j < W; ++j) {
            const double src = double(j) - double(d) * bin_shift;
            int j0 = 0;
            double t = 0.0;
            bool masked = false;
            if (src < 0.0) {
                masked = true;
            } else {
                j0 = int(std::floor(src));
                t = src - double(j0);
                if (j0 >= W - 1) {
                    j0 = W - 1;
                    t = 0.0;
                }
            }
            const int j1 = std::min(j0 + 1, W - 1);
            for (int i = 0; i < H; ++i) {
                if (masked) out.masked[out.cost.cell(d, i, j)] = 1;
                for (int c = 0; c < C; ++c) {
                    const float r0 = right.at(c, i, j0);
                    const float r = t == 0.0 ? r0 : float((1.0 - t) * r0 + t * right.at(c, i, j1));
                    out.cost.at(c, d, i, j) = left.at(c, i, j) - r;
                }
            }
        }
    }
    return out;
}

Volume4 box_smooth(const Volume4& vol, int radius) {
    if (radius <= 0) return vol;
    const int dims[3] = {vol.bins, vol.height, vol.width};
    const std::size_t steps[3] = {vol.plane(), std::size_t(vol.width), 1};
    const double norm = 1.0 / double(2 * radius + 1);
    std::vector<double> cur(vol.data.begin(), vol.data.end());
    std::vector<double> next(cur.size());
    for (int axis = 0; axis < 3; ++axis) {
        const int n = dims[axis];
        const std::size_t step = steps[axis];
        for (int c = 0; c < vol.channels; ++c) {
            const std::size_t base = std::size_t(c) * vol.cells();
            for (int d = 0; d < vol.bins; ++d)
                for (int y = 0; y < vol.height; ++y)
                    for (int x = 0; x < vol.width; ++x) {
                        const int pos[3] = {d, y, x};
                        const std::size_t here = base + vol.cell(d, y, x);
                        const std::size_t origin = here - std::size_t(pos[axis]) * step;
                        double acc = 0.0;
                        for (int k = -radius; k <= radius; ++k) {
                            const int q = std::clamp(pos[axis] + k, 0, n - 1);
                            acc += cur[origin + std::size_t(q) * step];
                        }
                        next[here] = acc * norm;
                    }
        }
        std::swap(cur, next);
    }
    Volume4 out(vol.channels, vol.bins, vol.height, vol.width, vol.strides);
    std::transform(cur.begin(), cur.end(), out.data.begin(), [](double v) { return float(v); });
    return out;
}

Volume4 aggregate_cost_volume(const Volume4& cost, const ChannelMix& mix, int radius) {
    if (mix.in != cost.channels) throw DimensionError("aggregate_cost_volume: mix input width mismatch");
    if (mix.weight.size() != std::size_t(mix.in) * std::size_t(mix.out) || mix.bias.size() != std::size_t(mix.out))
        throw DimensionError("aggregate_cost_volume: mix parameter size mismatch");
    const Volume4 smooth = box_smooth(cost, radius);
    Volume4 out(mix.out, cost.bins, cost.height, cost.width, cost.strides);
    const std::size_t n = cost.cells();
    for (std::size_t v = 0; v < n; ++v)
        for (int o = 0; o < mix.out; ++o) {
            double acc = mix.bias[o];
            for (int c = 0; c < mix.in; ++c)
                acc += mix.weight[std::size_t(o) * mix.in + c] * double(smooth.data[std::size_t(c) * n + v]);
            out.data[std::size_t(o) * n + v] = float(acc);
        }
    return out;
}

ConfidenceVolume softmax_disparity(const Grid4<double>& logits, std::span<const std::uint8_t> masked) {
    const int D = logits.bins, H = logits.height, W = logits.width;
    ConfidenceVolume out{Grid4<double>(1, D, H, W, logits.strides), std::vector<std::uint8_t>(std::size_t(H) * W, 0)};
    const std::size_t plane = logits.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        double peak = -std::numeric_limits<double>::infinity();
        bool any = false, finite = true;
        for (int d = 0; d < D; ++d) {
            const std::size_t k = std::size_t(d) * plane + p;
            if (!masked.empty() && masked[k]) continue;
            any = true;
            finite = finite && std::isfinite(logits.data[k]);
            peak = std::max(peak, logits.data[k]);
        }
        if (!any) continue;
        if (!finite) {
            // Propagate so the loss reports the failure instead of masking it.
            for (int d = 0; d < D; ++d)
                out.psi.data[std::size_t(d) * plane + p] = std::numeric_limits<double>::quiet_NaN();
            out.column_valid[p] = 1;
            continue;
        }
        double total = 0.0;
        for (int d = 0; d < D; ++d) {
            const std::size_t k = std::size_t(d) * plane + p;
            if (!masked.empty() && masked[k]) continue;
            const double e = std::exp(logits.data[k] - peak);
            out.psi.data[k] = e;
            total += e;
        }
        for (int d = 0; d < D; ++d) out.psi.data[std::size_t(d) * plane + p] /= total;
        out.column_valid[p] = 1;
    }
    return out;
}

ConfidenceVolume confidence_volume(const CostVolume& cv, const ConfidenceScore& score) {
    const Volume4& cost = cv.cost;
    const auto C = std::size_t(cost.channels);
    if (score.linear.size() != C || score.quadratic.size() != C)
        throw DimensionError("confidence_volume: score width does not match cost channels");
    Grid4<double> logits(1, cost.bins, cost.height, cost.width, cost.strides);
    const std::size_t n = cost.cells();
    for (std::size_t v = 0; v < n; ++v) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double x = cost.data[c * n + v];
            acc += score.linear[c] * x - score.quadratic[c] * x * x;
        }
        logits.data[v] = acc;
    }
    return softmax_disparity(logits, cv.masked);
}

DisparityMap expected_disparity(const ConfidenceVolume& conf) {
    const Grid4<double>& psi = conf.psi;
    DisparityMap out(psi.height, psi.width);
    const std::size_t plane = psi.plane();
    const double stride = psi.strides.disparity_stride;
    for (std::size_t p = 0; p < plane; ++p) {
        if (!conf.column_valid[p]) continue;
        double acc = 0.0;
        for (int d = 0; d < psi.bins; ++d) acc += double(d) * psi.data[std::size_t(d) * plane + p];
        out.values[p] = acc * stride;
        out.valid[p] = 1;
    }
    return out;
}

DisparityMap upsample_disparity(const DisparityMap& coarse, int stride, int full_height, int full_width) {
    DisparityMap out(full_height, full_width);
    const double inv = 1.0 / double(stride);
    for (int y = 0; y < full_height; ++y)
        for (int x = 0; x < full_width; ++x) {
            double v = 0.0;
            if (sample_map(coarse, y * inv, x * inv, v)) {
                out.at(y, x) = v;
                out.valid[out.index(y, x)] = 1;
            }
        }
    return out;
}

DisparityMap soft_argmax_disparity(const ConfidenceVolume& conf, int full_height, int full_width) {
    return upsample_disparity(expected_disparity(conf), conf.psi.strides.spatial_stride, full_height, full_width);
}

DepthMap disparity_map_to_depth_map(const DisparityMap& disparity, const RectifiedRig& rig) {
    DepthMap out(disparity.height, disparity.width);
    for (std::size_t p = 0; p < disparity.values.size(); ++p) {
        const double d = disparity.values[p];
        if (!disparity.valid[p] || !(d > 0.0)) continue;
        out.values[p] = rig.bk() / d;
        out.valid[p] = 1;
    }
    return out;
}

}  // namespace stpf
