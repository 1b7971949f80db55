#pragma once

#include "stpf/error.hpp"
#include "stpf/geometry.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stpf {

/// Dense (C, H, W) grid. `stride_px` is the number of full-resolution
/// pixels per cell.
template <typename T>
struct Grid2 {
    int channels = 0;
    int height = 0;
    int width = 0;
    int stride_px = 1;
    std::vector<T> data;

    Grid2() = default;
    Grid2(int c, int h, int w, int stride = 1, T fill = T(0))
        : channels(c), height(h), width(w), stride_px(stride),
          data(std::size_t(c) * std::size_t(h) * std::size_t(w), fill) {
        if (c < 1 || h < 1 || w < 1 || stride < 1) throw DimensionError("Grid2: bad shape");
    }

    std::size_t plane() const { return std::size_t(height) * std::size_t(width); }
    std::size_t index(int c, int y, int x) const {
        return std::size_t(c) * plane() + std::size_t(y) * std::size_t(width) + std::size_t(x);
    }
    T& at(int c, int y, int x) { return data[index(c, y, x)]; }
    const T& at(int c, int y, int x) const { return data[index(c, y, x)]; }
    bool same_shape(const Grid2& o) const {
        return channels == o.channels && height == o.height && width == o.width &&
               stride_px == o.stride_px;
    }
};

/// Dense (C, D, H, W) volume over channel, disparity bin, row and column.
template <typename T>
struct Grid4 {
    int channels = 0;
    int bins = 0;
    int height = 0;
    int width = 0;
    VolumeStrides strides;
    std::vector<T> data;

    Grid4() = default;
    Grid4(int c, int d, int h, int w, VolumeStrides s = {}, T fill = T(0))
        : channels(c), bins(d), height(h), width(w), strides(s),
          data(std::size_t(c) * std::size_t(d) * std::size_t(h) * std::size_t(w), fill) {
        if (c < 1 || d < 1 || h < 1 || w < 1) throw DimensionError("Grid4: bad shape");
    }

    std::size_t cells() const { return std::size_t(bins) * std::size_t(height) * std::size_t(width); }
    std::size_t plane() const { return std::size_t(height) * std::size_t(width); }
    /// Offset of voxel (d, y, x) inside one channel.
    std::size_t cell(int d, int y, int x) const {
        return std::size_t(d) * plane() + std::size_t(y) * std::size_t(width) + std::size_t(x);
    }
    std::size_t index(int c, int d, int y, int x) const { return std::size_t(c) * cells() + cell(d, y, x); }
    T& at(int c, int d, int y, int x) { return data[index(c, d, y, x)]; }
    const T& at(int c, int d, int y, int x) const { return data[index(c, d, y, x)]; }
    bool same_shape(const Grid4& o) const {
        return channels == o.channels && bins == o.bins && height == o.height && width == o.width;
    }
};

using FeatureGrid = Grid2<float>;
using Volume4 = Grid4<float>;

/// Single-channel H x W map with a validity mask.
struct ScalarMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    ScalarMap() = default;
    ScalarMap(int h, int w) : height(h), width(w), values(std::size_t(h) * std::size_t(w), 0.0),
                              valid(std::size_t(h) * std::size_t(w), 0) {}
    std::size_t index(int y, int x) const { return std::size_t(y) * std::size_t(width) + std::size_t(x); }
    double& at(int y, int x) { return values[index(y, x)]; }
    double at(int y, int x) const { return values[index(y, x)]; }
    bool is_valid(int y, int x) const { return valid[index(y, x)] != 0; }
};

/// Disparity in full-resolution pixels.
struct DisparityMap : ScalarMap {
    using ScalarMap::ScalarMap;
};

/// Depth in meters along the left camera z axis.
struct DepthMap : ScalarMap {
    using ScalarMap::ScalarMap;
};

// Interpolation stencils. Coordinates outside the grid are clamped to the
// border; weights always sum to one.

struct Stencil2 {
    std::size_t offset[4];
    double weight[4];
};

struct Stencil3 {
    std::size_t offset[8];
    double weight[8];
};

/// Bilinear taps on an H x W plane at row `y`, column `x`.
Stencil2 bilinear_stencil(int height, int width, double y, double x);
/// Trilinear taps on a D x H x W block.
Stencil3 trilinear_stencil(int bins, int height, int width, const VoxelCoord& c);

/// Bilinear sample of every channel; `uv` is (column, row) in cell units.
template <typename T>
Eigen::VectorXd bilinear_sample(const Grid2<T>& grid, const Vec2& uv) {
    const Stencil2 s = bilinear_stencil(grid.height, grid.width, uv.y(), uv.x());
    Eigen::VectorXd out(grid.channels);
    for (int c = 0; c < grid.channels; ++c) {
        const T* base = grid.data.data() + std::size_t(c) * grid.plane();
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += s.weight[k] * double(base[s.offset[k]]);
        out[c] = acc;
    }
    return out;
}

template <typename T>
Eigen::VectorXd trilinear_sample(const Grid4<T>& vol, const VoxelCoord& coord) {
    const Stencil3 s = trilinear_stencil(vol.bins, vol.height, vol.width, coord);
    Eigen::VectorXd out(vol.channels);
    for (int c = 0; c < vol.channels; ++c) {
        const T* base = vol.data.data() + std::size_t(c) * vol.cells();
        double acc = 0.0;
        for (int k = 0; k < 8; ++k) acc += s.weight[k] * double(base[s.offset[k]]);
        out[c] = acc;
    }
    return out;
}

/// Bilinear sample of a scalar map; returns false when any tap is invalid.
bool sample_map(const ScalarMap& map, double y, double x, double& value);

/// Initial feature cost volume plus the mask of voxels whose right-image
/// lookup fell left of column 0.
struct CostVolume {
    Volume4 cost;
    std::vector<std::uint8_t> masked;  // D x H x W
};

/// cost(c, d, i, j) = left(c, i, j) - right(c, i, j - d * bin_shift).
/// Fractional shifts interpolate the right grid linearly along x.
CostVolume build_cost_volume(const FeatureGrid& left, const FeatureGrid& right, int bins,
                             double bin_shift = 1.0, VolumeStrides strides = {});

/// Separable box filter of the given radius along (d, y, x), border replicated.
Volume4 box_smooth(const Volume4& vol, int radius);

/// Per-voxel affine channel mix, `weight` is out x in row-major.
struct ChannelMix {
    int in = 0;
    int out = 0;
    std::span<const double> weight;
    std::span<const double> bias;
};

/// Box smoothing followed by the channel mix at every voxel.
Volume4 aggregate_cost_volume(const Volume4& cost, const ChannelMix& mix, int radius = 1);

/// Per-voxel matching score: logit = sum_c linear_c v_c - sum_c quadratic_c v_c^2.
struct ConfidenceScore {
    std::span<const double> linear;
    std::span<const double> quadratic;
};

/// Confidence volume: disparity-axis softmax of the per-voxel logits.
struct ConfidenceVolume {
    Grid4<double> psi;                       // C = 1
    std::vector<std::uint8_t> column_valid;  // H x W
};

ConfidenceVolume confidence_volume(const CostVolume& cost, const ConfidenceScore& score);

/// Softmax along the disparity axis of a single-channel logit volume;
/// masked voxels (may be empty) receive probability zero.
ConfidenceVolume softmax_disparity(const Grid4<double>& logits, std::span<const std::uint8_t> masked);

/// Confidence-weighted mean bin per column, scaled by the disparity stride,
/// at volume resolution.
DisparityMap expected_disparity(const ConfidenceVolume& conf);

/// Confidence-weighted disparity upsampled bilinearly to full resolution.
DisparityMap soft_argmax_disparity(const ConfidenceVolume& conf, int full_height, int full_width);

/// Bilinear upsampling from volume to full resolution (pixel p maps to cell p / stride).
DisparityMap upsample_disparity(const DisparityMap& coarse, int stride, int full_height, int full_width);

DepthMap disparity_map_to_depth_map(const DisparityMap& disparity, const RectifiedRig& rig);

}  // namespace stpf
