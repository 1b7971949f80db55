#pragma once

#include "stpf/volumes.hpp"

#include <vector>

namespace stpf {

/// Grayscale image, single channel, values in [0, 1].
using Image = Grid2<float>;

/// Fixed multi-scale descriptor bank used in place of a learned encoder:
/// [intensity, d/dx, d/dy] of the Gaussian-blurred image at every scale,
/// point-sampled every `stride` pixels.
struct DescriptorBank {
    std::vector<double> sigmas{1.0, 2.0, 4.0};

    int channels() const { return 3 * int(sigmas.size()); }
    FeatureGrid compute(const Image& image, int stride) const;
};

/// Separable Gaussian blur with replicated borders.
Image gaussian_blur(const Image& image, double sigma);

/// Pixels whose intensity exceeds `threshold` (the renderer leaves the
/// background at exactly zero).
std::vector<std::uint8_t> foreground_mask(const Image& image, float threshold = 1e-3f);

}  // namespace stpf
