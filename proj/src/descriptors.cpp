#include "stpf/descriptors.hpp"

#include <algorithm>
#include <cmath>

namespace stpf {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        total += k[std::size_t(i + radius)];
    }
    for (double& v : k) v /= total;
    return k;
}

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
    if (sigma <= 0.0) return image;
    const auto k = gaussian_kernel(sigma);
    const int r = int(k.size() / 2);
    const int H = image.height, W = image.width;
    Image tmp(image.channels, H, W, image.stride_px);
    Image out(image.channels, H, W, image.stride_px);
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[std::size_t(i + r)] * image.at(c, y, std::clamp(x + i, 0, W - 1));
                tmp.at(c, y, x) = float(acc);
            }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[std::size_t(i + r)] * tmp.at(c, std::clamp(y + i, 0, H - 1), x);
                out.at(c, y, x) = float(acc);
            }
    }
    return out;
}

FeatureGrid DescriptorBank::compute(const Image& image, int stride) const {
    if (image.channels != 1) throw DimensionError("DescriptorBank: expected a single-channel image");
    if (stride < 1 || image.height % stride != 0 || image.width % stride != 0)
        throw DimensionError("DescriptorBank: image size must be divisible by the stride");
    const int H = image.height, W = image.width;
    const int h = H / stride, w = W / stride;
    FeatureGrid out(channels(), h, w, stride);
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
        const double sigma = sigmas[s];
        const Image blurred = gaussian_blur(image, sigma);
        const int c0 = 3 * int(s);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const int y = i * stride, x = j * stride;
                const double gx = 0.5 * (blurred.at(0, y, std::min(x + 1, W - 1)) - blurred.at(0, y, std::max(x - 1, 0)));
                const double gy = 0.5 * (blurred.at(0, std::min(y + 1, H - 1), x) - blurred.at(0, std::max(y - 1, 0), x));
                out.at(c0, i, j) = blurred.at(0, y, x);
                out.at(c0 + 1, i, j) = float(gx * sigma);
                out.at(c0 + 2, i, j) = float(gy * sigma);
            }
    }
    return out;
}

std::vector<std::uint8_t> foreground_mask(const Image& image, float threshold) {
    std::vector<std::uint8_t> mask(image.plane(), 0);
    for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = image.data[p] > threshold ? 1 : 0;
    return mask;
}

}  // namespace stpf
