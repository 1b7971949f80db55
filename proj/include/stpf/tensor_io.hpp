#pragma once

#include "stpf/descriptors.hpp"
#include "stpf/params.hpp"
#include "stpf/volumes.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace stpf {

/// In-memory form of the STPF tensor file: "STPF", version u8, rank u8,
/// rank x u32 dims, then product(dims) f32 values; all little-endian,
/// row-major with the innermost dimension last.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t numel() const;
};

inline constexpr std::uint8_t kTensorVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

/// Maps are stored as (H, W) tensors; invalid pixels are written as 0 and
/// every non-positive value reads back as invalid.
Tensor map_to_tensor(const ScalarMap& map);
DepthMap tensor_to_depth(const Tensor& t);
DisparityMap tensor_to_disparity(const Tensor& t);

template <typename T>
Tensor grid_to_tensor(const Grid4<T>& g) {
    Tensor t{{std::uint32_t(g.channels), std::uint32_t(g.bins), std::uint32_t(g.height), std::uint32_t(g.width)}, {}};
    t.data.reserve(g.data.size());
    for (const T& v : g.data) t.data.push_back(float(v));
    return t;
}

template <typename T>
Tensor grid_to_tensor(const Grid2<T>& g) {
    Tensor t{{std::uint32_t(g.channels), std::uint32_t(g.height), std::uint32_t(g.width)}, {}};
    t.data.reserve(g.data.size());
    for (const T& v : g.data) t.data.push_back(float(v));
    return t;
}

/// Binary 8-bit PGM (P5).
void save_pgm(const Image& image, const std::string& path);
Image load_pgm(const std::string& path);
/// Rounds intensities to the 8-bit levels a PGM can hold.
Image quantize_8bit(const Image& image);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Checkpoint: text header lines ending with a line "end", followed by
/// records of `name\n` + one tensor each.
struct Checkpoint {
    std::string header;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Stores every block of `params` under `prefix + block name`.
void add_params(Checkpoint& ckpt, const std::string& prefix, const ParamSet& params);
/// Restores values into an existing layout.
void read_params(const Checkpoint& ckpt, const std::string& prefix, ParamSet& params);

}  // namespace stpf
