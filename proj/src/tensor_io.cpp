#include "stpf/tensor_io.hpp"

#include "stpf/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stpf {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("tensor: truncated header");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    if (t.dims.size() > 255) throw DimensionError("tensor: rank above 255");
    if (t.data.size() != t.numel()) throw DimensionError("tensor: payload does not match dims");
    out.write("STPF", 4);
    const char head[2] = {char(kTensorVersion), char(t.dims.size())};
    out.write(head, 2);
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "STPF", 4) != 0) throw DataError("tensor: bad magic");
    unsigned char head[2];
    if (!in.read(reinterpret_cast<char*>(head), 2)) throw DataError("tensor: truncated header");
    if (head[0] != kTensorVersion) throw DataError("tensor: unsupported version " + std::to_string(head[0]));
    Tensor t;
    for (int r = 0; r < head[1]; ++r) t.dims.push_back(get_u32(in));
    const std::size_t n = t.numel();
    std::vector<unsigned char> raw(n * 4);
    if (n > 0 && !in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
        throw DataError("tensor: payload shorter than dims");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* b = raw.data() + 4 * i;
        t.data[i] = std::bit_cast<float>(std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                                         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24);
    }
    return t;
}

void save_tensor(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_tensor(out, t);
    if (!out) throw DataError("failed writing " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    Tensor t = read_tensor(in);
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("tensor: trailing bytes in " + path);
    return t;
}

Tensor map_to_tensor(const ScalarMap& map) {
    Tensor t{{std::uint32_t(map.height), std::uint32_t(map.width)}, std::vector<float>(map.values.size(), 0.0f)};
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (map.valid[i]) t.data[i] = float(map.values[i]);
    return t;
}

namespace {
template <typename Map>
Map tensor_to_map(const Tensor& t) {
    if (t.dims.size() != 2) throw DataError("map tensor must have rank 2");
    Map m(int(t.dims[0]), int(t.dims[1]));
    for (std::size_t i = 0; i < t.data.size(); ++i)
        if (t.data[i] > 0.0f && std::isfinite(t.data[i])) {
            m.values[i] = t.data[i];
            m.valid[i] = 1;
        }
    return m;
}
}  // namespace

DepthMap tensor_to_depth(const Tensor& t) { return tensor_to_map<DepthMap>(t); }
DisparityMap tensor_to_disparity(const Tensor& t) { return tensor_to_map<DisparityMap>(t); }

void save_pgm(const Image& image, const std::string& path) {
    if (image.channels != 1) throw DimensionError("save_pgm: single-channel image expected");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<unsigned char> px(image.data.size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(px.data()), std::streamsize(px.size()));
    if (!out) throw DataError("failed writing " + path);
}

Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    auto token = [&]() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(c);
        }
        return tok;
    };
    if (token() != "P5") throw DataError(path + ": not a binary PGM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw DataError(path + ": malformed PGM header");
    }
    if (w < 1 || h < 1 || maxval != 255) throw DataError(path + ": only 8-bit PGM is supported");
    std::vector<unsigned char> px(std::size_t(w) * h);
    if (!in.read(reinterpret_cast<char*>(px.data()), std::streamsize(px.size())))
        throw DataError(path + ": truncated PGM payload");
    Image img(1, h, w);
    for (std::size_t i = 0; i < px.size(); ++i) img.data[i] = float(px[i]) / 255.0f;
    return img;
}

Image quantize_8bit(const Image& image) {
    Image out = image;
    for (float& v : out.data) v = float(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("failed writing " + path);
}

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw DataError("checkpoint: missing tensor " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "STPF-CHECKPOINT 1\n" << ckpt.header;
    if (!ckpt.header.empty() && ckpt.header.back() != '\n') out << '\n';
    out << "end\n";
    for (const auto& [name, t] : ckpt.tensors) {
        out << name << '\n';
        write_tensor(out, t);
    }
    if (!out) throw DataError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "STPF-CHECKPOINT 1") throw DataError(path + ": not a checkpoint");
    Checkpoint ckpt;
    for (;;) {
        if (!std::getline(in, line)) throw DataError(path + ": checkpoint header not terminated");
        if (line == "end") break;
        ckpt.header += line + '\n';
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ckpt.tensors.emplace_back(line, read_tensor(in));
    }
    return ckpt;
}

void add_params(Checkpoint& ckpt, const std::string& prefix, const ParamSet& params) {
    for (const auto& b : params.blocks()) {
        Tensor t;
        for (int d : b.shape) t.dims.push_back(std::uint32_t(d));
        t.data.reserve(b.values.size());
        for (double v : b.values) t.data.push_back(float(v));
        ckpt.tensors.emplace_back(prefix + b.name, std::move(t));
    }
}

void read_params(const Checkpoint& ckpt, const std::string& prefix, ParamSet& params) {
    for (auto& b : params.blocks()) {
        const Tensor& t = ckpt.get(prefix + b.name);
        if (t.data.size() != b.values.size())
            throw DataError("checkpoint: tensor " + prefix + b.name + " has the wrong size");
        for (std::size_t i = 0; i < t.data.size(); ++i) b.values[i] = t.data[i];
    }
}

}  // namespace stpf
