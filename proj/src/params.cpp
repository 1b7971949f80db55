#include "stpf/params.hpp"

#include "stpf/error.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace stpf {

ParamBlock& ParamSet::add(std::string name, std::vector<int> shape, double fill) {
    if (contains(name)) throw DimensionError("ParamSet: duplicate block " + name);
    const auto n = std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                                   [](std::size_t a, int b) { return a * std::size_t(b); });
    blocks_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill)});
    return blocks_.back();
}

bool ParamSet::contains(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return true;
    return false;
}

ParamBlock& ParamSet::block(const std::string& name) {
    for (auto& b : blocks_)
        if (b.name == name) return b;
    throw DimensionError("ParamSet: no block named " + name);
}

const ParamBlock& ParamSet::block(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw DimensionError("ParamSet: no block named " + name);
}

std::size_t ParamSet::size() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.values.size();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out = *this;
    out.set_zero();
    return out;
}

void ParamSet::set_zero() {
    for (auto& b : blocks_) std::fill(b.values.begin(), b.values.end(), 0.0);
}

void ParamSet::axpy(double scale, const ParamSet& other) {
    if (other.blocks_.size() != blocks_.size()) throw DimensionError("ParamSet::axpy: layout mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& a = blocks_[i].values;
        const auto& b = other.blocks_[i].values;
        if (a.size() != b.size()) throw DimensionError("ParamSet::axpy: block size mismatch");
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
    }
}

bool ParamSet::all_finite() const {
    for (const auto& b : blocks_)
        for (double v : b.values)
            if (!std::isfinite(v)) return false;
    return true;
}

void ParamSet::round_to_float() {
    for (auto& b : blocks_)
        for (double& v : b.values) v = double(float(v));
}

bool ParamSet::operator==(const ParamSet& other) const {
    if (blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& a = blocks_[i];
        const auto& b = other.blocks_[i];
        if (a.name != b.name || a.shape != b.shape || a.values != b.values) return false;
    }
    return true;
}

}  // namespace stpf
