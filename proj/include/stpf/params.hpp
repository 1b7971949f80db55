#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stpf {

/// One named trainable array. Values are kept in double; training in
/// single precision rounds them to float after every update.
struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

/// Ordered collection of named parameter blocks.
class ParamSet {
public:
    ParamBlock& add(std::string name, std::vector<int> shape, double fill = 0.0);

    bool contains(const std::string& name) const;
    ParamBlock& block(const std::string& name);
    const ParamBlock& block(const std::string& name) const;
    std::span<double> values(const std::string& name) { return block(name).values; }
    std::span<const double> values(const std::string& name) const { return block(name).values; }

    std::vector<ParamBlock>& blocks() { return blocks_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

    std::size_t size() const;
    ParamSet zeros_like() const;
    void set_zero();
    /// this += scale * other (same layout required).
    void axpy(double scale, const ParamSet& other);
    bool all_finite() const;
    void round_to_float();

    bool operator==(const ParamSet& other) const;

private:
    std::vector<ParamBlock> blocks_;
};

}  // namespace stpf
