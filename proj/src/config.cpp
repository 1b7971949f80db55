#include "stpf/config.hpp"

#include "stpf/error.hpp"
#include "stpf/tensor_io.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace stpf {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("expected an unsigned integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true/false, got '" + s + "'");
}

struct Entry {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

using Registry = std::vector<std::pair<std::string, Entry>>;

Entry num(double& v) {
    return {[&v](const std::string& s) { v = to_double(s); }, [&v] { return format_double(v); }};
}

Entry integer(int& v) {
    return {[&v](const std::string& s) { v = int(to_int(s)); }, [&v] { return std::to_string(v); }};
}

Entry u64(std::uint64_t& v) {
    return {[&v](const std::string& s) { v = to_u64(s); }, [&v] { return std::to_string(v); }};
}

Entry flag(bool& v) {
    return {[&v](const std::string& s) { v = to_bool(s); }, [&v] { return std::string(v ? "true" : "false"); }};
}

Entry text(std::string& v) {
    return {[&v](const std::string& s) { v = s; }, [&v] { return v; }};
}

Entry vec3(Vec3& v) {
    return {[&v](const std::string& s) {
                auto items = split_list(s);
                if (items.size() != 3) throw ConfigError("expected three comma-separated numbers, got '" + s + "'");
                for (int i = 0; i < 3; ++i) v[i] = to_double(items[std::size_t(i)]);
            },
            [&v] { return format_double(v.x()) + ", " + format_double(v.y()) + ", " + format_double(v.z()); }};
}

Entry doubles(std::vector<double>& v) {
    return {[&v](const std::string& s) {
                v.clear();
                for (const auto& item : split_list(s)) v.push_back(to_double(item));
            },
            [&v] {
                std::string out;
                for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
                return out;
            }};
}

Entry ints(std::vector<int>& v) {
    return {[&v](const std::string& s) {
                v.clear();
                for (const auto& item : split_list(s)) v.push_back(int(to_int(item)));
            },
            [&v] {
                std::string out;
                for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
                return out;
            }};
}

Entry strings(std::vector<std::string>& v) {
    return {[&v](const std::string& s) { v = split_list(s); },
            [&v] {
                std::string out;
                for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
                return out;
            }};
}

void add_adam(Registry& r, const std::string& sec, AdamConfig& a) {
    r.push_back({sec + ".lr", num(a.lr)});
    r.push_back({sec + ".beta1", num(a.beta1)});
    r.push_back({sec + ".beta2", num(a.beta2)});
    r.push_back({sec + ".eps", num(a.eps)});
    r.push_back({sec + ".weight_decay", num(a.weight_decay)});
    r.push_back({sec + ".decay_factor", num(a.decay_factor)});
    r.push_back({sec + ".decay_every", integer(a.decay_every)});
}

Registry registry(PipelineConfig& c) {
    Registry r;
    auto& m = c.model;
    r.push_back({"rig.focal_px", num(m.rig.focal_px)});
    r.push_back({"rig.baseline_m", num(m.rig.baseline_m)});
    r.push_back({"rig.cx", num(m.rig.cx)});
    r.push_back({"rig.cy", num(m.rig.cy)});
    r.push_back({"rig.width", integer(m.rig.width)});
    r.push_back({"rig.height", integer(m.rig.height)});
    r.push_back({"rig.max_disparity", integer(m.strides.max_disparity)});
    r.push_back({"rig.spatial_stride", integer(m.strides.spatial_stride)});
    r.push_back({"rig.disparity_stride", integer(m.strides.disparity_stride)});

    r.push_back({"model.t", num(m.features.t)});
    r.push_back({"model.use_psi", flag(m.features.use_psi)});
    r.push_back({"model.descriptor_sigmas", doubles(m.descriptors.sigmas)});
    r.push_back({"model.smoothing_radius", integer(m.smoothing_radius)});
    r.push_back({"model.cost_channels", integer(m.cost_channels)});
    r.push_back({"model.hidden", ints(m.hidden)});
    r.push_back({"model.leaky_slope", num(m.leaky_slope)});
    r.push_back({"model.score_quadratic_init", num(m.score_quadratic_init)});

    auto& s = c.sampling;
    r.push_back({"sampling.surface_count", integer(s.surface_count)});
    r.push_back({"sampling.gaussian_sigma", num(s.gaussian_sigma)});
    r.push_back({"sampling.uniform_ratio", num(s.uniform_ratio)});
    r.push_back({"sampling.box_min", vec3(s.box_min)});
    r.push_back({"sampling.box_max", vec3(s.box_max)});

    auto& sc = c.scenes;
    r.push_back({"scenes.count", integer(c.scene_count)});
    r.push_back({"scenes.files", strings(c.scene_files)});
    r.push_back({"scenes.box_min", vec3(sc.box_min)});
    r.push_back({"scenes.box_max", vec3(sc.box_max)});
    r.push_back({"scenes.min_primitives", integer(sc.min_primitives)});
    r.push_back({"scenes.max_primitives", integer(sc.max_primitives)});
    r.push_back({"scenes.min_size", num(sc.min_size)});
    r.push_back({"scenes.max_size", num(sc.max_size)});
    r.push_back({"scenes.light_cone_deg", num(sc.light_cone_deg)});
    r.push_back({"scenes.min_intensity", num(sc.min_intensity)});
    r.push_back({"scenes.max_intensity", num(sc.max_intensity)});

    r.push_back({"render.tolerance", num(c.render.tolerance)});
    r.push_back({"render.max_steps", integer(c.render.max_steps)});
    r.push_back({"render.max_distance", num(c.render.max_distance)});
    r.push_back({"render.texture", flag(c.render.texture)});

    auto& t = c.train;
    r.push_back({"train.stage1_epochs", integer(t.stage1_epochs)});
    r.push_back({"train.stage2_epochs", integer(t.stage2_epochs)});
    r.push_back({"train.batch_size", integer(t.batch_size)});
    r.push_back({"train.predicted_depth", flag(t.predicted_depth)});
    r.push_back({"train.single_precision", flag(t.single_precision)});
    r.push_back({"train.loss_lambdas", doubles(t.loss.lambdas)});
    r.push_back({"train.augment", flag(t.augment.enabled)});
    r.push_back({"train.augment_stage1", flag(t.augment.stage1)});
    r.push_back({"train.augment_translate_m", num(t.augment.translate_m)});
    r.push_back({"train.augment_rotate_deg", num(t.augment.rotate_deg)});
    r.push_back({"train.augment_scale_min", num(t.augment.scale_min)});
    r.push_back({"train.augment_scale_max", num(t.augment.scale_max)});
    add_adam(r, "stage1", t.stereo_adam);
    add_adam(r, "stage2", t.occupancy_adam);

    r.push_back({"grid.box_min", vec3(c.grid.box_min)});
    r.push_back({"grid.box_max", vec3(c.grid.box_max)});
    r.push_back({"grid.resolution", {[&c](const std::string& v) {
                                          auto items = split_list(v);
                                          if (items.size() == 1) items = {items[0], items[0], items[0]};
                                          if (items.size() != 3)
                                              throw ConfigError("expected one or three node counts, got '" + v + "'");
                                          for (int i = 0; i < 3; ++i) c.grid.resolution[std::size_t(i)] = int(to_int(items[std::size_t(i)]));
                                      },
                                      [&c] {
                                          const auto& g = c.grid.resolution;
                                          return std::to_string(g[0]) + ", " + std::to_string(g[1]) + ", " +
                                                 std::to_string(g[2]);
                                      }}});
    r.push_back({"grid.iso", num(c.grid.iso)});

    r.push_back({"run.seed", u64(c.seed)});
    r.push_back({"run.output_dir", text(c.output_dir)});
    return r;
}

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void PipelineConfig::validate() const {
    model.validate();
    sampling.validate();
    grid.validate();
    const auto& rig = model.rig;
    check(scene_count >= 0, "scenes.count must be >= 0");
    check(scenes.min_primitives >= 1 && scenes.max_primitives >= scenes.min_primitives,
          "scenes: need 1 <= min_primitives <= max_primitives");
    check(scenes.min_size > 0.0 && scenes.max_size >= scenes.min_size, "scenes: need 0 < min_size <= max_size");
    check((scenes.box_max - scenes.box_min).minCoeff() > 0.0, "scenes: box_max must exceed box_min on every axis");
    check(scenes.box_min.z() > 0.0, "scenes: box must lie in front of the camera (box_min z > 0)");
    const double far_disparity = rig.bk() / scenes.box_min.z();
    const double limit = double(model.strides.max_disparity - model.strides.disparity_stride);
    check(far_disparity <= limit,
          "scenes.box_min z = " + format_double(scenes.box_min.z()) + " gives disparity " + format_double(far_disparity) +
              " px, beyond the last disparity bin (" + format_double(limit) +
              " px); move the box back or raise rig.max_disparity");
    check(render.tolerance > 0.0 && render.max_steps > 0 && render.max_distance > 0.0,
          "render: tolerance, max_steps and max_distance must be positive");
    check(train.stage1_epochs >= 0 && train.stage2_epochs >= 0, "train: epoch counts must be >= 0");
    check(train.batch_size >= 1, "train.batch_size must be >= 1");
    check(!train.loss.lambdas.empty(), "train.loss_lambdas must list at least one scale");
    check(train.augment.scale_min > 0.0 && train.augment.scale_max >= train.augment.scale_min,
          "train: need 0 < augment_scale_min <= augment_scale_max");
    for (const AdamConfig* a : {&train.stereo_adam, &train.occupancy_adam}) {
        check(a->lr > 0.0, "stage learning rates must be positive");
        check(a->beta1 >= 0.0 && a->beta1 < 1.0 && a->beta2 >= 0.0 && a->beta2 < 1.0, "adam betas must lie in [0, 1)");
        check(a->eps > 0.0 && a->weight_decay >= 0.0, "adam eps must be > 0 and weight_decay >= 0");
    }
}

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig cfg;
    Registry reg = registry(cfg);
    std::map<std::string, Entry*> by_name;
    for (auto& [name, e] : reg) by_name[name] = &e;
    std::set<std::string> sections;
    for (const auto& [name, e] : reg) sections.insert(name.substr(0, name.find('.')));

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        if (section.empty()) throw ConfigError(where + "key outside of any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = by_name.find(section + "." + key);
        if (it == by_name.end()) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        try {
            it->second->set(value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const DataError&) {
        throw ConfigError("cannot read config file " + path);
    }
    return parse_config(text);
}

std::string format_config(const PipelineConfig& config) {
    PipelineConfig copy = config;
    Registry reg = registry(copy);
    std::string out, section;
    for (const auto& [name, e] : reg) {
        const auto dot = name.find('.');
        const std::string sec = name.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
            section = sec;
        }
        out += name.substr(dot + 1) + " = " + e.get() + "\n";
    }
    return out;
}

}  // namespace stpf
