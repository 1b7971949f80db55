// Command-line driver: gen, train, reconstruct, eval, depth.

#include "stpf/error.hpp"
#include "stpf/parallel.hpp"
#include "stpf/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "pipeline config file (key = value with [sections])");
    cmd->add_option("--seed", c.seed, "override run.seed");
    auto* out = cmd->add_option("--out", c.out, "output directory");
    if (out_required) out->required();
    cmd->add_option("--threads", c.threads, "worker cap (also STPF_THREADS)")->check(CLI::NonNegativeNumber);
}

stpf::PipelineConfig resolve(const Common& c) {
    stpf::PipelineConfig cfg = c.config.empty() ? stpf::PipelineConfig{} : stpf::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    cfg.validate();
    if (c.threads > 0) stpf::set_thread_count(c.threads);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stereo implicit-surface reconstruction at desk scale"};
    app.require_subcommand(1);

    Common gen_c, train_c, rec_c, eval_c, depth_c;

    auto* gen = app.add_subcommand("gen", "generate scenes, stereo renderings and ground truth");
    add_common(gen, gen_c);

    std::string data_dir, resume;
    int epochs = -1;
    bool verbose = false;
    auto* train = app.add_subcommand("train", "two-stage training on a generated dataset");
    add_common(train, train_c);
    train->add_option("--data", data_dir, "directory written by gen")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--epochs", epochs, "stop after this many epochs");
    train->add_flag("--verbose", verbose, "print per-epoch losses");

    std::string model, left, right, oracle_scene, gt_depth;
    auto* rec = app.add_subcommand("reconstruct", "mesh a stereo pair with a trained model");
    add_common(rec, rec_c);
    rec->add_option("--model", model, "checkpoint")->required();
    rec->add_option("--left", left, "left PGM")->required();
    rec->add_option("--right", right, "right PGM")->required();
    rec->add_option("--oracle-scene", oracle_scene, "mesh this analytic scene's occupancy instead of the model");
    rec->add_option("--gt-depth", gt_depth, "depth tensor used for the z-offset instead of the prediction");

    std::string recon, gt;
    auto* eval = app.add_subcommand("eval", "P2S and Chamfer distance against ground truth");
    add_common(eval, eval_c);
    eval->add_option("--recon", recon, "reconstructed OBJ")->required();
    eval->add_option("--gt", gt, "ground truth OBJ or scene text")->required();

    auto* depth = app.add_subcommand("depth", "disparity, depth and normal maps from a stereo pair");
    add_common(depth, depth_c);
    depth->add_option("--model", model, "checkpoint")->required();
    depth->add_option("--left", left, "left PGM")->required();
    depth->add_option("--right", right, "right PGM")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const auto cfg = resolve(gen_c);
            const auto files = stpf::cmd_gen(cfg, gen_c.out);
            std::cout << "wrote " << files.size() / 5 << " scenes to " << gen_c.out << '\n';
        } else if (train->parsed()) {
            const auto cfg = resolve(train_c);
            stpf::TrainOptions opt;
            opt.resume = resume;
            opt.epoch_budget = epochs;
            opt.verbose = verbose;
            const auto state = stpf::cmd_train(cfg, data_dir, train_c.out, opt);
            if (!state.log.empty())
                std::cout << "final loss " << stpf::format_double(state.log.back().loss) << " (stage "
                          << state.log.back().stage << ")\n";
        } else if (rec->parsed()) {
            stpf::ReconGrid grid;
            if (!rec_c.config.empty()) {
                grid = resolve(rec_c).grid;
            } else {
                resolve(rec_c);
                grid = stpf::load_model(model).config.grid;
            }
            stpf::ReconstructOptions opt;
            if (!oracle_scene.empty()) opt.oracle_scene = oracle_scene;
            if (!gt_depth.empty()) opt.gt_depth = gt_depth;
            const auto r = stpf::cmd_reconstruct(model, left, right, grid, rec_c.out, opt);
            std::cout << "mesh: " << r.mesh.vertices.size() << " vertices, " << r.mesh.triangles.size()
                      << " triangles\n";
        } else if (eval->parsed()) {
            resolve(eval_c);
            const auto m = stpf::cmd_eval(recon, gt, (std::filesystem::path(eval_c.out) / "metrics.txt").string());
            std::cout << stpf::format_metrics_line(m) << '\n';
        } else if (depth->parsed()) {
            resolve(depth_c);
            stpf::cmd_depth(model, left, right, depth_c.out);
            std::cout << "wrote disparity.t32, depth.t32, normals.t32 to " << depth_c.out << '\n';
        }
    } catch (const stpf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const stpf::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 4;
    } catch (const stpf::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
