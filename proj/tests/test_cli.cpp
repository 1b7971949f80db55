#include "meshes.hpp"
#include "small_profile.hpp"
#include "tempdir.hpp"

#include "stpf/error.hpp"
#include "stpf/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace stpf;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STPF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const TempDir& dir, const std::string& extra = {}) {
    const std::string path = dir.file("cfg.ini");
    write_text_file(path, std::string(kSmallProfile) + extra);
    return path;
}

}  // namespace

TEST(Gen, DeterministicWithCompleteManifest) {
    const PipelineConfig cfg = small_profile("[scenes]\ncount = 2\n");
    TempDir a("gen_a"), b("gen_b");
    const auto files = cmd_gen(cfg, a.path.string());
    cmd_gen(cfg, b.path.string());
    ASSERT_EQ(files.size(), 10u);
    const std::string manifest = read_text_file(a.file("manifest.txt"));
    std::size_t listed = 0;
    for (const auto& f : files) {
        EXPECT_NE(manifest.find(f), std::string::npos) << f;
        ASSERT_TRUE(fs::exists(a.path / f)) << f;
        EXPECT_EQ(read_text_file(a.file(f)), read_text_file(b.file(f))) << f;
        ++listed;
    }
    std::size_t on_disk = 0;
    for (const auto& e : fs::directory_iterator(a.path))
        if (e.path().filename() != "manifest.txt") ++on_disk;
    EXPECT_EQ(on_disk, listed);

    const auto data = load_dataset(a.path.string());
    ASSERT_EQ(data.size(), 2u);
    const RenderedPair direct = render_quantized(data[0].scene, cfg);
    EXPECT_EQ(data[0].pair.left.data, direct.left.data);
    EXPECT_EQ(data[0].pair.disparity.valid, direct.disparity.valid);
}

TEST(Gen, ZeroScenesGiveEmptyManifest) {
    TempDir d("gen_zero");
    EXPECT_TRUE(cmd_gen(small_profile("[scenes]\ncount = 0\n"), d.path.string()).empty());
    EXPECT_EQ(read_text_file(d.file("manifest.txt")), "");
    EXPECT_THROW(load_dataset(d.file("missing")), DataError);
}

TEST(Eval, SelfAndTranslated) {
    TempDir d("eval");
    const TriangleMesh sphere = refmesh::icosphere(Vec3(0, 0, 0.55), 0.05, 4);
    save_obj(sphere, d.file("a.obj"));
    const SurfaceMetrics self = cmd_eval(d.file("a.obj"), d.file("a.obj"), d.file("r.txt"));
    EXPECT_NEAR(self.chamfer_cm, 0.0, 1e-9);
    const SurfaceMetrics back = parse_metrics_report(read_text_file(d.file("r.txt")));
    EXPECT_NEAR(back.chamfer_cm, self.chamfer_cm, 1e-12);

    save_obj(refmesh::square(-0.1, 0.1, -0.1, 0.1, 0.5), d.file("p.obj"));
    save_obj(refmesh::square(-0.1, 0.1, -0.1, 0.1, 0.52), d.file("q.obj"));
    const SurfaceMetrics t = cmd_eval(d.file("p.obj"), d.file("q.obj"), d.file("t.txt"));
    EXPECT_NEAR(t.p2s_cm, 2.0, 1e-6);
    EXPECT_NEAR(t.chamfer_cm, 2.0, 1e-6);

    // Analytic ground truth given as scene text.
    write_text_file(d.file("s.txt"), "sphere 0 0 0.55 0.05\n");
    EXPECT_LT(cmd_eval(d.file("a.obj"), d.file("s.txt"), d.file("u.txt")).chamfer_cm, 0.05);
}

TEST(Reconstruct, OracleInjectionAndEmptyGrid) {
    const PipelineConfig cfg = small_profile("[scenes]\ncount = 1\n[train]\nstage1_epochs = 1\nstage2_epochs = 1\n");
    TempDir d("recon");
    cmd_gen(cfg, d.file("data"));
    cmd_train(cfg, d.file("data"), d.file("model"));
    const std::string l = d.file("data/scene_000_l.pgm"), r = d.file("data/scene_000_r.pgm");
    const std::string scene = d.file("data/scene_000_scene.txt");

    ReconstructOptions opt;
    opt.oracle_scene = scene;
    const Reconstruction oracle = cmd_reconstruct(d.file("model/model.ckpt"), l, r, cfg.grid, d.file("o"), opt);
    const TriangleMesh gt = load_ground_truth(scene);
    EXPECT_LT(chamfer(oracle.mesh, gt).chamfer_cm, 100.0 * cfg.grid.spacing().maxCoeff());
    EXPECT_TRUE(mesh_topology(oracle.mesh).closed());
    EXPECT_TRUE(fs::exists(d.file("o/recon.obj")));
    EXPECT_TRUE(fs::exists(d.file("o/depth_pred.t32")));

    cmd_reconstruct(d.file("model/model.ckpt"), l, r, cfg.grid, d.file("m1"));
    cmd_reconstruct(d.file("model/model.ckpt"), l, r, cfg.grid, d.file("m2"));
    EXPECT_EQ(read_text_file(d.file("m1/recon.obj")), read_text_file(d.file("m2/recon.obj")));

    ReconGrid behind = cfg.grid;
    behind.box_min = Vec3(5, 5, 0.5);
    behind.box_max = Vec3(6, 6, 1.0);
    const Reconstruction empty = cmd_reconstruct(d.file("model/model.ckpt"), l, r, behind, d.file("e"));
    EXPECT_TRUE(empty.mesh.empty());
    EXPECT_TRUE(empty.warned_empty);
}

TEST(Depth, NormalsOfFrontoParallelPlane) {
    const RectifiedRig rig;
    DepthMap d(rig.height, rig.width);
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        d.values[i] = 0.6;
        d.valid[i] = (i % rig.width) > 20;
    }
    const Grid2<float> n = normal_map(d, rig);
    ASSERT_EQ(n.channels, 3);
    for (int y = 1; y < rig.height - 1; ++y)
        for (int x = 30; x < rig.width - 1; ++x) {
            EXPECT_NEAR(n.at(0, y, x), 0.0, 1e-2);
            EXPECT_NEAR(n.at(1, y, x), 0.0, 1e-2);
            EXPECT_NEAR(n.at(2, y, x), -1.0, 1e-2);
        }
    for (int y = 0; y < rig.height; ++y) EXPECT_EQ(n.at(2, y, 5), 0.0f);  // masked stays masked
}

TEST(Train, LogAndMissingData) {
    const PipelineConfig cfg = small_profile("[scenes]\ncount = 1\n[train]\nstage1_epochs = 1\nstage2_epochs = 2\n");
    TempDir d("train");
    cmd_gen(cfg, d.file("data"));
    const TrainState st = cmd_train(cfg, d.file("data"), d.file("out"));
    const std::string log = read_text_file(d.file("out/train_log.csv"));
    EXPECT_EQ(log.rfind("epoch,stage,loss\n", 0), 0u);
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
    EXPECT_NE(log.find("\n1,2,"), std::string::npos);
    EXPECT_NE(log.find("\n2,2,"), std::string::npos);
    const LoadedModel m = load_model(d.file("out/model.ckpt"));
    EXPECT_TRUE(m.model.occupancy == st.model.occupancy);
    EXPECT_TRUE(m.model.stereo == st.model.stereo);
    EXPECT_THROW(cmd_train(cfg, d.file("nope"), d.file("out2")), DataError);
}

TEST(Binary, EndToEndAndExitCodes) {
    TempDir d("bin");
    const std::string cfg = write_config(d, "[scenes]\ncount = 1\n[train]\nstage1_epochs = 1\nstage2_epochs = 1\n");
    const std::string base = " --config " + cfg + " --out ";
    ASSERT_EQ(run_cli("gen" + base + d.file("data")), 0);
    ASSERT_EQ(run_cli("train" + base + d.file("model") + " --data " + d.file("data")), 0);
    const std::string pair = " --model " + d.file("model/model.ckpt") + " --left " + d.file("data/scene_000_l.pgm") +
                             " --right " + d.file("data/scene_000_r.pgm");
    ASSERT_EQ(run_cli("reconstruct --out " + d.file("rec") + pair), 0);
    ASSERT_EQ(run_cli("depth --out " + d.file("dep") + pair + " --threads 1"), 0);
    EXPECT_EQ(load_tensor(d.file("dep/normals.t32")).dims[0], 3u);
    ASSERT_EQ(run_cli("reconstruct --out " + d.file("orc") + pair + " --oracle-scene " +
                      d.file("data/scene_000_scene.txt")),
              0);
    ASSERT_EQ(run_cli("eval --out " + d.file("ev") + " --recon " + d.file("orc/recon.obj") + " --gt " +
                      d.file("data/scene_000_scene.txt")),
              0);
    EXPECT_NO_THROW(parse_metrics_report(read_text_file(d.file("ev/metrics.txt"))));

    write_text_file(d.file("bad.ini"), "[rig]\nwidth = 191\n");
    EXPECT_EQ(run_cli("gen --config " + d.file("bad.ini") + " --out " + d.file("x")), 2);
    EXPECT_EQ(run_cli("gen --out"), 2);
    EXPECT_EQ(run_cli("bogus"), 2);
    EXPECT_EQ(run_cli("train" + base + d.file("y") + " --data " + d.file("nowhere")), 3);
    const std::string diverge = write_config(d, "[train]\nsingle_precision = false\n[stage1]\nlr = 1e300\n");
    EXPECT_EQ(run_cli("train --config " + diverge + " --out " + d.file("z") + " --data " + d.file("data")), 4);
}
