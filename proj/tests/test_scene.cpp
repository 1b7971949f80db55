#include "stpf/error.hpp"
#include "stpf/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stpf;

namespace {

SdfScene one(Primitive p) {
    SdfScene s;
    s.primitives.push_back(p);
    return s;
}

// Plain sphere tracing, written separately from the renderer.
bool trace(const SdfScene& s, const Vec3& o, const Vec3& dir, Vec3& hit) {
    double t = 0.0;
    for (int i = 0; i < 1000 && t < 50.0; ++i) {
        const double d = sdf_eval(s, o + t * dir);
        if (d < 1e-7) {
            hit = o + t * dir;
            return true;
        }
        t += d;
    }
    return false;
}

}  // namespace

TEST(Sdf, ClosedForms) {
    const SdfScene unit = one(Sphere{Vec3::Zero(), 1.0});
    EXPECT_DOUBLE_EQ(sdf_eval(unit, Vec3(0, 0, 0)), -1.0);
    EXPECT_DOUBLE_EQ(sdf_eval(unit, Vec3(2, 0, 0)), 1.0);
    const SdfScene cap = one(Capsule{Vec3(0, 0, 2), Vec3(0, 1, 2), 0.3});
    EXPECT_NEAR(sdf_eval(cap, Vec3(0, 0.5, 2)), -0.3, 1e-15);
    EXPECT_NEAR(sdf_eval(cap, Vec3(0, 2, 2)), 0.7, 1e-15);
    const SdfScene box = one(Box{Vec3(0, 0, 1), Vec3(0.5, 0.25, 0.1)});
    EXPECT_NEAR(sdf_eval(box, Vec3(0, 0, 1)), -0.1, 1e-15);
    EXPECT_NEAR(sdf_eval(box, Vec3(1.5, 0, 1)), 1.0, 1e-15);
    EXPECT_NEAR(sdf_eval(box, Vec3(0.5 + 0.3, 0.25 + 0.4, 1)), 0.5, 1e-15);
}

TEST(Sdf, RotatedBoxMatchesRotatedQuery) {
    Box b{Vec3(0.1, -0.2, 1.0), Vec3(0.3, 0.1, 0.2)};
    b.rotation = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const Box axis{Vec3::Zero(), b.half_extents};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        const Vec3 local(u(rng), u(rng), u(rng));
        EXPECT_NEAR(sdf_eval(Primitive(b), b.rotation * local + b.center), sdf_eval(Primitive(axis), local), 1e-12);
    }
}

TEST(Sdf, UnionIsMinimumAndLipschitz) {
    SdfScene s;
    s.primitives = {Sphere{Vec3(-1, 0, 3), 0.4}, Sphere{Vec3(1, 0, 3), 0.3}, Capsule{Vec3(0, 1, 2), Vec3(0, 2, 3), 0.1},
                    Box{Vec3(0, -1, 2.5), Vec3(0.2, 0.2, 0.2)}};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 4);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
        double m = 1e300;
        for (const auto& prim : s.primitives) m = std::min(m, sdf_eval(prim, p));
        EXPECT_EQ(sdf_eval(s, p), m);
        EXPECT_LE(std::abs(sdf_eval(s, p) - sdf_eval(s, q)), (p - q).norm() + 1e-9);
    }
    EXPECT_THROW(sdf_eval(SdfScene{}, Vec3::Zero()), DataError);
}

TEST(Sdf, OccupancyOracle) {
    const SdfScene s = one(Sphere{Vec3(0, 0, 1), 0.5});
    EXPECT_EQ(occupancy_oracle(s, Vec3(0, 0, 1)), 1);
    EXPECT_EQ(occupancy_oracle(s, Vec3(5, 0, 1)), 0);
    EXPECT_EQ(occupancy_oracle(s, Vec3(0, 0, 0.5)), 1);  // surface counts inside
    const Vec3 n = sdf_normal(s, Vec3(0.3, 0.4, 1.0));
    EXPECT_NEAR((n - Vec3(0.6, 0.8, 0.0)).norm(), 0.0, 1e-6);
}

TEST(SceneText, RoundTripAndErrors) {
    SdfScene s;
    Box b{Vec3(0.01, 0.02, 0.5), Vec3(0.03, 0.02, 0.01)};
    b.rotation = Eigen::AngleAxisd(0.4, Vec3(0, 1, 0)).toRotationMatrix();
    s.primitives = {Sphere{Vec3(0.1, -0.05, 0.6), 0.04}, Capsule{Vec3(0, 0, 0.5), Vec3(0.02, 0.03, 0.55), 0.01}, b};
    s.light = Light{Vec3(0.1, 0.2, -1).normalized(), 1.1, 0.2};
    const SdfScene back = parse_scene(format_scene(s));
    ASSERT_EQ(back.primitives.size(), 3u);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p(u(rng), u(rng), 0.55 + u(rng));
        EXPECT_NEAR(sdf_eval(back, p), sdf_eval(s, p), 1e-12);
    }
    EXPECT_NEAR(back.light.intensity, 1.1, 1e-15);

    const SdfScene plain = parse_scene("# comment\nsphere 0 0 2 1\nbox 0 0 3 1 1 1\ncapsule 0 0 2 0 1 2 0.3\n");
    EXPECT_EQ(plain.primitives.size(), 3u);
    auto line_of = [](const std::string& text) {
        try {
            parse_scene(text);
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(line_of("sphere 0 0 2 1\ncone 1 2 3\n").find("line 2"), std::string::npos);
    EXPECT_NE(line_of("sphere 0 0 2\n").find("line 1"), std::string::npos);
    EXPECT_NE(line_of("sphere 0 0 2 x\n").find("line 1"), std::string::npos);
    EXPECT_THROW(parse_scene("# nothing\n"), DataError);
}

TEST(Render, PlaneHasConstantDisparity) {
    RectifiedRig rig;
    rig.focal_px = 1000.0;
    rig.baseline_m = 0.1;
    rig.width = 64;
    rig.height = 48;
    rig.cx = 31.5;
    rig.cy = 23.5;
    // Thin box whose front face sits exactly at z = 2.
    const SdfScene s = one(Box{Vec3(0, 0, 2.01), Vec3(5, 5, 0.01)});
    RenderConfig cfg;
    cfg.tolerance = 1e-7;
    const RenderedPair r = render_stereo(s, rig, cfg);
    for (std::size_t i = 0; i < r.disparity.values.size(); ++i) {
        ASSERT_TRUE(r.disparity.valid[i]);
        EXPECT_NEAR(r.disparity.values[i], 50.0, 1e-3);
    }
}

TEST(Render, DepthDisparityConsistencyOnRandomScenes) {
    const RectifiedRig rig;
    std::mt19937_64 rng(9);
    for (int k = 0; k < 3; ++k) {
        const SdfScene s = random_scene(SceneRanges{}, rig, rng);
        const RenderedPair r = render_stereo(s, rig);
        std::size_t valid = 0;
        for (std::size_t i = 0; i < r.depth.values.size(); ++i) {
            EXPECT_EQ(r.depth.valid[i], r.disparity.valid[i]);
            if (!r.depth.valid[i]) {
                EXPECT_EQ(r.left.data[i], 0.0f);
                continue;
            }
            ++valid;
            EXPECT_NEAR(r.disparity.values[i], rig.bk() / r.depth.values[i], 1e-5);
            EXPECT_GE(r.left.data[i], 0.0f);
            EXPECT_LE(r.left.data[i], 1.0f);
        }
        EXPECT_GT(valid, 0u);
    }
}

TEST(Render, SphereNearestDepthAtPrincipalPixel) {
    RectifiedRig rig;
    rig.width = rig.height = 65;
    rig.cx = rig.cy = 32.0;
    const SdfScene s = one(Sphere{Vec3(0, 0, 0.6), 0.05});
    const RenderConfig cfg;
    const RenderedPair r = render_stereo(s, rig, cfg);
    const std::size_t c = r.depth.index(32, 32);
    ASSERT_TRUE(r.depth.valid[c]);
    EXPECT_NEAR(r.depth.values[c], 0.55, cfg.tolerance);
    for (std::size_t i = 0; i < r.depth.values.size(); ++i)
        if (r.depth.valid[i]) EXPECT_GE(r.depth.values[i], r.depth.values[c] - cfg.tolerance);
}

TEST(Render, LeftPointsReprojectIntoRightView) {
    const RectifiedRig rig;
    SdfScene s = one(Sphere{Vec3(0.01, -0.02, 0.55), 0.05});
    s.primitives.push_back(Box{Vec3(-0.05, 0.03, 0.6), Vec3(0.03, 0.02, 0.03)});
    const RenderedPair r = render_stereo(s, rig);
    std::size_t valid = 0, ok = 0;
    for (int v = 0; v < rig.height; ++v)
        for (int u = 0; u < rig.width; ++u) {
            const std::size_t i = r.depth.index(v, u);
            if (!r.depth.valid[i]) continue;
            ++valid;
            const Vec3 p = backproject(u, v, r.depth.values[i], rig);
            const double ur = u - r.disparity.values[i];
            EXPECT_NEAR(project_right(p, rig).x(), ur, 1e-9);
            Vec3 hit;
            if (trace(s, Vec3(rig.baseline_m, 0, 0), pixel_ray(ur, v, rig), hit) &&
                std::abs(project_left(hit, rig).x() - u) <= 0.5)
                ++ok;
        }
    ASSERT_GT(valid, 1000u);
    EXPECT_GE(double(ok) / double(valid), 0.99);
}

TEST(Render, Deterministic) {
    const RectifiedRig rig;
    std::mt19937_64 a(21), b(21);
    const SdfScene sa = random_scene(SceneRanges{}, rig, a), sb = random_scene(SceneRanges{}, rig, b);
    EXPECT_EQ(format_scene(sa), format_scene(sb));
    const RenderedPair ra = render_stereo(sa, rig), rb = render_stereo(sb, rig);
    EXPECT_EQ(ra.left.data, rb.left.data);
    EXPECT_EQ(ra.right.data, rb.right.data);
    EXPECT_EQ(ra.depth.values, rb.depth.values);
}

TEST(RandomScene, RespectsRanges) {
    const RectifiedRig rig;
    const SceneRanges ranges;
    std::mt19937_64 rng(5);
    for (int k = 0; k < 50; ++k) {
        const SdfScene s = random_scene(ranges, rig, rng);
        ASSERT_GE(int(s.primitives.size()), ranges.min_primitives);
        ASSERT_LE(int(s.primitives.size()), ranges.max_primitives);
        Vec3 lo, hi;
        scene_bounds(s, lo, hi);
        EXPECT_TRUE((lo.array() >= ranges.box_min.array() - 1e-12).all());
        EXPECT_TRUE((hi.array() <= ranges.box_max.array() + 1e-12).all());
        const double cone = std::cos(ranges.light_cone_deg * M_PI / 180.0);
        EXPECT_GE(-s.light.direction.normalized().z(), cone - 1e-12);
    }
}

TEST(RandomScene, TransformScene) {
    const SdfScene s = one(Sphere{Vec3(0, 0, 0.5), 0.05});
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix();
    const Vec3 pivot(0, 0, 0.55);
    const SdfScene t = transform_scene(s, rot, Vec3(0.01, 0, 0), 2.0, pivot);
    const Vec3 c = rot * (2.0 * (Vec3(0, 0, 0.5) - pivot)) + pivot + Vec3(0.01, 0, 0);
    EXPECT_NEAR(sdf_eval(t, c), -0.1, 1e-12);
}
