#include "oracles.hpp"

#include "stpf/volumes.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <numeric>
#include <random>

using namespace stpf;

TEST(Bilinear, NodesMidpointsAndLinearFields) {
    FeatureGrid g(1, 5, 7);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) g.at(0, y, x) = float(2 * x + 3 * y);
    EXPECT_NEAR(bilinear_sample(g, Vec2(3, 2))[0], 12.0, 1e-6);
    EXPECT_NEAR(bilinear_sample(g, Vec2(3.5, 2))[0], 0.5 * (g.at(0, 2, 3) + g.at(0, 2, 4)), 1e-6);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ux(0, 6), uy(0, 4);
    for (int i = 0; i < 100; ++i) {
        const double u = ux(rng), v = uy(rng);
        EXPECT_NEAR(bilinear_sample(g, Vec2(u, v))[0], 2 * u + 3 * v, 1e-5);
    }
    // Outside the grid the border is replicated.
    EXPECT_NEAR(bilinear_sample(g, Vec2(-3, -1))[0], g.at(0, 0, 0), 1e-6);
    EXPECT_NEAR(bilinear_sample(g, Vec2(40, 9))[0], g.at(0, 4, 6), 1e-6);
}

TEST(Trilinear, ReproducesTrilinearField) {
    Volume4 v(1, 4, 5, 6);
    for (int d = 0; d < 4; ++d)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x) v.at(0, d, y, x) = float(d + 10 * y + 100 * x);
    EXPECT_NEAR(trilinear_sample(v, {1.5, 2.0, 3.25})[0], 346.5, 1e-5);
    EXPECT_NEAR(trilinear_sample(v, {2, 3, 4})[0], 432.0, 1e-6);
    EXPECT_EQ(trilinear_sample(v, {-5, 0, 0})[0], trilinear_sample(v, {0, 0, 0})[0]);
}

TEST(CostVolume, MatchesTripleLoopOracle) {
    std::mt19937_64 rng(11);
    const FeatureGrid l = oracle::random_grid(4, 6, 8, rng), r = oracle::random_grid(4, 6, 8, rng);
    const CostVolume cv = build_cost_volume(l, r, 5);
    std::vector<float> cost;
    std::vector<int> mask;
    oracle::cost_volume(l, r, 5, cost, mask);
    ASSERT_EQ(cv.cost.data.size(), cost.size());
    for (std::size_t i = 0; i < cost.size(); ++i) ASSERT_EQ(cv.cost.data[i], cost[i]) << i;
    for (std::size_t i = 0; i < mask.size(); ++i) ASSERT_EQ(int(cv.masked[i]), mask[i]) << i;
}

TEST(CostVolume, SpecExamples) {
    std::mt19937_64 rng(2);
    const FeatureGrid f = oracle::random_grid(3, 5, 9, rng);
    const CostVolume same = build_cost_volume(f, f, 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 9; ++x) EXPECT_EQ(same.cost.at(c, 0, y, x), 0.0f);

    // Right view content shifted so the true disparity is 2.
    const int dstar = 2;
    FeatureGrid r(3, 5, 9);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 9; ++x) r.at(c, y, x) = x + dstar < 9 ? f.at(c, y, x + dstar) : 0.0f;
    const CostVolume shifted = build_cost_volume(f, r, 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 5; ++y)
            for (int x = dstar; x < 9; ++x) EXPECT_EQ(shifted.cost.at(c, dstar, y, x), 0.0f);

    FeatureGrid five(1, 3, 4, 1, 5.0f), three(1, 3, 4, 1, 3.0f);
    for (float v : build_cost_volume(five, three, 3).cost.data) EXPECT_EQ(v, 2.0f);

    EXPECT_THROW(build_cost_volume(FeatureGrid(1, 3, 4), FeatureGrid(1, 3, 5), 2), DimensionError);
}

TEST(CostVolume, FractionalShiftInterpolatesRightFeatures) {
    FeatureGrid l(1, 1, 6, 1, 0.0f), r(1, 1, 6);
    for (int x = 0; x < 6; ++x) r.at(0, 0, x) = float(x * x);
    const CostVolume cv = build_cost_volume(l, r, 3, 0.5);
    // bin 1 looks up column x - 0.5
    EXPECT_FLOAT_EQ(cv.cost.at(0, 1, 0, 3), -0.5f * (4.0f + 9.0f));
    EXPECT_EQ(cv.masked[cv.cost.cell(2, 0, 0)], 1);
    EXPECT_EQ(cv.masked[cv.cost.cell(2, 0, 1)], 0);
}

TEST(Aggregation, ImpulseIdentityAndConstants) {
    Volume4 impulse(1, 5, 5, 5);
    impulse.at(0, 2, 2, 2) = 1.0f;
    const Volume4 sm = box_smooth(impulse, 1);
    for (int d = 0; d < 5; ++d)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) {
                const bool near = std::abs(d - 2) <= 1 && std::abs(y - 2) <= 1 && std::abs(x - 2) <= 1;
                EXPECT_NEAR(sm.at(0, d, y, x), near ? 1.0 / 27.0 : 0.0, 1e-7);
            }

    std::mt19937_64 rng(3);
    Volume4 v(2, 3, 4, 5);
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& x : v.data) x = u(rng);
    const std::vector<double> w{1, 0, 0, 1}, b{0, 0};
    const ChannelMix identity{2, 2, w, b};
    const Volume4 same = aggregate_cost_volume(v, identity, 0);
    for (std::size_t i = 0; i < v.data.size(); ++i) EXPECT_EQ(same.data[i], v.data[i]);

    Volume4 constant(2, 3, 4, 5);
    for (std::size_t i = 0; i < constant.data.size(); ++i) constant.data[i] = i < constant.cells() ? 2.0f : -1.0f;
    const std::vector<double> w2{0.5, 2.0, -1.0, 1.0, 3.0, 0.0}, b2{0.25, -1.0, 0.5};
    const Volume4 out = aggregate_cost_volume(constant, {2, 3, w2, b2}, 1);
    const double expect[3] = {0.5 * 2 + 2.0 * -1 + 0.25, -1.0 * 2 + 1.0 * -1 - 1.0, 3.0 * 2 + 0.5};
    for (int c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < out.cells(); ++k) EXPECT_NEAR(out.data[c * out.cells() + k], expect[c], 1e-5);
}

TEST(Aggregation, SmoothingIsLinear) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(-1, 1);
    Volume4 a(2, 4, 5, 6), b(2, 4, 5, 6), mix(2, 4, 5, 6);
    for (auto& x : a.data) x = u(rng);
    for (auto& x : b.data) x = u(rng);
    const float alpha = 0.75f, beta = -1.5f;
    for (std::size_t i = 0; i < a.data.size(); ++i) mix.data[i] = alpha * a.data[i] + beta * b.data[i];
    const Volume4 sa = box_smooth(a, 1), sb = box_smooth(b, 1), sm = box_smooth(mix, 1);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(sm.data[i], alpha * sa.data[i] + beta * sb.data[i], 1e-5);
}

TEST(Confidence, SoftmaxProperties) {
    Grid4<double> logits(1, 6, 2, 3);
    std::vector<std::uint8_t> masked(logits.cells(), 0);
    const ConfidenceVolume uniform = softmax_disparity(logits, masked);
    for (double p : uniform.psi.data) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);

    logits.at(0, 4, 1, 2) = 30.0;
    const ConfidenceVolume peaked = softmax_disparity(logits, masked);
    for (int d = 0; d < 6; ++d) EXPECT_NEAR(peaked.psi.at(0, d, 1, 2), d == 4 ? 1.0 : 0.0, 1e-9);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 3);
    for (auto& v : logits.data) v = n(rng);
    masked[logits.cell(0, 0, 0)] = 1;
    masked[logits.cell(1, 0, 0)] = 1;
    for (int d = 0; d < 6; ++d) masked[logits.cell(d, 1, 1)] = 1;
    const ConfidenceVolume c = softmax_disparity(logits, masked);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            if (y == 1 && x == 1) {
                EXPECT_FALSE(c.column_valid[std::size_t(y * 3 + x)]);
                continue;
            }
            double s = 0.0;
            for (int d = 0; d < 6; ++d) {
                EXPECT_GE(c.psi.at(0, d, y, x), 0.0);
                s += c.psi.at(0, d, y, x);
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    EXPECT_EQ(c.psi.at(0, 0, 0, 0), 0.0);
    EXPECT_EQ(c.psi.at(0, 1, 0, 0), 0.0);
    const DisparityMap d = expected_disparity(c);
    EXPECT_FALSE(d.is_valid(1, 1));
}

TEST(SoftArgmax, MatchesBruteForceAndExamples) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int D = 7, H = 3, W = 4;
    VolumeStrides s;
    s.disparity_stride = 2;
    ConfidenceVolume c{Grid4<double>(1, D, H, W, s), std::vector<std::uint8_t>(H * W, 1)};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double sum = 0.0;
            for (int d = 0; d < D; ++d) sum += c.psi.at(0, d, y, x) = u(rng);
            for (int d = 0; d < D; ++d) c.psi.at(0, d, y, x) /= sum;
        }
    const auto brute = oracle::soft_argmax(c.psi.data, D, H, W, 2);
    const DisparityMap e = expected_disparity(c);
    for (int i = 0; i < H * W; ++i) {
        EXPECT_NEAR(e.values[std::size_t(i)], brute[std::size_t(i)], 1e-12);
        EXPECT_GE(e.values[std::size_t(i)], 0.0);
        EXPECT_LE(e.values[std::size_t(i)], (D - 1) * 2.0);
    }

    VolumeStrides s3;
    s3.disparity_stride = 3;
    s3.max_disparity = 72;
    ConfidenceVolume uni{Grid4<double>(1, 24, 1, 1, s3, 1.0 / 24.0), {1}};
    EXPECT_NEAR(expected_disparity(uni).values[0], 34.5, 1e-6);

    ConfidenceVolume hot{Grid4<double>(1, 8, 1, 1), {1}};
    hot.psi.at(0, 5, 0, 0) = 1.0;
    EXPECT_EQ(expected_disparity(hot).values[0], 5.0);
}

TEST(SoftArgmax, UpsamplingIsBilinearInCellCoordinates) {
    DisparityMap coarse(2, 2);
    coarse.values = {1.0, 3.0, 5.0, 7.0};
    coarse.valid = {1, 1, 1, 1};
    const DisparityMap full = upsample_disparity(coarse, 2, 4, 4);
    EXPECT_DOUBLE_EQ(full.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(full.at(0, 1), 2.0);  // pixel 1 -> cell 0.5
    EXPECT_DOUBLE_EQ(full.at(2, 2), 7.0);
    EXPECT_DOUBLE_EQ(full.at(3, 3), 7.0);  // clamped
    EXPECT_DOUBLE_EQ(full.at(1, 0), 3.0);
}

TEST(DepthMapConversion, PlaneAndMasks) {
    RectifiedRig rig;
    rig.focal_px = 1000.0;
    rig.baseline_m = 0.1;
    DisparityMap d(2, 2);
    d.values = {50.0, 50.0, 0.0, 50.0};
    d.valid = {1, 0, 1, 1};
    const DepthMap z = disparity_map_to_depth_map(d, rig);
    EXPECT_DOUBLE_EQ(z.at(0, 0), 2.0);
    EXPECT_FALSE(z.is_valid(0, 1));
    EXPECT_FALSE(z.is_valid(1, 0));  // zero disparity is background
    EXPECT_TRUE(z.is_valid(1, 1));
}
