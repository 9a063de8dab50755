#include <cmath>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "tfpf/temporal_mesh.hpp"

using namespace tfpf;

TEST(TemporalMesh, RejectsBadNodes) {
    EXPECT_THROW(TemporalMesh(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.0, 1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.0, 1.0, 0.5}), std::invalid_argument);
    EXPECT_NO_THROW(TemporalMesh({0.0}));
}

TEST(TemporalMesh, DefaultIsSingleNode) {
    const TemporalMesh m;
    EXPECT_EQ(m.steps(), 0u);
    EXPECT_EQ(m.horizon(), 0.0);
}

TEST(BuildUniform, FourSteps) {
    const auto m = build_uniform(1.0, 4);
    ASSERT_EQ(m.steps(), 4u);
    const double want[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t k = 0; k <= 4; ++k) EXPECT_DOUBLE_EQ(m.node(k), want[k]);
}

TEST(BuildUniform, SingleStep) {
    const auto m = build_uniform(1.0, 1);
    ASSERT_EQ(m.steps(), 1u);
    EXPECT_EQ(m.node(1), 1.0);
}

TEST(BuildUniform, LongHorizon) {
    const auto m = build_uniform(500.0, 1000);
    EXPECT_EQ(m.horizon(), 500.0);
    for (std::size_t k = 1; k <= m.steps(); ++k) EXPECT_NEAR(m.step(k), 0.5, 1e-12);
    for (std::size_t k = 2; k <= m.steps(); ++k) EXPECT_NEAR(m.ratio(k), 1.0, 1e-10);
}

TEST(BuildUniform, RejectsBadArguments) {
    EXPECT_THROW(build_uniform(1.0, 0), std::invalid_argument);
    EXPECT_THROW(build_uniform(-1.0, 4), std::invalid_argument);
}

TEST(BuildGraded, Quadratic) {
    const auto m = build_graded(1.0, 4, 2.0);
    const double want[] = {0.0, 1.0 / 16, 4.0 / 16, 9.0 / 16, 1.0};
    for (std::size_t k = 0; k <= 4; ++k) EXPECT_DOUBLE_EQ(m.node(k), want[k]);
    EXPECT_DOUBLE_EQ(m.ratio(2), 3.0);
    EXPECT_DOUBLE_EQ(m.ratio(3), 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.ratio(4), 7.0 / 5.0);
    EXPECT_THROW(m.ratio(1), std::out_of_range);
}

TEST(BuildGraded, GammaOneIsUniform) {
    const auto g = build_graded(1.0, 8, 1.0);
    const auto u = build_uniform(1.0, 8);
    for (std::size_t k = 0; k <= 8; ++k) EXPECT_NEAR(g.node(k), u.node(k), 1e-15);
}

TEST(BuildGraded, HitsHorizonExactly) {
    EXPECT_EQ(build_graded(3.0, 7, 10.0 / 3.0).horizon(), 3.0);
    EXPECT_THROW(build_graded(1.0, 4, 0.5), std::invalid_argument);
}

TEST(RatioBound, Values) {
    EXPECT_NEAR(ratio_bound(0.5, 1.0), 0.060903821838310723, 1e-14);
    EXPECT_NEAR(ratio_bound(0.3, 1.0), 0.0014340941521659286, 1e-15);
    EXPECT_NEAR(ratio_bound(0.6, 1.0), 0.13768343470942327, 1e-14);
    EXPECT_NEAR(ratio_bound(0.4, 1.0), 0.01618419657480775, 1e-14);
    EXPECT_NEAR(ratio_bound(0.5, 2.0), 0.11225109816632422, 1e-14);
    EXPECT_NEAR(ratio_bound(0.5, 0.5), 0.028031654826530346, 1e-14);
    // the difference quotient loses digits as nu -> 1
    EXPECT_NEAR(ratio_bound(0.9, 1.0), 0.45846818102255958, 1e-13);
    EXPECT_LT(ratio_bound(0.1, 1.0), 1e-13);
    EXPECT_EQ(ratio_bound(0.0, 2.0), 0.0);
}

TEST(RatioBound, RejectsBadArguments) {
    EXPECT_THROW(ratio_bound(1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(ratio_bound(-0.1, 1.0), std::invalid_argument);
    EXPECT_THROW(ratio_bound(0.5, 0.0), std::invalid_argument);
}

TEST(CheckMesh, UniformPasses) {
    const auto r = check_mesh(build_uniform(1.0, 10), 0.5);
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.checks.size(), 8u);
}

TEST(CheckMesh, GradedMeshGolden) {
    // nu = 0.4, gamma = 10/3, N = 16: every constraint holds; the tightest
    // margin rho_{k+1} - H(rho_k) is 1.1481952948850158.
    const auto m = build_graded(1.0, 16, 10.0 / 3.0);
    const auto r = check_mesh(m, 0.4);
    ASSERT_EQ(r.checks.size(), 14u);
    EXPECT_TRUE(r.pass());
    double margin = INFINITY;
    for (const auto& c : r.checks) margin = std::min(margin, c.rho_next - c.bound);
    EXPECT_NEAR(margin, 1.1481952948850158, 1e-12);
    EXPECT_NEAR(r.checks.front().bound, 0.11812605737726642, 1e-13);
    EXPECT_NEAR(r.checks.back().bound, 0.020089008242576388, 1e-13);
}

TEST(CheckMesh, DetectsSharpShrink) {
    const TemporalMesh m({0.0, 1.0, 2.0, 3.0, 3.0001});
    const auto r = check_mesh(m, 0.5);
    EXPECT_FALSE(r.pass());
    EXPECT_FALSE(r.checks.back().ok);
    EXPECT_TRUE(check_mesh(m, 0.0).pass());
}

TEST(AdaptiveStep, ZeroGradientGivesTauMax) {
    AdaptiveParams p;
    p.kernel_order = 0.6;
    EXPECT_EQ(adaptive_next_step(0.1, 1.0, 0.0, p), 0.5);
}

TEST(AdaptiveStep, LargeGradientGivesTauMin) {
    AdaptiveParams p;
    EXPECT_NEAR(adaptive_next_step(1e-3, 0.0, 1e12, p), 1e-3, 1e-18);
}

TEST(AdaptiveStep, WorkedExample) {
    AdaptiveParams p;
    p.lambda = 100.0;
    p.tau_min = 1e-3;
    p.tau_max = 0.5;
    p.kernel_order = 0.6;
    // sensed 0.5 / sqrt(901) against the floor H(1) * 0.1
    EXPECT_NEAR(adaptive_next_step(0.1, 1.0, 3.0, p), 0.016657415116319239, 1e-15);
    EXPECT_GT(0.016657415116319239, 0.013768343470942327);
    // larger gradient: the ratio floor wins
    EXPECT_NEAR(adaptive_next_step(0.1, 1.0, 10.0, p), 0.013768343470942327, 1e-15);
}

TEST(AdaptiveController, BuildsAdmissibleMeshToHorizon) {
    AdaptiveParams p;
    p.kernel_order = 0.5;
    AdaptiveController ctl(3.0, p);
    double grad = 0.0;
    int steps = 0;
    while (!ctl.done()) {
        ctl.accept(ctl.propose(grad));
        grad = steps % 5 == 0 ? 20.0 : 0.1;
        ++steps;
    }
    const auto m = ctl.mesh();
    EXPECT_EQ(m.horizon(), 3.0);
    EXPECT_EQ(m.step(1), p.tau_min);
    EXPECT_TRUE(check_mesh(m, 0.5).pass());
    for (std::size_t k = 1; k <= m.steps(); ++k) EXPECT_LE(m.step(k), p.tau_max * (1 + 1e-12));
}

TEST(AdaptiveController, ZeroHorizonIsDone) {
    AdaptiveController ctl(0.0, AdaptiveParams{});
    EXPECT_TRUE(ctl.done());
}

TEST(MeshCsv, Layout) {
    std::ostringstream os;
    write_mesh_csv(os, build_graded(1.0, 2, 2.0));
    EXPECT_EQ(os.str(), "k,t,tau,rho\n0,0,,\n1,0.25,0.25,\n2,1,0.75,3\n");
}
