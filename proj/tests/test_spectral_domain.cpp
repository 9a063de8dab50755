#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "tfpf/io.hpp"
#include "tfpf/spectral_domain.hpp"

using namespace tfpf;

namespace {

constexpr double kPi = std::numbers::pi;

PeriodicGrid square(int n) { return PeriodicGrid(2.0 * kPi, 2.0 * kPi, n, n); }

double max_diff(const ScalarField& a, const ScalarField& b) { return norm_linf(a - b); }

ScalarField random_field(const PeriodicGrid& g, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    ScalarField u(g);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = d(gen);
    return u;
}

}  // namespace

TEST(PeriodicGrid, Validation) {
    EXPECT_THROW(PeriodicGrid(1.0, 1.0, 0, 4), std::invalid_argument);
    EXPECT_THROW(PeriodicGrid(-1.0, 1.0, 4, 4), std::invalid_argument);
    const PeriodicGrid g(2.0, 3.0, 4, 6);
    EXPECT_EQ(g.size(), 24u);
    EXPECT_DOUBLE_EQ(g.area(), 6.0);
    EXPECT_DOUBLE_EQ(g.cell_area(), 0.25);
    EXPECT_DOUBLE_EQ(g.x(1), 0.5);
}

TEST(ScalarField, Reductions) {
    const auto g = square(16);
    const ScalarField one(g, 1.0);
    EXPECT_NEAR(integral(one), 4.0 * kPi * kPi, 1e-12);
    EXPECT_NEAR(mean(one), 1.0, 1e-15);
    const auto s = ScalarField::from_function(g, [](double x, double) { return std::sin(x); });
    EXPECT_NEAR(inner(s, s), 2.0 * kPi * kPi, 1e-12);
    EXPECT_NEAR(mean(s), 0.0, 1e-15);
    EXPECT_THROW(inner(s, ScalarField(square(8))), std::invalid_argument);
}

TEST(SpectralOps, Laplacian) {
    const auto g = square(32);
    const SpectralOps ops(g);
    EXPECT_LT(norm_linf(ops.laplacian(ScalarField(g, 3.0))), 1e-13);
    const auto s = ScalarField::from_function(g, [](double x, double) { return std::sin(x); });
    EXPECT_LT(max_diff(ops.laplacian(s), -1.0 * s), 1e-13);
    const auto m = ScalarField::from_function(g, [](double x, double y) { return std::sin(2 * x) * std::cos(2 * y); });
    EXPECT_LT(max_diff(ops.laplacian(m), -8.0 * m), 1e-12);
    EXPECT_LT(max_diff(ops.neg_laplacian(m), 8.0 * m), 1e-12);
}

TEST(SpectralOps, LaplacianOnRectangle) {
    const PeriodicGrid g(32.0, 16.0, 32, 16);
    const SpectralOps ops(g);
    const double kx = 2.0 * kPi / 32.0 * 3, ky = 2.0 * kPi / 16.0 * 2;
    const auto u = ScalarField::from_function(g, [&](double x, double y) { return std::cos(kx * x + ky * y); });
    EXPECT_LT(max_diff(ops.laplacian(u), -(kx * kx + ky * ky) * u), 1e-12);
}

TEST(SpectralOps, OnePlusLapSquared) {
    const auto g = square(32);
    const SpectralOps ops(g);
    const auto s1 = ScalarField::from_function(g, [](double x, double) { return std::sin(x); });
    // roundoff scales with the largest symbol value, (1 - 16^2)^2 here
    EXPECT_LT(norm_linf(ops.one_plus_lap_sq(s1)), 1e-10);
    EXPECT_LT(max_diff(ops.one_plus_lap_sq(ScalarField(g, 1.0)), ScalarField(g, 1.0)), 1e-14);
    const auto s2 = ScalarField::from_function(g, [](double x, double) { return std::sin(2 * x); });
    EXPECT_LT(max_diff(ops.one_plus_lap_sq(s2), 9.0 * s2), 1e-10);
}

TEST(SpectralOps, ForwardInverseRoundtrip) {
    const auto g = PeriodicGrid(3.0, 5.0, 12, 10);
    const SpectralOps ops(g);
    const auto u = random_field(g, 1);
    std::vector<std::complex<double>> c;
    ops.forward(u, c);
    EXPECT_EQ(c.size(), ops.modes());
    EXPECT_LT(max_diff(ops.inverse(c), u), 1e-14);
}

TEST(SpectralOps, ApplySumMatchesSeparateApplies) {
    const auto g = square(16);
    const SpectralOps ops(g);
    const auto u = random_field(g, 2), v = random_field(g, 3);
    const auto s1 = ops.make_symbol([](double kx, double ky) { return 1.0 + kx * kx; });
    const auto s2 = ops.make_symbol([](double, double ky) { return ky * ky * ky * ky; });
    EXPECT_LT(max_diff(ops.apply_sum(s1, u, s2, v), ops.apply(s1, u) + ops.apply(s2, v)), 1e-10);
}

TEST(SpectralOps, NormLinfOfProfile) {
    const auto g = square(64);
    const auto p = ScalarField::from_function(g, [](double x, double y) { return 0.25 * std::sin(2 * x) * std::cos(2 * y) + 0.45; });
    EXPECT_NEAR(norm_linf(p), 0.7, 1e-15);
}

TEST(SpectralOps, DiagonalSolve) {
    const auto g = square(32);
    const SpectralOps ops(g);
    const auto s = ScalarField::from_function(g, [](double x, double) { return std::sin(x); });
    EXPECT_LT(max_diff(ops.diagonal_solve(1.0, ops.neg_laplacian_symbol(), s), 0.5 * s), 1e-14);

    const auto zero = ops.make_symbol([](double, double) { return 0.0; });
    const auto r = random_field(g, 4);
    EXPECT_LT(max_diff(ops.diagonal_solve(1.0, zero, r), r), 1e-14);

    const double b0 = 3.7, M = 0.01, eps = 0.25;
    const auto op = ops.make_symbol([&](double kx, double ky) { return 0.5 * M * eps * eps * (kx * kx + ky * ky); });
    const auto x = ops.diagonal_solve(b0, op, r);
    ScalarField back = ops.apply(op, x);
    axpy(b0, x, back);
    EXPECT_LT(norm_l2(back - r) / norm_l2(r), 1e-13);
}

TEST(SpectralOps, DiagonalSolveSingularMode) {
    const SpectralOps ops(square(8));
    EXPECT_THROW(ops.diagonal_solve(0.0, ops.neg_laplacian_symbol(), ScalarField(square(8), 1.0)), SingularModeError);
}

TEST(SpectralOps, NegSobolevNorm) {
    const auto g = square(32);
    const SpectralOps ops(g);
    const auto s = ScalarField::from_function(g, [](double x, double) { return std::sin(x); });
    EXPECT_NEAR(ops.neg_sobolev_norm_sq(s), 2.0 * kPi * kPi, 1e-11);
    const auto c = ScalarField::from_function(g, [](double x, double y) { return std::cos(2 * x + 3 * y) + 5.0; });
    EXPECT_NEAR(ops.neg_sobolev_norm_sq(c), 2.0 * kPi * kPi / 13.0, 1e-11);
    // agrees with <u, (-Lap)^{-1} u> for mean-free data
    auto u = random_field(g, 9);
    u += -mean(u);
    const auto inv = ops.make_symbol([](double kx, double ky) {
        const double k2 = kx * kx + ky * ky;
        return k2 == 0.0 ? 0.0 : 1.0 / k2;
    });
    EXPECT_NEAR(ops.neg_sobolev_norm_sq(u), inner(u, ops.apply(inv, u)), 1e-12);
}

TEST(PeriodicGrid, RejectsOddOrTinySizes) {
    EXPECT_THROW(PeriodicGrid(1.0, 1.0, 15, 8), std::invalid_argument);
    EXPECT_THROW(PeriodicGrid(1.0, 1.0, 2, 8), std::invalid_argument);
}

TEST(SpectralOps, NonSquareGrid) {
    const PeriodicGrid g(2.0 * kPi, 2.0 * kPi, 16, 8);
    const SpectralOps ops(g);
    const auto u = ScalarField::from_function(g, [](double x, double y) { return std::sin(3 * x) * std::cos(y); });
    EXPECT_LT(max_diff(ops.laplacian(u), -10.0 * u), 1e-12);
    EXPECT_NEAR(ops.neg_sobolev_norm_sq(u), inner(u, u) / 10.0, 1e-12);
}

TEST(Fpf1, RoundtripAndLayout) {
    const PeriodicGrid g(1.0, 1.0, 6, 4);
    ScalarField u(g);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = 0.5 * static_cast<double>(k) - 1.0;
    std::stringstream ss;
    write_fpf1(ss, u);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 4u + 8u + 24u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "FPF1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 6u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 4u);
    // 1.0 at index 4: 0x3FF0000000000000 little-endian
    EXPECT_EQ(static_cast<unsigned char>(bytes[12 + 4 * 8 + 7]), 0x3Fu);
    EXPECT_EQ(static_cast<unsigned char>(bytes[12 + 4 * 8 + 6]), 0xF0u);
    const auto v = read_fpf1(ss, g);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_EQ(u[k], v[k]);
}

TEST(Fpf1, RejectsBadInput) {
    std::stringstream bad("XXXX");
    EXPECT_THROW(read_fpf1(bad, PeriodicGrid(1.0, 1.0, 4, 4)), std::runtime_error);
    std::stringstream ss;
    write_fpf1(ss, ScalarField(PeriodicGrid(1.0, 1.0, 4, 6)));
    EXPECT_THROW(read_fpf1(ss, PeriodicGrid(1.0, 1.0, 4, 4)), std::runtime_error);
}

TEST(FieldCsv, Layout) {
    const PeriodicGrid g(4.0, 4.0, 4, 4);
    ScalarField u(g);
    u[1] = 0.5;
    std::ostringstream os;
    write_field_csv(os, u);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, 30), "x,y,value\n0,0,0\n1,0,0.5\n2,0,0\n");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 17);
}
