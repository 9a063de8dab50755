#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tfpf/fractional_kernels.hpp"
#include "tfpf/temporal_mesh.hpp"

// Slow reference for the kernel rows by nested adaptive quadrature of
//   b_{n-k} = 1/(tau_n tau_k) int_{t_{n-1}}^{t_n} int_{t_{k-1}}^{min(t_k, t)} omega_nu(t - s) ds dt.
// Requires boost headers.

namespace tfpf::oracle {

namespace detail {

// Inner integrals are resolved tighter than the outer one so that their
// noise does not stall the outer error estimate.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-14) {
    // mapped to [0, 1]: the adaptive rule stalls on very short raw intervals
    const double h = b - a;
    auto g = [&](double x) { return h * f(a + h * x); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 12, tol);
}

// int_0^len (d + u)^(nu-1) du for d >= 0. For d > 0 the range u > d is
// integrated in log(u), where the integrand is smooth however small d is.
inline double inner_integral(double d, double len, double nu) {
    if (len <= 0.0) return 0.0;
    if (d <= 0.0) {
        // u = len z^(1/nu) removes the endpoint singularity
        const double p = 1.0 / nu;
        return integrate([&](double z) {
            return z <= 0.0 ? 0.0 : std::pow(len * std::pow(z, p), nu - 1.0) * len * p * std::pow(z, p - 1.0);
        }, 0.0, 1.0);
    }
    const double a = std::min(d, len);
    double s = integrate([&](double u) { return std::pow(d + u, nu - 1.0); }, 0.0, a);
    if (len > d) {
        s += integrate([&](double v) {
            const double u = std::exp(v);
            return std::pow(d + u, nu - 1.0) * u;
        }, std::log(d), std::log(len));
    }
    return s;
}

}  // namespace detail

/// Entry b_j of row n (0 <= j < n) by quadrature; nu in (0, 1].
inline double kernel_entry(const TemporalMesh& mesh, std::size_t n, std::size_t j, double nu) {
    if (n < 1 || n > mesh.steps() || j >= n) throw std::out_of_range("oracle::kernel_entry: index outside row");
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("oracle::kernel_entry: order must lie in (0,1]");
    const std::size_t k = n - j;
    const double t_prev = mesh.node(n - 1);
    const double tau_n = mesh.step(n);
    const double tau_k = mesh.step(k);
    const double t_k = mesh.node(k);

    double val;
    if (k + 1 >= n) {
        // Singular corner at t = t_{n-1}: outer variable d = t - t_{n-1} in log scale.
        auto outer = [&](double v) {
            const double d = std::exp(v);
            return (k == n ? detail::inner_integral(0.0, d, nu) : detail::inner_integral(d, tau_k, nu)) * d;
        };
        val = detail::integrate(outer, std::log(tau_n) - 40.0, std::log(tau_n), 1e-12);
    } else {
        val = detail::integrate([&](double t) { return detail::inner_integral(t - t_k, tau_k, nu); }, t_prev, mesh.node(n), 1e-12);
    }
    return val / (std::tgamma(nu) * tau_n * tau_k);
}

inline std::vector<double> kernel_row(const TemporalMesh& mesh, std::size_t n, double nu) {
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = kernel_entry(mesh, n, j, nu);
    return row;
}

/// Largest relative deviation |b - b_oracle| / |b_oracle| over all rows of the mesh.
inline double max_relative_deviation(const TemporalMesh& mesh, double nu) {
    double worst = 0.0;
    for (std::size_t n = 1; n <= mesh.steps(); ++n) {
        const KernelRow closed = tfpf::kernel_row(mesh, n, nu);
        for (std::size_t j = 0; j < n; ++j) {
            const double ref = kernel_entry(mesh, n, j, nu);
            const double dev = std::abs(closed.weights[j] - ref) / std::abs(ref);
            if (!(dev <= worst)) worst = dev;
        }
    }
    return worst;
}

}  // namespace tfpf::oracle
