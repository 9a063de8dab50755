#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tfpf/temporal_mesh.hpp"

namespace tfpf {

/// Vector-space hooks used by the history templates. Scalar overloads live
/// here; field overloads are found by ADL.
inline double zero_like(double) { return 0.0; }
inline void axpy(double a, double x, double& y) { y += a * x; }
inline double inner(double x, double y) { return x * y; }

/// Singular power kernel omega_beta(t) = t^(beta-1) / Gamma(beta).
inline double omega(double beta, double t) {
    if (t < 0.0) throw std::domain_error("omega: negative argument");
    if (t == 0.0) {
        if (beta > 1.0) return 0.0;
        if (beta == 1.0) return 1.0;
        return std::numeric_limits<double>::infinity();
    }
    return std::pow(t, beta - 1.0) / std::tgamma(beta);
}

/// L1+ convolution weights of one step.
///
/// weights[j] = b_j^{(nu,n)} multiplies the increment u^{n-j}; weights[0]
/// is the implicit coefficient of the current step.
struct KernelRow {
    double order = 0.0;
    std::size_t step = 0;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t j) const { return weights[j]; }
};

/// b~_0 = 2 b_0, b~_j = b_j for j >= 1.
struct ModifiedKernelRow {
    double order = 0.0;
    std::size_t step = 0;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t j) const { return weights[j]; }
};

namespace detail {

// x^p - (x - tau)^p for x >= tau > 0, p > 0, free of cancellation when tau << x.
inline double power_drop(double x, double tau, double p) {
    if (tau >= x) return std::pow(x, p);
    return -std::pow(x, p) * std::expm1(p * std::log1p(-tau / x));
}

}  // namespace detail

/// Closed-form kernel row for step n (1 <= n <= N) at order nu in [0,1]:
///   b_0     = tau_n^(nu-1) / Gamma(nu+2)
///   b_{n-k} = [w(t_n - t_{k-1}) - w(t_{n-1} - t_{k-1}) - w(t_n - t_k) + w(t_{n-1} - t_k)] / (tau_n tau_k),
/// with w = omega_{nu+2}. At nu = 0 the lagged weights vanish identically.
inline KernelRow kernel_row(const TemporalMesh& mesh, std::size_t n, double nu) {
    if (n < 1 || n > mesh.steps()) {
        throw std::out_of_range("kernel_row: step " + std::to_string(n) + " outside [1, " + std::to_string(mesh.steps()) + "]");
    }
    if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("kernel_row: order must lie in [0,1]");

    KernelRow row;
    row.order = nu;
    row.step = n;
    row.weights.assign(n, 0.0);

    const double tau_n = mesh.step(n);
    const double g2 = std::tgamma(nu + 2.0);
    if (nu == 0.0) {
        row.weights[0] = 1.0 / tau_n;  // pow(tau, -1) can differ in the last bit
        return row;
    }
    row.weights[0] = std::pow(tau_n, nu - 1.0) / g2;

    const double p = nu + 1.0;
    const double t_n = mesh.node(n);
    for (std::size_t k = 1; k < n; ++k) {
        const double tau_k = mesh.step(k);
        const double far = detail::power_drop(t_n - mesh.node(k - 1), tau_n, p);
        const double near = detail::power_drop(t_n - mesh.node(k), tau_n, p);
        row.weights[n - k] = (far - near) / (g2 * tau_n * tau_k);
    }
    return row;
}

inline ModifiedKernelRow modify_row(const KernelRow& row) {
    ModifiedKernelRow out{row.order, row.step, row.weights};
    if (!out.weights.empty()) out.weights[0] *= 2.0;
    return out;
}

/// Append-only list of increments u^1, ..., u^n (1-based in the math,
/// 0-based in storage).
template <class T>
class DifferenceHistory {
public:
    DifferenceHistory() = default;
    explicit DifferenceHistory(std::vector<T> items) : items_(std::move(items)) {}

    void push(T u) { items_.push_back(std::move(u)); }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    /// u^k for 1 <= k <= size().
    const T& at(std::size_t k) const { return items_.at(k - 1); }
    const T& back() const { return items_.back(); }
    const std::vector<T>& items() const { return items_; }

    /// Sum of u^1..u^m.
    T partial_sum(std::size_t m, const T& zero) const {
        T s = zero;
        for (std::size_t k = 1; k <= m; ++k) axpy(1.0, at(k), s);
        return s;
    }

private:
    std::vector<T> items_;
};

/// Explicit history part sum_{k=1}^{n-1} b_{n-k} u^k of the L1+ formula.
/// `zero` fixes the shape of the result.
template <class T>
T lagged_sum(const KernelRow& row, const DifferenceHistory<T>& history, const T& zero) {
    const std::size_t n = row.step;
    if (history.size() + 1 < n) {
        throw std::invalid_argument("lagged_sum: history has " + std::to_string(history.size()) +
                                    " increments, row needs " + std::to_string(n - 1));
    }
    T s = zero;
    for (std::size_t k = 1; k < n; ++k) {
        const double b = row.weights[n - k];
        if (b != 0.0) axpy(b, history.at(k), s);
    }
    return s;
}

inline double lagged_sum(const KernelRow& row, const DifferenceHistory<double>& history) {
    return lagged_sum(row, history, 0.0);
}

/// Squared norms of the tail sums, q[k] = |u^{k+1} + ... + u^m|^2 for k = 0..m-1.
template <class T, class NormSq>
std::vector<double> tail_norms(const DifferenceHistory<T>& history, std::size_t m, NormSq&& norm_sq) {
    if (m > history.size()) throw std::invalid_argument("tail_norms: m exceeds history length");
    std::vector<double> q(m, 0.0);
    if (m == 0) return q;
    T s = history.at(m);
    q[m - 1] = norm_sq(s);
    for (std::size_t k = m - 1; k >= 1; --k) {
        axpy(1.0, history.at(k), s);
        q[k - 1] = norm_sq(s);
    }
    return q;
}

/// A(u^n) from the modified row of step n and the tail norms of u^1..u^n.
inline double functional_A(const ModifiedKernelRow& mod, const std::vector<double>& tails) {
    const std::size_t n = mod.step;
    if (tails.size() != n) throw std::invalid_argument("functional_A: tail count must equal step index");
    double a = 0.5 * mod.weights[n - 1] * tails[0];
    for (std::size_t k = 1; k < n; ++k) a += 0.5 * (mod.weights[n - k - 1] - mod.weights[n - k]) * tails[k];
    return a;
}

/// R(u^n) from the modified rows of steps n-1 and n and the tail norms of u^1..u^{n-1}.
inline double functional_R(const ModifiedKernelRow& prev, const ModifiedKernelRow& cur, const std::vector<double>& tails_prev) {
    const std::size_t n = cur.step;
    if (n < 2 || prev.step + 1 != n) throw std::invalid_argument("functional_R: need rows n-1 and n with n >= 2");
    if (tails_prev.size() != n - 1) throw std::invalid_argument("functional_R: tail count must equal n-1");
    const auto& bp = prev.weights;
    const auto& bc = cur.weights;
    double r = 0.5 * (bp[n - 2] - bc[n - 1]) * tails_prev[0];
    for (std::size_t k = 1; k + 2 <= n; ++k) {
        r += 0.5 * (bp[n - 2 - k] - bp[n - 1 - k] - bc[n - 1 - k] + bc[n - k]) * tails_prev[k];
    }
    return r;
}

template <class T, class NormSq>
double functional_A(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu, NormSq&& norm_sq) {
    if (n < 1 || history.size() < n) throw std::invalid_argument("functional_A: need n >= 1 increments");
    return functional_A(modify_row(kernel_row(mesh, n, nu)), tail_norms(history, n, norm_sq));
}

template <class T>
double functional_A(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu) {
    return functional_A(history, mesh, n, nu, [](const T& x) { return inner(x, x); });
}

template <class T, class NormSq>
double functional_R(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu, NormSq&& norm_sq) {
    if (n < 2 || history.size() < n - 1) throw std::invalid_argument("functional_R: need n >= 2 and n-1 increments");
    return functional_R(modify_row(kernel_row(mesh, n - 1, nu)), modify_row(kernel_row(mesh, n, nu)),
                        tail_norms(history, n - 1, norm_sq));
}

template <class T>
double functional_R(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu) {
    return functional_R(history, mesh, n, nu, [](const T& x) { return inner(x, x); });
}

/// Both sides of the discrete gradient structure
///   <sum_k b_{n-k} u^k, u^n> = A(u^n) - A(u^{n-1}) + R(u^n).
struct DgsBalance {
    double lhs = 0.0;
    double a_cur = 0.0;
    double a_prev = 0.0;
    double r_cur = 0.0;

    double residual() const { return lhs - (a_cur - a_prev + r_cur); }
    double scale() const {
        return std::max({std::abs(lhs), std::abs(a_cur), std::abs(a_prev), std::abs(r_cur)});
    }
    double relative() const {
        const double s = scale();
        return s > 0.0 ? std::abs(residual()) / s : 0.0;
    }
};

template <class T, class Inner>
DgsBalance dgs_residual(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu, Inner&& ip) {
    if (n < 2 || history.size() < n) throw std::invalid_argument("dgs_residual: need n >= 2 and n increments");
    auto norm_sq = [&ip](const T& x) { return ip(x, x); };
    const KernelRow row = kernel_row(mesh, n, nu);
    const ModifiedKernelRow cur = modify_row(row);
    const ModifiedKernelRow prev = modify_row(kernel_row(mesh, n - 1, nu));

    T conv = lagged_sum(row, history, zero_like(history.at(n)));
    axpy(row.weights[0], history.at(n), conv);

    DgsBalance out;
    out.lhs = ip(conv, history.at(n));
    const auto tails_cur = tail_norms(history, n, norm_sq);
    const auto tails_prev = tail_norms(history, n - 1, norm_sq);
    out.a_cur = functional_A(cur, tails_cur);
    out.a_prev = functional_A(prev, tails_prev);
    out.r_cur = functional_R(prev, cur, tails_prev);
    return out;
}

template <class T>
DgsBalance dgs_residual(const DifferenceHistory<T>& history, const TemporalMesh& mesh, std::size_t n, double nu) {
    return dgs_residual(history, mesh, n, nu, [](const T& x, const T& y) { return inner(x, y); });
}

/// True when b~ is nonincreasing along the row.
inline bool is_monotone(const ModifiedKernelRow& mod) {
    for (std::size_t j = 1; j < mod.size(); ++j)
        if (mod.weights[j] > mod.weights[j - 1]) return false;
    return true;
}

}  // namespace tfpf
