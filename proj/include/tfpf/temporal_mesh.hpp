#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfpf {

/// Nonuniform temporal grid 0 = t_0 < t_1 < ... < t_N = T.
///
/// Steps are 1-based to match the usual numbering: step(k) = t_k - t_{k-1}
/// for 1 <= k <= N and ratio(k) = step(k) / step(k-1) for 2 <= k <= N.
/// Immutable after construction.
class TemporalMesh {
public:
    TemporalMesh() : nodes_{0.0} {}

    explicit TemporalMesh(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.empty() || nodes_.front() != 0.0) {
            throw std::invalid_argument("TemporalMesh: first node must be t_0 = 0");
        }
        for (std::size_t k = 1; k < nodes_.size(); ++k) {
            if (!(nodes_[k] > nodes_[k - 1]) || !std::isfinite(nodes_[k])) {
                throw std::invalid_argument("TemporalMesh: nodes must be finite and strictly increasing (k = " +
                                            std::to_string(k) + ")");
            }
        }
    }

    /// Number of steps N.
    std::size_t steps() const { return nodes_.size() - 1; }
    double horizon() const { return nodes_.back(); }
    double node(std::size_t k) const { return nodes_.at(k); }
    std::span<const double> nodes() const { return nodes_; }

    double step(std::size_t k) const {
        if (k < 1 || k > steps()) throw std::out_of_range("TemporalMesh::step: index out of range");
        return nodes_[k] - nodes_[k - 1];
    }

    double ratio(std::size_t k) const {
        if (k < 2 || k > steps()) throw std::out_of_range("TemporalMesh::ratio: index out of range");
        return step(k) / step(k - 1);
    }

    /// Midpoint t_{k-1/2} of step k.
    double midpoint(std::size_t k) const { return 0.5 * (nodes_.at(k - 1) + nodes_.at(k)); }

    /// Mesh truncated to its first `n` steps.
    TemporalMesh prefix(std::size_t n) const {
        if (n > steps()) throw std::out_of_range("TemporalMesh::prefix");
        return TemporalMesh(std::vector<double>(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(n + 1)));
    }

    /// Mesh with every coordinate multiplied by c > 0.
    TemporalMesh scaled(double c) const {
        std::vector<double> t(nodes_);
        for (auto& x : t) x *= c;
        return TemporalMesh(std::move(t));
    }

    bool operator==(const TemporalMesh&) const = default;

private:
    std::vector<double> nodes_;
};

inline TemporalMesh build_uniform(double horizon, long count) {
    if (!(horizon > 0.0)) throw std::invalid_argument("build_uniform: horizon must be positive");
    if (count < 1) throw std::invalid_argument("build_uniform: step count must be >= 1");
    std::vector<double> t(static_cast<std::size_t>(count) + 1);
    for (long n = 0; n <= count; ++n) t[static_cast<std::size_t>(n)] = horizon * static_cast<double>(n) / static_cast<double>(count);
    t.back() = horizon;
    return TemporalMesh(std::move(t));
}

/// Graded mesh t_n = (n/N)^gamma * T, concentrating steps near t = 0.
inline TemporalMesh build_graded(double horizon, long count, double gamma) {
    if (!(gamma >= 1.0)) throw std::invalid_argument("build_graded: grading exponent must be >= 1");
    if (gamma == 1.0) return build_uniform(horizon, count);
    if (!(horizon > 0.0)) throw std::invalid_argument("build_graded: horizon must be positive");
    if (count < 1) throw std::invalid_argument("build_graded: step count must be >= 1");
    std::vector<double> t(static_cast<std::size_t>(count) + 1, 0.0);
    for (long n = 1; n < count; ++n) {
        const double s = static_cast<double>(n) / static_cast<double>(count);
        t[static_cast<std::size_t>(n)] = horizon * std::exp(gamma * std::log(s));
    }
    t.back() = horizon;
    return TemporalMesh(std::move(t));
}

/// Lower bound H_nu(rho) on the next step ratio that keeps the modified
/// L1+ kernels monotone. nu = 0 is the integer-order limit: no constraint.
inline double ratio_bound(double nu, double rho) {
    if (!(nu >= 0.0 && nu < 1.0)) throw std::invalid_argument("ratio_bound: order must lie in [0,1)");
    if (!(rho > 0.0)) throw std::invalid_argument("ratio_bound: ratio must be positive");
    if (nu == 0.0) return 0.0;
    const double p = 1.0 + nu;
    // h(s) = (1+s)^p - s^p - 1, evaluated without cancellation for small s.
    auto h = [p](double s) { return std::expm1(p * std::log1p(s)) - std::pow(s, p); };
    const double num = 2.0 * h(rho) - h(2.0 * rho);
    const double den = std::pow(rho, nu) * (4.0 - std::pow(2.0, p));
    const double q = num / den;
    if (!(q > 0.0)) return 0.0;
    return std::pow(q, 1.0 / nu);
}

struct RatioCheck {
    std::size_t k;     // constraint rho_{k+1} >= H(rho_k)
    double rho_next;
    double bound;
    bool ok;
};

struct MeshAdmissibility {
    double nu = 0.0;
    std::vector<RatioCheck> checks;
    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const RatioCheck& c) { return c.ok; });
    }
};

/// Evaluates rho_{k+1} >= H_nu(rho_k) for every k >= 2.
inline MeshAdmissibility check_mesh(const TemporalMesh& mesh, double nu) {
    MeshAdmissibility report;
    report.nu = nu;
    for (std::size_t k = 2; k + 1 <= mesh.steps(); ++k) {
        const double bound = ratio_bound(nu, mesh.ratio(k));
        const double next = mesh.ratio(k + 1);
        report.checks.push_back({k, next, bound, next >= bound});
    }
    return report;
}

struct AdaptiveParams {
    double lambda = 100.0;
    double tau_min = 1e-3;
    double tau_max = 0.5;
    double kernel_order = 0.0;  // nu = 1 - alpha

    void validate() const {
        if (!(tau_min > 0.0 && tau_min <= tau_max)) throw std::invalid_argument("AdaptiveParams: need 0 < tau_min <= tau_max");
        if (!(lambda >= 0.0)) throw std::invalid_argument("AdaptiveParams: lambda must be nonnegative");
        if (!(kernel_order >= 0.0 && kernel_order < 1.0)) throw std::invalid_argument("AdaptiveParams: kernel order must lie in [0,1)");
    }
};

/// Step-size update
///   tau_{n+1} = max{ max{tau_min, tau_max / sqrt(1 + lambda |d_tau phi|^2)}, H(rho_n) tau_n },
/// clamped to tau_max. Pass rho_n <= 0 when no ratio exists yet (second step);
/// the H term is then dropped.
inline double adaptive_next_step(double tau_n, double rho_n, double grad_norm, const AdaptiveParams& p) {
    if (!(tau_n > 0.0)) throw std::invalid_argument("adaptive_next_step: tau_n must be positive");
    if (!(grad_norm >= 0.0)) throw std::invalid_argument("adaptive_next_step: gradient norm must be nonnegative");
    const double sensed = std::max(p.tau_min, p.tau_max / std::sqrt(1.0 + p.lambda * grad_norm * grad_norm));
    const double floor = rho_n > 0.0 ? ratio_bound(p.kernel_order, rho_n) * tau_n : 0.0;
    return std::min(std::max(sensed, floor), p.tau_max);
}

/// Feed-forward step controller building an adaptive mesh node by node.
///
/// The last steps are arranged so that the horizon is hit exactly without
/// violating the ratio constraint: when fewer than two proposed steps
/// remain, the remainder is split in two equal halves (or taken whole when a
/// half would fall under the H floor).
class AdaptiveController {
public:
    AdaptiveController(double horizon, AdaptiveParams params) : horizon_(horizon), params_(params) {
        params_.validate();
        if (!(horizon >= 0.0)) throw std::invalid_argument("AdaptiveController: horizon must be nonnegative");
    }

    bool done() const { return !(horizon_ - nodes_.back() > 0.0); }
    double time() const { return nodes_.back(); }
    const std::vector<double>& nodes() const { return nodes_; }
    TemporalMesh mesh() const { return TemporalMesh(nodes_); }
    const AdaptiveParams& params() const { return params_; }

    /// Next step given the L2 norm of the latest difference quotient
    /// (ignored for the first step, which is tau_min).
    double propose(double grad_norm) const {
        const std::size_t n = nodes_.size() - 1;
        const double remaining = horizon_ - nodes_.back();
        if (n == 0) return std::min(params_.tau_min, remaining);
        const double tau_n = nodes_[n] - nodes_[n - 1];
        const double rho_n = n >= 2 ? tau_n / (nodes_[n - 1] - nodes_[n - 2]) : 0.0;
        const double proposal = adaptive_next_step(tau_n, rho_n, grad_norm, params_);
        if (remaining <= proposal) return remaining;
        const double bound = rho_n > 0.0 ? ratio_bound(params_.kernel_order, rho_n) : 0.0;
        if (remaining < 2.0 * proposal) {
            const double half = realizable(0.5 * remaining, tau_n, bound);
            return half < remaining && half >= bound * tau_n ? half : remaining;
        }
        return std::min(realizable(proposal, tau_n, bound), remaining);
    }

    /// Appends a node; returns the new time.
    double accept(double tau) {
        if (!(tau > 0.0)) throw std::invalid_argument("AdaptiveController::accept: step must be positive");
        const double remaining = horizon_ - nodes_.back();
        nodes_.push_back(tau >= remaining ? horizon_ : nodes_.back() + tau);
        return nodes_.back();
    }

private:
    // Node differences round; widen tau until the stored ratio meets the bound.
    double realizable(double tau, double tau_n, double bound) const {
        const double t = nodes_.back();
        double next = t + tau;
        for (int i = 0; i < 64 && (next - t) / tau_n < bound; ++i) next = std::nextafter(next, 2.0 * next + 1.0);
        return next - t;
    }

    double horizon_;
    AdaptiveParams params_;
    std::vector<double> nodes_{0.0};
};

/// CSV dump with header `k,t,tau,rho` (tau empty for k = 0, rho empty for k <= 1).
inline void write_mesh_csv(std::ostream& os, const TemporalMesh& mesh) {
    os.precision(17);
    os << "k,t,tau,rho\n";
    for (std::size_t k = 0; k <= mesh.steps(); ++k) {
        os << k << ',' << mesh.node(k) << ',';
        if (k >= 1) os << mesh.step(k);
        os << ',';
        if (k >= 2) os << mesh.ratio(k);
        os << '\n';
    }
}

}  // namespace tfpf
