#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tfpf {

struct SolverConfig {
    double tolerance = 1e-12;     // relative residual |b - A x| / |b|
    int max_iterations = 500;     // total inner iterations across restarts
    int restart = 40;
    double fallback_damping = 0.8;
    int fallback_iterations = 2000;

    void validate() const {
        if (!(tolerance > 0.0 && tolerance <= 1e-6)) throw std::invalid_argument("SolverConfig: tolerance must lie in (0, 1e-6]");
        if (max_iterations < 1 || restart < 1) throw std::invalid_argument("SolverConfig: iteration limits must be >= 1");
        if (!(fallback_damping > 0.0 && fallback_damping <= 1.0)) throw std::invalid_argument("SolverConfig: damping must lie in (0, 1]");
    }
};

struct SolveStats {
    int iterations = 0;           // Krylov iterations (plus fallback sweeps)
    double relative_residual = 0.0;
    bool used_fallback = false;
    std::vector<double> residual_history;  // true relative residual at each restart / sweep
};

class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, SolveStats stats) : std::runtime_error(what), stats_(std::move(stats)) {}
    const SolveStats& stats() const { return stats_; }

private:
    SolveStats stats_;
};

/// Restarted GMRES with right preconditioning, then a damped preconditioned
/// Richardson sweep if GMRES stagnates.
///
/// `op(v)` applies A, `pinv(v)` applies the preconditioner inverse. Vectors
/// only need zero_like/axpy/inner overloads.
template <class Vec, class Op, class Precond>
Vec gmres_solve(Op&& op, Precond&& pinv, const Vec& rhs, Vec x, const SolverConfig& cfg, SolveStats& stats) {
    cfg.validate();
    stats = SolveStats{};
    auto norm = [](const Vec& v) { return std::sqrt(inner(v, v)); };
    auto scaled = [](double a, const Vec& v) {
        Vec out = zero_like(v);
        axpy(a, v, out);
        return out;
    };
    auto residual = [&](const Vec& xx) {
        Vec r = rhs;
        axpy(-1.0, op(xx), r);
        return r;
    };

    const double bnorm = norm(rhs);
    if (bnorm == 0.0) {
        stats.residual_history.push_back(0.0);
        return zero_like(rhs);
    }
    const double target = cfg.tolerance * bnorm;
    const int m = cfg.restart;

    Vec r = residual(x);
    double beta = norm(r);
    stats.relative_residual = beta / bnorm;
    stats.residual_history.push_back(stats.relative_residual);

    while (beta > target && stats.iterations < cfg.max_iterations) {
        std::vector<Vec> basis;
        basis.reserve(static_cast<std::size_t>(m) + 1);
        basis.push_back(scaled(1.0 / beta, r));
        std::vector<std::vector<double>> h(static_cast<std::size_t>(m) + 1, std::vector<double>(static_cast<std::size_t>(m), 0.0));
        std::vector<double> cs(static_cast<std::size_t>(m), 0.0), sn(static_cast<std::size_t>(m), 0.0);
        std::vector<double> g(static_cast<std::size_t>(m) + 1, 0.0);
        g[0] = beta;

        int used = 0;
        for (int j = 0; j < m && stats.iterations < cfg.max_iterations; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            Vec w = op(pinv(basis[ju]));
            ++stats.iterations;
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i <= ju; ++i) {
                    const double hij = inner(w, basis[i]);
                    h[i][ju] += hij;
                    axpy(-hij, basis[i], w);
                }
            }
            const double hnext = norm(w);
            h[ju + 1][ju] = hnext;

            for (std::size_t i = 0; i < ju; ++i) {
                const double a = h[i][ju], b = h[i + 1][ju];
                h[i][ju] = cs[i] * a + sn[i] * b;
                h[i + 1][ju] = -sn[i] * a + cs[i] * b;
            }
            const double a = h[ju][ju], b = h[ju + 1][ju];
            const double rr = std::hypot(a, b);
            cs[ju] = rr == 0.0 ? 1.0 : a / rr;
            sn[ju] = rr == 0.0 ? 0.0 : b / rr;
            h[ju][ju] = rr;
            h[ju + 1][ju] = 0.0;
            g[ju + 1] = -sn[ju] * g[ju];
            g[ju] = cs[ju] * g[ju];
            used = j + 1;

            if (std::abs(g[ju + 1]) <= target || hnext == 0.0) break;
            basis.push_back(scaled(1.0 / hnext, w));
        }

        std::vector<double> y(static_cast<std::size_t>(used), 0.0);
        for (int i = used - 1; i >= 0; --i) {
            const auto iu = static_cast<std::size_t>(i);
            double s = g[iu];
            for (int k = i + 1; k < used; ++k) s -= h[iu][static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(k)];
            y[iu] = h[iu][iu] != 0.0 ? s / h[iu][iu] : 0.0;
        }
        Vec update = zero_like(rhs);
        for (int i = 0; i < used; ++i) axpy(y[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(i)], update);
        axpy(1.0, pinv(update), x);

        r = residual(x);
        const double beta_new = norm(r);
        stats.residual_history.push_back(beta_new / bnorm);
        if (beta_new > (1.0 - 1e-3) * beta) {
            beta = std::min(beta, beta_new);
            break;
        }
        beta = beta_new;
    }
    stats.relative_residual = beta / bnorm;
    if (beta <= target) return x;

    // Stagnated or out of iterations. Fallback: x <- x + theta P^{-1}(b - A x).
    stats.used_fallback = true;
    for (int sweep = 0; sweep < cfg.fallback_iterations; ++sweep) {
        axpy(cfg.fallback_damping, pinv(r), x);
        r = residual(x);
        beta = norm(r);
        ++stats.iterations;
        stats.residual_history.push_back(beta / bnorm);
        if (beta <= target) break;
        if (!std::isfinite(beta)) break;
    }
    stats.relative_residual = beta / bnorm;
    if (!(beta <= target)) {
        std::ostringstream msg;
        msg << "linear solve did not reach relative residual " << cfg.tolerance << " (last " << stats.relative_residual << ")";
        throw SolverFailure(msg.str(), stats);
    }
    return x;
}

}  // namespace tfpf
