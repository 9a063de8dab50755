#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tfpf/fractional_kernels.hpp"
#include "tfpf/krylov.hpp"
#include "tfpf/potentials.hpp"
#include "tfpf/spectral_domain.hpp"
#include "tfpf/temporal_mesh.hpp"

namespace tfpf {

struct ModelParams {
    ModelKind kind = ModelKind::AllenCahnVC;
    double alpha = 1.0;       // Caputo order in (0, 1]
    double mobility = 0.01;   // M
    double epsilon = 0.25;    // interface width (AC, CH)
    double g = 1.0;           // SH
    double delta = 0.2;       // SH
    double stabilizer = 2.0;  // S

    /// Kernel order used by the L1+ weights.
    double nu() const { return 1.0 - alpha; }

    void validate() const {
        if (kind == ModelKind::Generic) throw std::invalid_argument("ModelParams: generic potentials have no time-stepping scheme");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("ModelParams: alpha must lie in (0, 1]");
        if (!(mobility > 0.0)) throw std::invalid_argument("ModelParams: mobility must be positive");
        if (kind != ModelKind::SwiftHohenberg && !(epsilon > 0.0)) throw std::invalid_argument("ModelParams: epsilon must be positive");
        if (!std::isfinite(g) || !std::isfinite(delta) || !std::isfinite(stabilizer)) {
            throw std::invalid_argument("ModelParams: non-finite parameter");
        }
    }
};

/// One of the three relaxation models on a fixed periodic grid.
///
/// With w = r^{n+1/2} + S frozen, each scheme reads
///   b_0 (phi^{n+1} - phi^n) + lagged = -M K_w phi^{n+1/2} + M c(w) + f,
/// where K_w is linear:
///   AC: K_w v = (I - Pi)[-eps^2 Lap v + w v]       c = 0
///   CH: K_w v = -Lap[-eps^2 Lap v - w v]           c = Lap(w / 2)
///   SH: K_w v = (1 + Lap)^2 v + 2 w v              c = (2g/3) w - c2
class Model {
public:
    Model(ModelParams params, const PeriodicGrid& grid) : params_(params), ops_(grid) {
        params_.validate();
        switch (params_.kind) {
            case ModelKind::AllenCahnVC: aux_ = AuxRelation::allen_cahn(params_.stabilizer); break;
            case ModelKind::CahnHilliard: aux_ = AuxRelation::cahn_hilliard(params_.stabilizer); break;
            case ModelKind::SwiftHohenberg:
                aux_ = AuxRelation::swift_hohenberg(params_.stabilizer, params_.g, params_.delta);
                break;
            case ModelKind::Generic: break;
        }
        const double e2 = params_.epsilon * params_.epsilon;
        const auto& k2 = ops_.neg_laplacian_symbol();
        eps_k2_.resize(k2.size());
        eps_k4_.resize(k2.size());
        neg_k2_.resize(k2.size());
        for (std::size_t i = 0; i < k2.size(); ++i) {
            eps_k2_[i] = e2 * k2[i];
            eps_k4_[i] = e2 * k2[i] * k2[i];
            neg_k2_[i] = -k2[i];
        }
    }

    const ModelParams& params() const { return params_; }
    const AuxRelation& aux() const { return aux_; }
    const SpectralOps& ops() const { return ops_; }
    const PeriodicGrid& grid() const { return ops_.grid(); }
    ModelKind kind() const { return params_.kind; }

    /// K_w v.
    ScalarField spatial(const ScalarField& w, const ScalarField& v) const {
        switch (params_.kind) {
            case ModelKind::AllenCahnVC: {
                ScalarField out = ops_.apply(eps_k2_, v);
                axpy(1.0, hadamard(w, v), out);
                out += -mean(out);
                return out;
            }
            case ModelKind::CahnHilliard:
                // -Lap[-eps^2 Lap v - w v] = eps^2 Lap^2 v + Lap(w v)
                return ops_.apply_sum(eps_k4_, v, neg_k2_, hadamard(w, v));
            case ModelKind::SwiftHohenberg: {
                ScalarField out = ops_.one_plus_lap_sq(v);
                axpy(2.0, hadamard(w, v), out);
                return out;
            }
            case ModelKind::Generic: break;
        }
        throw std::logic_error("Model::spatial: unsupported model");
    }

    /// Right-hand-side terms independent of phi, already multiplied by M.
    ScalarField constant_terms(const ScalarField& w) const {
        const double M = params_.mobility;
        switch (params_.kind) {
            case ModelKind::AllenCahnVC: return ScalarField(grid());
            case ModelKind::CahnHilliard: return (0.5 * M) * ops_.laplacian(w);
            case ModelKind::SwiftHohenberg: {
                const SHConstants& c = aux_.sh;
                ScalarField out = (M * 2.0 * c.g / 3.0) * w;
                out += -M * c.c2;
                return out;
            }
            case ModelKind::Generic: break;
        }
        throw std::logic_error("Model::constant_terms: unsupported model");
    }

    /// Symbol of K_w with w replaced by the constant wbar.
    Symbol surrogate_symbol(double wbar) const {
        const auto& k2 = ops_.neg_laplacian_symbol();
        const double e2 = params_.epsilon * params_.epsilon;
        Symbol s(k2.size());
        for (std::size_t i = 0; i < k2.size(); ++i) {
            switch (params_.kind) {
                case ModelKind::AllenCahnVC: s[i] = k2[i] == 0.0 ? 0.0 : e2 * k2[i] + wbar; break;
                case ModelKind::CahnHilliard: s[i] = k2[i] * (e2 * k2[i] - wbar); break;
                case ModelKind::SwiftHohenberg: {
                    const double a = 1.0 - k2[i];
                    s[i] = a * a + 2.0 * wbar;
                    break;
                }
                case ModelKind::Generic: s[i] = 0.0; break;
            }
        }
        return s;
    }

    /// Mobility operator G: (I - Pi), -Lap, or I.
    ScalarField mobility_operator(const ScalarField& mu) const {
        switch (params_.kind) {
            case ModelKind::AllenCahnVC: {
                ScalarField out = mu;
                out += -mean(mu);
                return out;
            }
            case ModelKind::CahnHilliard: return ops_.neg_laplacian(mu);
            case ModelKind::SwiftHohenberg: return mu;
            case ModelKind::Generic: break;
        }
        throw std::logic_error("Model::mobility_operator: unsupported model");
    }

    /// L phi: -eps^2 Lap phi (AC, CH) or (1 + Lap)^2 phi (SH).
    ScalarField linear_part(const ScalarField& phi) const {
        if (params_.kind == ModelKind::SwiftHohenberg) return ops_.one_plus_lap_sq(phi);
        return ops_.apply(eps_k2_, phi);
    }

    /// mu = L phi + F'(phi) with the original potential.
    ScalarField chemical_potential(const ScalarField& phi) const {
        ScalarField mu = linear_part(phi);
        for (std::size_t k = 0; k < mu.size(); ++k) mu[k] += potential_derivative(aux_, phi[k]);
        return mu;
    }

private:
    ModelParams params_;
    SpectralOps ops_;
    AuxRelation aux_;
    Symbol eps_k2_, eps_k4_, neg_k2_;
};

/// Linear system b_0 v + (M/2) K_w v = rhs for phi^{n+1}.
struct StepSystem {
    const Model* model = nullptr;
    double b0 = 0.0;
    ScalarField w;    // r^{n+1/2} + S
    ScalarField rhs;

    ScalarField apply(const ScalarField& v) const {
        ScalarField out = model->spatial(w, v);
        out *= 0.5 * model->params().mobility;
        axpy(b0, v, out);
        return out;
    }
};

/// Frozen coefficient w = r + S.
inline ScalarField frozen_coefficient(const Model& model, const ScalarField& r_half) {
    ScalarField w = r_half;
    w += model.params().stabilizer;
    return w;
}

/// L1+ history, r and phi at step n.
struct ModelState {
    std::size_t n = 0;
    double time = 0.0;
    ScalarField phi0;
    ScalarField phi;           // phi^n
    ScalarField r_half;        // r^{n-1/2}
    ScalarField r_prev_half;   // r^{n-3/2} (equals r_half at n = 0)
    ScalarField phi_prev;      // phi^{n-1} (equals phi at n = 0)
    DifferenceHistory<ScalarField> history;  // increments phi^k - phi^{k-1}, k = 1..n
};

inline ModelState initial_state(const Model& model, const ScalarField& phi0) {
    if (!(phi0.grid() == model.grid())) throw std::invalid_argument("initial_state: field grid differs from model grid");
    ModelState s;
    s.phi0 = phi0;
    s.phi = phi0;
    s.phi_prev = phi0;
    const StaggeredAux aux = aux_init(phi0, model.aux());
    s.r_half = aux.minus_half;
    s.r_prev_half = aux.minus_half;
    return s;
}

/// Assembles the step system for phi^{n+1} given r^{n+1/2}:
///   rhs = b_0 phi^n - lagged - (M/2) K_w phi^n + M c(w) + f.
inline StepSystem assemble_system(const Model& model, const ModelState& state, const KernelRow& row,
                                  const ScalarField& r_next_half, const std::optional<ScalarField>& source) {
    if (row.step != state.n + 1) throw std::invalid_argument("assemble_system: kernel row is not for step n+1");
    StepSystem sys;
    sys.model = &model;
    sys.b0 = row.weights[0];
    sys.w = frozen_coefficient(model, r_next_half);

    const double M = model.params().mobility;
    ScalarField rhs = lagged_sum(row, state.history, zero_like(state.phi));
    rhs *= -1.0;
    axpy(sys.b0, state.phi, rhs);
    axpy(-0.5 * M, model.spatial(sys.w, state.phi), rhs);
    rhs += model.constant_terms(sys.w);
    if (source) rhs += *source;
    sys.rhs = std::move(rhs);
    return sys;
}

inline ScalarField assemble_rhs(const Model& model, const ModelState& state, const KernelRow& row,
                                const ScalarField& r_next_half, const std::optional<ScalarField>& source) {
    return assemble_system(model, state, row, r_next_half, source).rhs;
}

/// Solves the step system with GMRES preconditioned by the constant-coefficient
/// surrogate (w replaced by its mean), which is exact when w is constant.
inline ScalarField solve_step(const StepSystem& sys, const ScalarField& guess, const SolverConfig& cfg, SolveStats& stats) {
    const Model& model = *sys.model;
    const SpectralOps& ops = model.ops();
    const double half_m = 0.5 * model.params().mobility;
    Symbol inv = model.surrogate_symbol(mean(sys.w));
    for (auto& s : inv) {
        double d = sys.b0 + half_m * s;
        if (std::abs(d) < 1e-12 * sys.b0) d = sys.b0;
        s = 1.0 / d;
    }
    auto op = [&sys](const ScalarField& v) { return sys.apply(v); };
    auto pinv = [&ops, &inv](const ScalarField& v) { return ops.apply(inv, v); };
    return gmres_solve(op, pinv, sys.rhs, guess, cfg, stats);
}

struct StepReport {
    std::size_t step = 0;
    double time = 0.0;
    double tau = 0.0;
    KernelRow row;
    SolveStats solve;
};

/// Source sampled on the interval [t_n, t_{n+1}].
using SourceFn = std::function<ScalarField(double t_begin, double t_end)>;

/// One step n -> n+1 on `mesh` (which must contain node n+1):
/// r^{n+1/2} from the staggered algebraic update, kernel row of step n+1,
/// linear solve for phi^{n+1}, history append.
inline StepReport advance(ModelState& state, const TemporalMesh& mesh, const Model& model, const SolverConfig& cfg,
                          const SourceFn& source = {}) {
    const std::size_t next = state.n + 1;
    if (mesh.steps() < next) throw std::invalid_argument("advance: mesh has no node " + std::to_string(next));

    ScalarField r_next = aux_advance(state.r_half, state.phi, model.aux());
    StepReport report;
    report.step = next;
    report.tau = mesh.step(next);
    report.time = mesh.node(next);
    report.row = kernel_row(mesh, next, model.params().nu());

    std::optional<ScalarField> f;
    if (source) f = source(mesh.node(next - 1), mesh.node(next));
    const StepSystem sys = assemble_system(model, state, report.row, r_next, f);
    ScalarField phi_next = solve_step(sys, state.phi, cfg, report.solve);

    ScalarField increment = phi_next - state.phi;
    state.history.push(std::move(increment));
    state.phi_prev = std::move(state.phi);
    state.phi = std::move(phi_next);
    state.r_prev_half = std::move(state.r_half);
    state.r_half = std::move(r_next);
    state.n = next;
    state.time = report.time;
    return report;
}

// ---------------------------------------------------------------------------
// Manufactured solution phi = (1 - omega_{1+sigma}(t)) (sin(2x) cos(2y) / 4 + 0.45)

inline ScalarField mms_profile(const PeriodicGrid& grid) {
    return ScalarField::from_function(grid, [](double x, double y) { return 0.25 * std::sin(2.0 * x) * std::cos(2.0 * y) + 0.45; });
}

inline double mms_temporal_factor(double t, double sigma) { return 1.0 - omega(1.0 + sigma, t); }

inline ScalarField mms_exact(double t, const PeriodicGrid& grid, double sigma) {
    if (t < 0.0) throw std::invalid_argument("mms_exact: negative time");
    return mms_temporal_factor(t, sigma) * mms_profile(grid);
}

enum class SourceSampling { Midpoint, IntervalAverage };

namespace detail {

// Mean of t^p over [a, b].
inline double power_mean(double p, double a, double b) {
    return (std::pow(b, p + 1.0) - (a > 0.0 ? std::pow(a, p + 1.0) : 0.0)) / ((p + 1.0) * (b - a));
}

// Mean over [a, b] of c(t)^m with c(t) = 1 - kappa t^sigma, m = 1..3.
inline double factor_power_mean(int m, double kappa, double sigma, double a, double b) {
    static constexpr double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    double s = 0.0;
    for (int j = 0; j <= m; ++j) {
        const double coef = binom[m][j] * std::pow(-kappa, j);
        s += coef * (j == 0 ? 1.0 : power_mean(j * sigma, a, b));
    }
    return s;
}

inline QuarticPotential model_quartic(const ModelParams& p) {
    switch (p.kind) {
        case ModelKind::AllenCahnVC: return {1.0, 0.0, -1.0, 0.0, 0.25};
        case ModelKind::CahnHilliard: return {1.0, -1.5, 0.5, 0.0, 0.0};
        case ModelKind::SwiftHohenberg: return {1.0, -p.g, p.delta, 0.0, 0.0};
        case ModelKind::Generic: break;
    }
    throw std::logic_error("model_quartic: unsupported model");
}

}  // namespace detail

/// Source f = d_t^alpha phi_e + M G mu(phi_e) at time t > 0; the Caputo part
/// is analytic, d_t^alpha (1 - omega_{1+sigma}) = -omega_{1+sigma-alpha}.
inline ScalarField mms_source(const Model& model, double t, double sigma) {
    const PeriodicGrid& grid = model.grid();
    const ScalarField profile = mms_profile(grid);
    const double alpha = model.params().alpha;
    ScalarField f = (-omega(1.0 + sigma - alpha, t)) * profile;
    const ScalarField mu = model.chemical_potential(mms_temporal_factor(t, sigma) * profile);
    axpy(model.params().mobility, model.mobility_operator(mu), f);
    return f;
}

/// Exact mean of the source over [a, b]: the temporal factors of the Caputo
/// term and of the polynomial chemical potential are integrated in closed form.
inline ScalarField mms_source_average(const Model& model, double a, double b, double sigma) {
    const PeriodicGrid& grid = model.grid();
    const ScalarField profile = mms_profile(grid);
    const double alpha = model.params().alpha;
    const double beta = 2.0 + sigma - alpha;
    const double caputo = -(omega(beta, b) - omega(beta, a)) / (b - a);
    const double kappa = 1.0 / std::tgamma(1.0 + sigma);
    const double c1 = detail::factor_power_mean(1, kappa, sigma, a, b);
    const double c2 = detail::factor_power_mean(2, kappa, sigma, a, b);
    const double c3 = detail::factor_power_mean(3, kappa, sigma, a, b);
    const QuarticPotential q = detail::model_quartic(model.params());

    ScalarField mu = c1 * model.linear_part(profile);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double p = profile[k];
        mu[k] += q.a1 * c3 * p * p * p + q.a2 * c2 * p * p + q.a3 * c1 * p + q.a4;
    }
    ScalarField f = caputo * profile;
    axpy(model.params().mobility, model.mobility_operator(mu), f);
    return f;
}

inline SourceFn make_mms_source(const Model& model, double sigma, SourceSampling sampling = SourceSampling::Midpoint) {
    if (sampling == SourceSampling::Midpoint) {
        return [&model, sigma](double a, double b) { return mms_source(model, 0.5 * (a + b), sigma); };
    }
    return [&model, sigma](double a, double b) { return mms_source_average(model, a, b, sigma); };
}

}  // namespace tfpf
