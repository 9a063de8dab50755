#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tfpf/fractional_kernels.hpp"
#include "tfpf/krylov.hpp"
#include "tfpf/models.hpp"
#include "tfpf/potentials.hpp"
#include "tfpf/spectral_domain.hpp"
#include "tfpf/temporal_mesh.hpp"

namespace tfpf {

/// Quadratic part: (eps^2/2)|grad phi|^2 (AC, CH) or phi (1+Lap)^2 phi / 2 (SH), integrated.
inline double energy_quadratic(const Model& model, const ScalarField& phi) {
    return 0.5 * inner(phi, model.linear_part(phi));
}

inline double energy_original(const Model& model, const ScalarField& phi) {
    return energy_quadratic(model, phi) + integral(eval_F(model.aux(), phi));
}

/// Modified energy in (phi, r); equals energy_original when r = N(phi).
inline double energy_modified(const Model& model, const ScalarField& phi, const ScalarField& r) {
    phi.check_same(r);
    const AuxRelation& rel = model.aux();
    const double S = rel.stabilizer;
    const double area = phi.grid().area();
    double density = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double p = phi[k], rk = r[k];
        switch (rel.kind) {
            case ModelKind::AllenCahnVC: density += 0.5 * (rk + S) * (p * p - 1.0 - S) - 0.25 * rk * rk; break;
            case ModelKind::CahnHilliard: density += 0.5 * (rk + S) * (p * (1.0 - p) - S) - 0.25 * rk * rk; break;
            case ModelKind::SwiftHohenberg: density += 2.0 * (rk + S) * rel(p) - rk * rk + rel.sh.c2 * p; break;
            case ModelKind::Generic: throw std::logic_error("energy_modified: unsupported model");
        }
    }
    double out = energy_quadratic(model, phi) + density * phi.grid().cell_area();
    if (rel.kind == ModelKind::SwiftHohenberg) {
        out += (rel.sh.c3 + S * S) * area;
    } else {
        out += 0.25 * S * S * area;
    }
    return out;
}

/// Norm used by the history functional: L2 for AC and SH, H^{-1} for CH.
inline double history_norm_sq(const Model& model, const ScalarField& u) {
    if (model.kind() == ModelKind::CahnHilliard) return model.ops().neg_sobolev_norm_sq(u);
    return inner(u, u);
}

/// E_mod + A(increments up to n) / M.
inline double energy_variational(const Model& model, double e_mod, const DifferenceHistory<ScalarField>& history,
                                 const TemporalMesh& mesh, std::size_t n) {
    if (n == 0) return e_mod;
    const double a = functional_A(history, mesh, n, model.params().nu(),
                                  [&model](const ScalarField& u) { return history_norm_sq(model, u); });
    return e_mod + a / model.params().mobility;
}

/// |r - N(phi_half)|_{L2}.
inline double aux_gap(const AuxRelation& rel, const ScalarField& r_half, const ScalarField& phi_half) {
    r_half.check_same(phi_half);
    ScalarField d = r_half;
    d -= eval_aux(rel, phi_half);
    return norm_l2(d);
}

/// order_i = ln(e_i / e_{i+1}) / ln(N_{i+1} / N_i).
inline std::vector<double> observed_order(const std::vector<double>& errors, const std::vector<double>& levels) {
    if (errors.size() != levels.size() || errors.size() < 2) {
        throw std::invalid_argument("observed_order: need matching lists of length >= 2");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (!(errors[i] > 0.0) || !(errors[i + 1] > 0.0)) throw std::invalid_argument("observed_order: errors must be positive");
        if (!(levels[i] > 0.0) || !(levels[i + 1] > 0.0) || levels[i] == levels[i + 1]) {
            throw std::invalid_argument("observed_order: levels must be positive and distinct");
        }
        out.push_back(std::log(errors[i] / errors[i + 1]) / std::log(levels[i + 1] / levels[i]));
    }
    return out;
}

struct DiagnosticsRecord {
    std::size_t n = 0;
    double t = 0.0;
    double tau = 0.0;
    double energy = 0.0;        // E
    double energy_mod = 0.0;    // E~
    double energy_var = 0.0;    // E~_alpha
    double mass = 0.0;
    double mass_drift = 0.0;    // |mass - mass_0| / |phi_0|_{L1}
    double aux_gap = 0.0;       // against N((phi^n + phi^{n+1}) / 2)
    double aux_gap_node = 0.0;  // against N(phi^n); not written to CSV
    int iterations = 0;
    double residual = 0.0;
};

/// Builds the record stream of one run. Stateful: after_step must see every
/// step in order, since it caches the history in the functional's norm.
class DiagnosticsTracker {
public:
    DiagnosticsTracker(const Model& model, const ScalarField& phi0) : model_(&model) {
        mass0_ = integral(phi0);
        double l1 = 0.0;
        for (std::size_t k = 0; k < phi0.size(); ++k) l1 += std::abs(phi0[k]);
        l1 *= phi0.grid().cell_area();
        scale_ = l1 > 0.0 ? l1 : 1.0;
        if (model.kind() == ModelKind::CahnHilliard) {
            inv_lap_ = model.ops().make_symbol([](double kx, double ky) {
                const double k2 = kx * kx + ky * ky;
                return k2 == 0.0 ? 0.0 : 1.0 / k2;
            });
        }
    }

    DiagnosticsRecord initial(const ModelState& s) const {
        DiagnosticsRecord d;
        d.t = s.time;
        d.energy = energy_original(*model_, s.phi);
        d.energy_mod = energy_modified(*model_, s.phi, s.r_half);
        d.energy_var = d.energy_mod;
        d.mass = integral(s.phi);
        d.mass_drift = std::abs(d.mass - mass0_) / scale_;
        d.aux_gap = aux_gap(model_->aux(), s.r_half, s.phi);
        d.aux_gap_node = d.aux_gap;
        return d;
    }

    /// Record after an advance; `mesh` must contain the step just taken.
    DiagnosticsRecord after_step(const ModelState& s, const TemporalMesh& mesh, const StepReport& rep) {
        if (s.n != dual_.size() + 1) throw std::logic_error("DiagnosticsTracker: steps must be fed in order");
        if (inv_lap_.empty()) {
            dual_.push_back(nullptr);
        } else {
            dual_.push_back(std::make_unique<ScalarField>(model_->ops().apply(inv_lap_, s.history.back())));
        }
        DiagnosticsRecord d;
        d.n = s.n;
        d.t = s.time;
        d.tau = rep.tau;
        d.energy = energy_original(*model_, s.phi);
        d.energy_mod = energy_modified(*model_, s.phi, s.r_half);
        d.energy_var = d.energy_mod + history_functional(s, mesh) / model_->params().mobility;
        d.mass = integral(s.phi);
        d.mass_drift = std::abs(d.mass - mass0_) / scale_;
        ScalarField half = s.phi;
        half += s.phi_prev;
        half *= 0.5;
        d.aux_gap = aux_gap(model_->aux(), s.r_half, half);
        d.aux_gap_node = aux_gap(model_->aux(), s.r_half, s.phi_prev);
        d.iterations = rep.solve.iterations;
        d.residual = rep.solve.relative_residual;
        return d;
    }

private:
    // A of the increments in the L2 or H^{-1} norm, tails built incrementally.
    double history_functional(const ModelState& s, const TemporalMesh& mesh) const {
        const std::size_t n = s.n;
        std::vector<double> tails(n, 0.0);
        ScalarField su = zero_like(s.phi);
        ScalarField sd = zero_like(s.phi);
        for (std::size_t k = n; k >= 1; --k) {
            axpy(1.0, s.history.at(k), su);
            if (dual_[k - 1]) {
                axpy(1.0, *dual_[k - 1], sd);
                tails[k - 1] = inner(su, sd);
            } else {
                tails[k - 1] = inner(su, su);
            }
        }
        return functional_A(modify_row(kernel_row(mesh, n, model_->params().nu())), tails);
    }

    const Model* model_;
    double mass0_ = 0.0;
    double scale_ = 1.0;
    Symbol inv_lap_;
    std::vector<std::unique_ptr<ScalarField>> dual_;
};

inline void write_diagnostics_header(std::ostream& os) {
    os << "n,t,tau,E,E_mod,E_var,mass,mass_drift,aux_gap,iters,residual\n";
}

inline void write_diagnostics_row(std::ostream& os, const DiagnosticsRecord& d) {
    const auto old = os.precision(17);
    os << d.n << ',' << d.t << ',' << d.tau << ',' << d.energy << ',' << d.energy_mod << ',' << d.energy_var << ','
       << d.mass << ',' << d.mass_drift << ',' << d.aux_gap << ',' << d.iterations << ',' << d.residual << '\n';
    os.precision(old);
}

inline void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& records) {
    write_diagnostics_header(os);
    for (const auto& r : records) write_diagnostics_row(os, r);
}

}  // namespace tfpf
