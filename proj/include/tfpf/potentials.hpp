#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "tfpf/spectral_domain.hpp"

namespace tfpf {

/// F(phi) = (a1/4) phi^4 + (a2/3) phi^3 + (a3/2) phi^2 + a4 phi + a5, a1 > 0.
struct QuarticPotential {
    double a1 = 1.0, a2 = 0.0, a3 = 0.0, a4 = 0.0, a5 = 0.0;

    double operator()(double phi) const {
        return (((a1 / 4.0 * phi + a2 / 3.0) * phi + a3 / 2.0) * phi + a4) * phi + a5;
    }
    double derivative(double phi) const { return ((a1 * phi + a2) * phi + a3) * phi + a4; }
};

/// F(phi) = (q1 phi^2 + q2 phi + q3)^2 + q4 phi + q5.
struct CompletedSquare {
    double q1 = 0.0, q2 = 0.0, q3 = 0.0, q4 = 0.0, q5 = 0.0;

    double bracket(double phi) const { return (q1 * phi + q2) * phi + q3; }
    double operator()(double phi) const {
        const double b = bracket(phi);
        return b * b + q4 * phi + q5;
    }

    /// Coefficients of phi^4 .. phi^0 of the expanded polynomial, in the
    /// (a1/4, a2/3, a3/2, a4, a5) normalization.
    QuarticPotential expand() const {
        return {4.0 * q1 * q1, 3.0 * (2.0 * q1 * q2), 2.0 * (q2 * q2 + 2.0 * q1 * q3), 2.0 * q2 * q3 + q4, q3 * q3 + q5};
    }
};

/// Coefficient matching of the quartic against the completed square.
inline CompletedSquare complete_quartic(const QuarticPotential& p) {
    if (!(p.a1 > 0.0)) throw std::invalid_argument("complete_quartic: leading coefficient a1 must be positive");
    CompletedSquare c;
    c.q1 = std::sqrt(p.a1) / 2.0;
    c.q2 = p.a2 / (3.0 * std::sqrt(p.a1));
    c.q3 = (p.a3 / 2.0 - c.q2 * c.q2) / (2.0 * c.q1);
    c.q4 = p.a4 - 2.0 * c.q2 * c.q3;
    c.q5 = p.a5 - c.q3 * c.q3;
    return c;
}

/// Swift-Hohenberg split (phi^2/2 - g phi/3 + c1)^2 + c2 phi + c3
/// of phi^4/4 - g phi^3/3 + delta phi^2/2.
struct SHConstants {
    double g = 0.0, delta = 0.0;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

inline SHConstants sh_constants(double g, double delta) {
    const double c1 = delta / 2.0 - g * g / 9.0;
    return {g, delta, c1, g * delta / 3.0 - 2.0 * g * g * g / 27.0, -c1 * c1};
}

enum class ModelKind { AllenCahnVC, CahnHilliard, SwiftHohenberg, Generic };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::AllenCahnVC: return "tfac";
        case ModelKind::CahnHilliard: return "tfch";
        case ModelKind::SwiftHohenberg: return "tfsh";
        case ModelKind::Generic: return "generic";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "tfac" || s == "TFAC" || s == "TFAC_VC" || s == "ac") return ModelKind::AllenCahnVC;
    if (s == "tfch" || s == "TFCH" || s == "ch") return ModelKind::CahnHilliard;
    if (s == "tfsh" || s == "TFSH" || s == "sh") return ModelKind::SwiftHohenberg;
    throw std::invalid_argument("unknown model '" + s + "' (expected tfac, tfch or tfsh)");
}

/// Closure N(phi) defining the auxiliary variable r = N(phi):
///   AC: phi^2 - 1 - S,  CH: phi (1 - phi) - S,
///   SH: phi^2/2 - g phi/3 + c1 - S,  generic: q1 phi^2 + q2 phi + q3 - S.
struct AuxRelation {
    ModelKind kind = ModelKind::AllenCahnVC;
    double stabilizer = 2.0;
    SHConstants sh{};
    CompletedSquare square{};

    static AuxRelation allen_cahn(double s) { return {ModelKind::AllenCahnVC, s, {}, {}}; }
    static AuxRelation cahn_hilliard(double s) { return {ModelKind::CahnHilliard, s, {}, {}}; }
    static AuxRelation swift_hohenberg(double s, double g, double delta) {
        return {ModelKind::SwiftHohenberg, s, sh_constants(g, delta), {}};
    }
    static AuxRelation generic(double s, const QuarticPotential& p) {
        return {ModelKind::Generic, s, {}, complete_quartic(p)};
    }

    double operator()(double phi) const {
        switch (kind) {
            case ModelKind::AllenCahnVC: return phi * phi - 1.0 - stabilizer;
            case ModelKind::CahnHilliard: return phi * (1.0 - phi) - stabilizer;
            case ModelKind::SwiftHohenberg: return 0.5 * phi * phi - sh.g / 3.0 * phi + sh.c1 - stabilizer;
            case ModelKind::Generic: return square.bracket(phi) - stabilizer;
        }
        return 0.0;
    }
};

/// Original free-energy density of each model.
inline double potential_density(const AuxRelation& rel, double phi) {
    switch (rel.kind) {
        case ModelKind::AllenCahnVC: {
            const double b = phi * phi - 1.0;
            return 0.25 * b * b;
        }
        case ModelKind::CahnHilliard: {
            const double b = phi * (1.0 - phi);
            return 0.25 * b * b;
        }
        case ModelKind::SwiftHohenberg:
            return ((0.25 * phi - rel.sh.g / 3.0) * phi + rel.sh.delta / 2.0) * phi * phi;
        case ModelKind::Generic: return rel.square(phi);
    }
    return 0.0;
}

/// F'(phi) of the original (unrelaxed) potential.
inline double potential_derivative(const AuxRelation& rel, double phi) {
    switch (rel.kind) {
        case ModelKind::AllenCahnVC: return phi * phi * phi - phi;
        case ModelKind::CahnHilliard: return 0.5 * phi * (1.0 - phi) * (1.0 - 2.0 * phi);
        case ModelKind::SwiftHohenberg: return ((phi - rel.sh.g) * phi + rel.sh.delta) * phi;
        case ModelKind::Generic: {
            const auto& q = rel.square;
            return 2.0 * q.bracket(phi) * (2.0 * q.q1 * phi + q.q2) + q.q4;
        }
    }
    return 0.0;
}

inline ScalarField eval_F(const AuxRelation& rel, const ScalarField& phi) {
    return map(phi, [&rel](double p) { return potential_density(rel, p); });
}

inline ScalarField eval_aux(const AuxRelation& rel, const ScalarField& phi) {
    return map(phi, [&rel](double p) { return rel(p); });
}

struct StaggeredAux {
    ScalarField half;        // r^{1/2}
    ScalarField minus_half;  // r^{-1/2}
};

/// r^{1/2} = r^{-1/2} = N(phi^0).
inline StaggeredAux aux_init(const ScalarField& phi0, const AuxRelation& rel) {
    ScalarField r = eval_aux(rel, phi0);
    return {r, r};
}

/// r^{n+1/2} from (r^{n+1/2} + r^{n-1/2}) / 2 = N(phi^n).
inline ScalarField aux_advance(const ScalarField& r_prev_half, const ScalarField& phi_n, const AuxRelation& rel) {
    r_prev_half.check_same(phi_n);
    ScalarField out(phi_n.grid());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 2.0 * rel(phi_n[k]) - r_prev_half[k];
    return out;
}

}  // namespace tfpf
