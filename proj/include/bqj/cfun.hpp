/// @file cfun.hpp
/// @brief c-functions, connection coefficients K and K~, closed-form Wronskians
///        and the extension of Phi_gamma to the whole lattice.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <optional>

#include "eigen.hpp"
#include "lattice.hpp"
#include "qseries.hpp"

namespace bqj {

namespace detail {

/// c(gamma; a, b, c; z) with theta arguments reduced to the fundamental annulus.
inline Scaled c_function_scaled(cplx g, double a, double b, double c, double z, const QBase& q) {
    if (g == 0.0) throw DomainError("c-function requires gamma != 0");
    const Scaled den = qpoch_inf_scaled(1.0 / (g * g), q);
    if (den.is_zero()) throw PoleError("c-function pole", "(1/gamma^2; q)_inf");
    const Scaled num = qpoch_inf_scaled({a / g, b / g, c / g}, q) * theta_reduced_scaled(-q.value() / (a * b * c * z * g), q);
    const Scaled norm = qpoch_inf_scaled({a * b, a * c}, q) * theta_reduced_scaled(-b * c * z, q);
    if (norm.is_zero()) throw PoleError("c-function normalisation", "(ab, ac; q)_inf theta(-bcz)");
    return num / (den * norm);
}

/// 1/c(gamma; a, b, c; z); analytic wherever the numerator factors of c do not vanish.
inline Scaled c_reciprocal_scaled(cplx g, double a, double b, double c, double z, const QBase& q) {
    if (g == 0.0) throw DomainError("c-function requires gamma != 0");
    const Scaled den = qpoch_inf_scaled({a / g, b / g, c / g}, q) * theta_reduced_scaled(-q.value() / (a * b * c * z * g), q);
    if (den.is_zero()) throw PoleError("reciprocal c-function pole", "(a/gamma, b/gamma, c/gamma; q)_inf theta(-q/abcz gamma)");
    return qpoch_inf_scaled(1.0 / (g * g), q) * qpoch_inf_scaled({a * b, a * c}, q) *
           theta_reduced_scaled(-b * c * z, q) / den;
}

/// K(gamma; a, b, c; z). With skip >= 0 the factor (1 - a q^skip/gamma) of (a/gamma; q)_inf
/// is left out and the result multiplied by gamma, which gives the residue at a q^skip.
inline Scaled K_coef_scaled(cplx g, double a, double b, double c, double z, const QBase& q, int skip = -1) {
    if (g == 0.0) throw DomainError("K(gamma) requires gamma != 0");
    const double qq = q.value();
    Scaled den = qpoch_inf_scaled(qq * g * g, q);
    if (den.is_zero()) throw PoleError("K(gamma) pole", "(q gamma^2; q)_inf");
    Scaled pa = qpoch_inf_scaled(a / g, q);
    if (skip >= 0) {
        const cplx f = 1.0 - a * std::pow(qq, skip) / g;
        if (f == 0.0) {
            // Rebuild the product without the vanishing factor.
            pa = Scaled(1.0);
            for (int j = 0; j < skip; ++j) pa *= Scaled(1.0 - a * std::pow(qq, j) / g);
            pa *= qpoch_inf_scaled(a * std::pow(qq, skip + 1) / g, q);
        } else {
            pa /= Scaled(f);
        }
        pa /= Scaled(g);
    }
    den *= pa;
    if (den.is_zero()) throw PoleError("K(gamma) pole", "(a/gamma; q)_inf");
    const Scaled num = qpoch_inf_scaled({a * b, a * c, qq * g / b, qq * g / c}, q) *
                       theta_reduced_scaled({-b * c * z, -a * z / g}, q);
    const Scaled tden = theta_reduced_scaled({b * c, -a * b * z, -a * c * z}, q);
    if (tden.is_zero()) throw PoleError("K(gamma) normalisation", "theta(bc, -abz, -acz)");
    return num / (den * tden);
}

}  // namespace detail

/// c(gamma) = (a/g, b/g, c/g; q)_inf theta(-q/(abcz g)) / ((ab, ac; q)_inf theta(-bcz) (1/g^2; q)_inf).
inline cplx c_function(cplx gamma, const Parameters& p) {
    return detail::c_function_scaled(gamma, p.a, p.b, p.c, p.z, p.q).value();
}

/// c(gamma) from unreduced theta products.
inline cplx c_function_direct(cplx gamma, const Parameters& p) {
    const QBase& q = p.q;
    const double a = p.a, b = p.b, c = p.c, z = p.z;
    if (gamma == 0.0) throw DomainError("c-function requires gamma != 0");
    const Scaled den = qpoch_inf_scaled(1.0 / (gamma * gamma), q);
    if (den.is_zero()) throw PoleError("c-function pole", "(1/gamma^2; q)_inf");
    const Scaled num =
        qpoch_inf_scaled({a / gamma, b / gamma, c / gamma}, q) * theta_scaled(-p.qv() / (a * b * c * z * gamma), q);
    return (num / (den * qpoch_inf_scaled({a * b, a * c}, q) * theta_scaled(-b * c * z, q))).value();
}

/// 1/c(gamma).
inline cplx c_reciprocal(cplx gamma, const Parameters& p) {
    return detail::c_reciprocal_scaled(gamma, p.a, p.b, p.c, p.z, p.q).value();
}

/// c~(gamma) = c(gamma; a, q/b, q/c; bcz/q).
inline cplx ctilde_function(cplx gamma, const Parameters& p) {
    const double qq = p.qv();
    return detail::c_function_scaled(gamma, p.a, qq / p.b, qq / p.c, p.b * p.c * p.z / qq, p.q).value();
}

/// c~(gamma) from its own product display.
inline cplx ctilde_function_explicit(cplx gamma, const Parameters& p) {
    const QBase& q = p.q;
    const double qq = p.qv(), a = p.a, b = p.b, c = p.c, z = p.z;
    if (gamma == 0.0) throw DomainError("c-function requires gamma != 0");
    const Scaled den = qpoch_inf_scaled(1.0 / (gamma * gamma), q);
    if (den.is_zero()) throw PoleError("c~ pole", "(1/gamma^2; q)_inf");
    const Scaled num = qpoch_inf_scaled({a / gamma, qq / (b * gamma), qq / (c * gamma)}, q) *
                       theta_reduced_scaled(-1.0 / (a * z * gamma), q);
    const Scaled norm = qpoch_inf_scaled({qq * a / b, qq * a / c}, q) * theta_reduced_scaled(-1.0 / z, q);
    return (num / (den * norm)).value();
}

/// K(gamma) and K~(gamma) of the expansion Phi = K phi + K~ psi.
struct KCoefficients {
    cplx K;
    cplx Ktilde;
};

inline KCoefficients K_coefficients(cplx gamma, const Parameters& p) {
    const double qq = p.qv();
    return {detail::K_coef_scaled(gamma, p.a, p.b, p.c, p.z, p.q).value(),
            detail::K_coef_scaled(gamma, p.a, qq / p.b, qq / p.c, p.b * p.c * p.z / qq, p.q).value()};
}

/// Residues of K and K~ at gamma_n = a q^n.
inline KCoefficients K_residues(int n, const Parameters& p) {
    if (n < 0) throw DomainError("K_residues needs n >= 0");
    const double qq = p.qv();
    const cplx g = p.a * std::pow(qq, n);
    return {detail::K_coef_scaled(g, p.a, p.b, p.c, p.z, p.q, n).value(),
            detail::K_coef_scaled(g, p.a, qq / p.b, qq / p.c, p.b * p.c * p.z / qq, p.q, n).value()};
}

/// W(psi_gamma, phi_gamma) = (1-q) (a g, a/g; q)_inf theta(bc) / (ab, ac, qa/b, qa/c; q)_inf.
inline cplx wronskian_psi_phi_closed(cplx gamma, const Parameters& p) {
    if (gamma == 0.0) throw DomainError("Wronskian requires gamma != 0");
    const QBase& q = p.q;
    const double qq = p.qv();
    const Scaled den = qpoch_inf_scaled({p.a * p.b, p.a * p.c, qq * p.a / p.b, qq * p.a / p.c}, q);
    if (den.is_zero()) throw PoleError("closed Wronskian", "(ab, ac, qa/b, qa/c; q)_inf");
    const Scaled num =
        Scaled(1 - qq) * qpoch_inf_scaled({p.a * gamma, p.a / gamma}, q) * theta_reduced_scaled(p.b * p.c, q);
    return (num / den).value();
}

/// W(Phi_gamma, Phi_{1/gamma}) = a K (gamma - 1/gamma) on the positive branch.
inline cplx wronskian_Phi_pair(cplx gamma, const Parameters& p) {
    if (gamma == 0.0 || in_S_sing(gamma, p)) throw DomainError("wronskian_Phi_pair needs gamma in S_reg");
    return p.a * const_K(p) * (gamma - 1.0 / gamma);
}

/// W(gamma) = W(Phi_gamma, phi_gamma) = a K c(1/gamma) (gamma - 1/gamma).
inline cplx W_gamma(cplx gamma, const Parameters& p) {
    if (gamma == 0.0) throw DomainError("W(gamma) requires gamma != 0");
    return p.a * const_K(p) * c_function(1.0 / gamma, p) * (gamma - 1.0 / gamma);
}

/// All connection data at one spectral parameter.
struct ConnectionData {
    cplx c_plus, c_minus;            ///< c(gamma), c(1/gamma)
    cplx ctilde_plus, ctilde_minus;  ///< c~(gamma), c~(1/gamma)
    cplx K_coef, Ktilde_coef;        ///< K(gamma), K~(gamma)
    cplx W_gamma;
};

inline ConnectionData connection_data(cplx gamma, const Parameters& p) {
    ConnectionData d;
    d.c_plus = c_function(gamma, p);
    d.c_minus = c_function(1.0 / gamma, p);
    d.ctilde_plus = ctilde_function(gamma, p);
    d.ctilde_minus = ctilde_function(1.0 / gamma, p);
    const auto k = K_coefficients(gamma, p);
    d.K_coef = k.K;
    d.Ktilde_coef = k.Ktilde;
    d.W_gamma = p.a * const_K(p) * d.c_minus * (gamma - 1.0 / gamma);
    return d;
}

/// |phi_gamma(x) - c(gamma) Phi_gamma(x) - c(1/gamma) Phi_{1/gamma}(x)| / (1 + |phi_gamma(x)|), x on I_+.
inline double connection_expand(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (x.branch != Branch::Pos) throw DomainError("connection_expand needs a positive-branch point");
    if (in_S_sing(gamma, p)) throw PoleError("connection_expand needs gamma in S_reg", "(1/gamma^2; q)_inf");
    const cplx f = phi(gamma, x, p).value;
    const cplx rhs = c_function(gamma, p) * phi_asym(gamma, x, p).value +
                     c_function(1.0 / gamma, p) * phi_asym(1.0 / gamma, x, p).value;
    return std::abs(f - rhs) / (1.0 + std::abs(f));
}

/// Same expansion for psi_gamma with c~ in place of c.
inline double connection_expand_psi(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (x.branch != Branch::Pos) throw DomainError("connection_expand_psi needs a positive-branch point");
    if (in_S_sing(gamma, p)) throw PoleError("connection_expand_psi needs gamma in S_reg", "(1/gamma^2; q)_inf");
    const cplx f = psi(gamma, x, p).value;
    const cplx rhs = ctilde_function(gamma, p) * phi_asym(gamma, x, p).value +
                     ctilde_function(1.0 / gamma, p) * phi_asym(1.0 / gamma, x, p).value;
    return std::abs(f - rhs) / (1.0 + std::abs(f));
}

/// |Phi_gamma(x) - K phi_gamma(x) - K~ psi_gamma(x)| / (|Phi| + |K phi| + |K~ psi|), x on I_+.
inline double connection_K_residual(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (x.branch != Branch::Pos) throw DomainError("connection_K_residual needs a positive-branch point");
    const auto k = K_coefficients(gamma, p);
    const cplx F = phi_asym(gamma, x, p).value;
    const cplx t1 = k.K * phi(gamma, x, p).value, t2 = k.Ktilde * psi(gamma, x, p).value;
    return std::abs(F - t1 - t2) / (std::abs(F) + std::abs(t1) + std::abs(t2));
}

/// Max entry of |C * Kmat - I| with C = [[c(g), c(1/g)], [c~(g), c~(1/g)]] and
/// Kmat = [[K(g), K~(g)], [K(1/g), K~(1/g)]], relative to the entry scale.
inline double matrix_identity_residual(cplx gamma, const Parameters& p) {
    const std::array<std::array<cplx, 2>, 2> C{{{c_function(gamma, p), c_function(1.0 / gamma, p)},
                                                {ctilde_function(gamma, p), ctilde_function(1.0 / gamma, p)}}};
    const auto kp = K_coefficients(gamma, p), km = K_coefficients(1.0 / gamma, p);
    const std::array<std::array<cplx, 2>, 2> Km{{{kp.K, kp.Ktilde}, {km.K, km.Ktilde}}};
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const cplx t0 = C[i][0] * Km[0][j], t1 = C[i][1] * Km[1][j];
            const double scale = std::max(1.0, std::abs(t0) + std::abs(t1));
            worst = std::max(worst, std::abs(t0 + t1 - (i == j ? 1.0 : 0.0)) / scale);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Extension of Phi_gamma to the whole lattice

namespace detail {

/// M_n(gamma) = ratio_n K(gamma) + K~(gamma), regular at gamma_n.
inline cplx M_n_gamma(int n, cplx gamma, const Parameters& p) {
    const auto k = K_coefficients(gamma, p);
    return bigq_psi_ratio(n, p) * k.K + k.Ktilde;
}

/// Limit of M_n(gamma) at gamma_n: symmetric averages at two radii, one Richardson step.
inline cplx M_n_limit(int n, const Parameters& p) {
    const cplx g = p.a * std::pow(p.qv(), n);
    const double h = 1e-3 * std::abs(g);
    auto sym = [&](double s) { return 0.5 * (M_n_gamma(n, g + s, p) + M_n_gamma(n, g - s, p)); };
    return (4.0 * sym(0.5 * h) - sym(h)) / 3.0;
}

/// d/dgamma of a function of gamma: central difference with step 1e-5 |gamma| and one Richardson step.
template <class F>
cplx gamma_derivative(F&& f, cplx g) {
    const double h = 1e-5 * std::abs(g);
    auto cd = [&](double s) { return (f(g + s) - f(g - s)) / (2.0 * s); };
    return (4.0 * cd(0.5 * h) - cd(h)) / 3.0;
}

}  // namespace detail

/// Relative distance below which gamma is treated as the point a q^n of S_pol^+.
inline constexpr double kSpolSnap = 1e-7;

/// Index n with |gamma / (a q^n) - 1| < kSpolSnap, if any.
inline std::optional<int> S_pol_plus_near(cplx gamma, const Parameters& p) {
    if (const auto n = S_pol_plus_index(gamma, p, 1e-6)) {
        const double gn = p.a * std::pow(p.qv(), *n);
        if (std::abs(gamma / gn - 1.0) < kSpolSnap) return n;
    }
    return std::nullopt;
}

/// The extension of Phi_gamma to x in I: K phi + K~ psi, or its analytic continuation at a q^n.
inline cplx phi_asym_extended(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (gamma == 0.0 || in_S_sing_plus(gamma, p)) throw DomainError("Phi_gamma undefined for gamma in S_sing^+");
    if (const auto n = S_pol_plus_near(gamma, p)) {
        const cplx gn = p.a * std::pow(p.qv(), *n);
        const auto res = K_residues(*n, p);
        const cplx dphi = detail::gamma_derivative([&](cplx g) { return phi(g, x, p).value; }, gn);
        const cplx dpsi = detail::gamma_derivative([&](cplx g) { return psi(g, x, p).value; }, gn);
        // The regular part M_n multiplies psi_{gamma_n}; phi_{gamma_n} = ratio_n psi_{gamma_n}.
        return res.K * dphi + detail::M_n_limit(*n, p) * psi(gn, x, p).value + res.Ktilde * dpsi;
    }
    const auto k = K_coefficients(gamma, p);
    return k.K * phi(gamma, x, p).value + k.Ktilde * psi(gamma, x, p).value;
}

/// Phi_gamma on I: the asymptotic series on the positive branch, the extension on I_-.
inline cplx phi_asym_full(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (x.branch == Branch::Pos) return phi_asym(gamma, x, p).value;
    return phi_asym_extended(gamma, x, p);
}

}  // namespace bqj
