/// @file transform.hpp
/// @brief Forward and inverse transform, Plancherel checks, the continuous dual q^{-1}-Hahn
///        system and its complement, and the compact big q-Jacobi polynomial case.
#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "eigen.hpp"
#include "lattice.hpp"
#include "qseries.hpp"
#include "spectral.hpp"

namespace bqj {

// ---------------------------------------------------------------------------
// Forward transform

/// (F f)(gamma) = <f, phi_gamma> over the window of f, with tail estimates at the open ends.
inline SeriesResult forward(const LatticeFunction& f, cplx gamma, const Parameters& p) {
    return detail::lattice_sum(f.window(), p, [&](const LatticePoint& x) -> cplx {
        const cplx v = f[x];
        if (v == 0.0) return 0.0;
        return v * std::conj(phi(gamma, x, p).value) * jackson_weight(x, p);
    });
}

/// (F f)(gamma_tilde) at a point mass.
inline cplx forward_at_atom(const LatticeFunction& f, const DiscreteAtom& atom, const Parameters& p) {
    return transform_at_atom(f, atom.gamma_tilde, p);
}

/// A W-invariant function sampled on the grid and at the atoms of a SpectralMeasure.
struct SpectralFunction {
    std::vector<cplx> continuous;  ///< one value per measure grid point
    std::vector<cplx> atoms;       ///< one value per measure atom

    static SpectralFunction zero(const SpectralMeasure& m) {
        return {std::vector<cplx>(m.theta.size()), std::vector<cplx>(m.discrete.atoms.size())};
    }

    /// Samples g(gamma) at e^{i theta} on the grid and at each gamma_tilde.
    template <class G>
    static SpectralFunction sample(const SpectralMeasure& m, G&& g) {
        SpectralFunction s = zero(m);
        for (std::size_t i = 0; i < m.theta.size(); ++i) s.continuous[i] = g(std::polar(1.0, m.theta[i]));
        for (std::size_t i = 0; i < m.discrete.atoms.size(); ++i) s.atoms[i] = g(cplx(m.discrete.atoms[i].gamma_tilde));
        return s;
    }

    void check_shape(const SpectralMeasure& m) const {
        if (continuous.size() != m.theta.size() || atoms.size() != m.discrete.atoms.size())
            throw DomainError("spectral function does not match the measure grid");
    }
};

/// F f sampled on the grid and atoms of `m`.
inline SpectralFunction transform(const LatticeFunction& f, const SpectralMeasure& m) {
    const Parameters& p = m.params;
    SpectralFunction s = SpectralFunction::zero(m);
    for (std::size_t i = 0; i < m.theta.size(); ++i) s.continuous[i] = transform_value(f, std::polar(1.0, m.theta[i]), p);
    for (std::size_t i = 0; i < m.discrete.atoms.size(); ++i)
        s.atoms[i] = forward_at_atom(f, m.discrete.atoms[i], p);
    return s;
}

// ---------------------------------------------------------------------------
// Inverse transform

/// (G g)(x) = int g(gamma) phi_gamma(x) d nu(gamma).
inline cplx inverse(const SpectralFunction& g, const LatticePoint& x, const SpectralMeasure& m) {
    g.check_shape(m);
    const Parameters& p = m.params;
    cplx s = 0.0;
    for (std::size_t i = 0; i < m.theta.size(); ++i) {
        if (g.continuous[i] == 0.0) continue;
        s += m.weight[i] * g.continuous[i] * phi(std::polar(1.0, m.theta[i]), x, p).value;
    }
    for (std::size_t i = 0; i < m.discrete.atoms.size(); ++i) {
        const auto& at = m.discrete.atoms[i];
        if (g.atoms[i] == 0.0) continue;
        s += at.mass * g.atoms[i] * phi_at_atom(at.gamma_tilde, x, p);
    }
    return s;
}

/// G g on a whole window.
inline LatticeFunction inverse(const SpectralFunction& g, const LatticeWindow& w, const SpectralMeasure& m) {
    LatticeFunction out(w);
    for (const auto& x : w.points()) out[x] = inverse(g, x, m);
    return out;
}

/// int g conj(h) d nu.
inline cplx spectral_inner_product(const SpectralFunction& g, const SpectralFunction& h, const SpectralMeasure& m) {
    g.check_shape(m);
    h.check_shape(m);
    cplx s = 0.0;
    for (std::size_t i = 0; i < m.theta.size(); ++i) s += m.weight[i] * g.continuous[i] * std::conj(h.continuous[i]);
    for (std::size_t i = 0; i < m.discrete.atoms.size(); ++i)
        s += m.discrete.atoms[i].mass * g.atoms[i] * std::conj(h.atoms[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Plancherel

struct PlancherelResult {
    cplx lhs;  ///< <f, g> on the lattice
    cplx rhs;  ///< int F f conj(F g) d nu
    double scale = 1.0;  ///< ||f|| ||g||
};

inline PlancherelResult plancherel_check(const LatticeFunction& f, const LatticeFunction& g, const SpectralMeasure& m) {
    const Parameters& p = m.params;
    PlancherelResult r;
    cplx s = 0.0;
    double nf = 0.0, ng = 0.0;
    for (const auto& e : detail::support_of(f, p)) {
        nf += std::norm(e.value) * e.weight;
        if (g.window().contains(e.x)) s += e.value * std::conj(g[e.x]) * e.weight;
    }
    for (const auto& e : detail::support_of(g, p)) ng += std::norm(e.value) * e.weight;
    r.lhs = s;
    r.rhs = spectral_inner_product(transform(f, m), transform(g, m), m);
    r.scale = std::sqrt(nf * ng);
    return r;
}

/// int phi_gamma(x) conj(phi_gamma(y)) d nu(gamma); equals delta_{xy} p(x)/((1-q)|x|).
inline cplx dual_orthogonality(const LatticePoint& x, const LatticePoint& y, const SpectralMeasure& m) {
    const Parameters& p = m.params;
    cplx s = 0.0;
    for (std::size_t i = 0; i < m.theta.size(); ++i) {
        const cplx u = std::polar(1.0, m.theta[i]);
        s += m.weight[i] * phi(u, x, p).value * std::conj(phi(u, y, p).value);
    }
    for (const auto& at : m.discrete.atoms)
        s += at.mass * phi_at_atom(at.gamma_tilde, x, p) * std::conj(phi_at_atom(at.gamma_tilde, y, p));
    return s;
}

// ---------------------------------------------------------------------------
// Continuous dual q^{-1}-Hahn system

/// Parameters t_i = 1/(a, b, c) with t_i > 0, t_i t_j > 1, and z > 0.
struct HahnSystem {
    double t0 = 2.5, t1 = 2.0, t2 = 1.0 / 0.6;
    double z = 1.0;

    static HahnSystem from(const Parameters& p) { return {1.0 / p.a, 1.0 / p.b, 1.0 / p.c, p.z}; }

    void validate() const {
        if (!(t0 > 0 && t1 > 0 && t2 > 0)) throw DomainError("Hahn system needs t_i > 0");
        if (!(t0 * t1 > 1 && t0 * t2 > 1 && t1 * t2 > 1)) throw DomainError("Hahn system needs t_i t_j > 1");
        if (!(z > 0)) throw DomainError("Hahn system needs z > 0");
    }

    Parameters params(double q) const {
        validate();
        return Parameters::noncompact(q, 1.0 / t0, 1.0 / t1, 1.0 / t2, z);
    }
};

enum class HahnRoute { Eigenfunction, Series };

/// p_k(gamma) = phi_gamma(-q^k; 1/t0, 1/t1, 1/t2), or the terminating base-1/q series
/// 3phi2(q^k, t0 gamma, t0/gamma; t0 t1, t0 t2; 1/q, 1/q).
inline cplx hahn_poly(int k, cplx gamma, const HahnSystem& sys, double q, HahnRoute route = HahnRoute::Eigenfunction) {
    if (k < 0) throw DomainError("hahn_poly needs k >= 0");
    if (gamma == 0.0) throw DomainError("hahn_poly needs gamma != 0");
    if (route == HahnRoute::Eigenfunction) return phi(gamma, LatticePoint::neg(k), sys.params(q)).value;
    sys.validate();
    const double pb = 1.0 / q;  // base of the series
    const double qk = std::pow(q, k);
    cplx term = 1.0, sum = 1.0;
    double pn = 1.0;
    for (int n = 0; n < k; ++n) {
        const cplx num = (1.0 - qk * pn) * (1.0 - sys.t0 * gamma * pn) * (1.0 - sys.t0 / gamma * pn);
        const double den = (1.0 - pn * pb) * (1.0 - sys.t0 * sys.t1 * pn) * (1.0 - sys.t0 * sys.t2 * pn);
        if (den == 0.0) throw DomainError("hahn_poly: degenerate lower parameter");
        term *= num / den * pb;
        sum += term;
        pn *= pb;
    }
    return sum;
}

/// r_k(gamma) = phi_gamma(z q^k; 1/t0, 1/t1, 1/t2) along the given phi route.
inline cplx hahn_complement(int k, cplx gamma, const HahnSystem& sys, double q, PhiRoute route = PhiRoute::Auto) {
    return phi(gamma, LatticePoint::pos(k), sys.params(q), route).value;
}

/// Squared norm of p_k under d sigma_z = d nu / M, closed form.
inline double hahn_poly_norm(int k, const HahnSystem& sys, double q) {
    sys.validate();
    const QBase qb(q);
    const double u01 = 1.0 / (sys.t0 * sys.t1), u02 = 1.0 / (sys.t0 * sys.t2), u12 = 1.0 / (sys.t1 * sys.t2);
    const double z = sys.z;
    Scaled v = theta_reduced_scaled(-z, qb) / theta_reduced_scaled({-z * u01, -z * u02, -z * u12}, qb);
    v /= qpoch_inf_scaled({q, u01, u02, u12}, qb);
    v *= Scaled(qpoch_finite(q, qb, k) * qpoch_finite(u12, qb, k) / (qpoch_finite(u01, qb, k) * qpoch_finite(u02, qb, k)));
    v *= Scaled::ipow(q, -k);
    return v.value().real();
}

/// Squared norm of r_k under d sigma_z, closed form.
inline double hahn_complement_norm(int k, const HahnSystem& sys, double q) {
    sys.validate();
    const QBase qb(q);
    const double u01 = 1.0 / (sys.t0 * sys.t1), u02 = 1.0 / (sys.t0 * sys.t2), u12 = 1.0 / (sys.t1 * sys.t2);
    const double z = sys.z, zk = z * std::pow(q, k);
    Scaled v = theta_reduced_scaled(-1.0 / z, qb) / theta_reduced_scaled({-z * u01, -z * u02, -z * u12}, qb);
    const Scaled pq = qpoch_inf_scaled({u01, u02}, qb);
    v /= pq * pq;
    v *= qpoch_inf_scaled({-zk * u01, -zk * u02}, qb) / qpoch_inf_scaled({-zk * u12, -q * zk}, qb);
    v *= Scaled::ipow(q, -k);
    return v.value().real();
}

/// Gram matrix of {p_k}_{0 <= k < n_poly} followed by {r_k}_{k_lo <= k <= k_hi} under d sigma_z.
struct GramMatrix {
    std::vector<std::string> labels;
    std::vector<cplx> entries;  ///< row-major
    std::size_t size() const { return labels.size(); }
    cplx operator()(std::size_t i, std::size_t j) const { return entries[i * size() + j]; }

    /// max_{i != j} |G_ij| / sqrt(|G_ii G_jj|).
    double max_off_diagonal() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < size(); ++j)
                if (i != j)
                    worst = std::max(worst, std::abs((*this)(i, j)) / std::sqrt(std::abs((*this)(i, i) * (*this)(j, j))));
        return worst;
    }
};

inline GramMatrix hahn_gram(const HahnSystem& sys, double q, int n_poly, std::pair<int, int> comp_range = {-10, 10},
                            const SpectralMeasure* measure = nullptr) {
    if (n_poly < 0 || comp_range.first > comp_range.second) throw DomainError("hahn_gram: empty index range");
    const Parameters p = sys.params(q);
    const SpectralMeasure own = measure ? SpectralMeasure{} : SpectralMeasure::make(p);
    const SpectralMeasure& m = measure ? *measure : own;
    std::vector<LatticePoint> pts;
    GramMatrix g;
    for (int k = 0; k < n_poly; ++k) {
        pts.push_back(LatticePoint::neg(k));
        g.labels.push_back("p" + std::to_string(k));
    }
    for (int k = comp_range.first; k <= comp_range.second; ++k) {
        pts.push_back(LatticePoint::pos(k));
        g.labels.push_back("r" + std::to_string(k));
    }
    const std::size_t n = pts.size();
    std::vector<SpectralFunction> f;
    f.reserve(n);
    for (const auto& x : pts) {
        SpectralFunction s = SpectralFunction::zero(m);
        for (std::size_t i = 0; i < m.theta.size(); ++i) s.continuous[i] = phi(std::polar(1.0, m.theta[i]), x, p).value;
        for (std::size_t i = 0; i < m.discrete.atoms.size(); ++i)
            s.atoms[i] = phi_at_atom(m.discrete.atoms[i].gamma_tilde, x, p);
        f.push_back(std::move(s));
    }
    g.entries.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const cplx v = spectral_inner_product(f[i], f[j], m) / m.M;
            g.entries[i * n + j] = v;
            g.entries[j * n + i] = std::conj(v);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Compact big q-Jacobi case

/// psi_{a q^n} on a polynomial-regime window.
inline LatticeFunction big_qjacobi_samples(int n, const LatticeWindow& w, const Parameters& p) {
    if (!p.in_polynomial_regime()) throw DomainError("big_qjacobi_samples needs the polynomial regime");
    const cplx gn = p.a * std::pow(p.qv(), n);
    return LatticeFunction::sample(w, [&](const LatticePoint& x) { return psi(gn, x, p).value; });
}

/// Lattice Wronskian W(psi, phi) at x in the polynomial regime.
inline cplx polynomial_wronskian(cplx gamma, const LatticePoint& x, const Parameters& p) {
    const auto xd = x.shifted_down();
    return wronskian_values(x.value(p), psi(gamma, x, p).value, psi(gamma, xd, p).value, phi(gamma, x, p).value,
                            phi(gamma, xd, p).value, p);
}

}  // namespace bqj
