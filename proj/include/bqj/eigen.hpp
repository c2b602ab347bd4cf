/// @file eigen.hpp
/// @brief Eigenvalue map and explicit eigenfunctions of L: the spherical function phi,
///        the second solution psi, the asymptotic solution Phi, Phi^- and the
///        big q-Jacobi polynomials.
#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lattice.hpp"
#include "qseries.hpp"

namespace bqj {

/// mu(gamma) = -1 - a^2 + a (gamma + 1/gamma).
inline cplx mu(cplx gamma, const Parameters& p) {
    if (gamma == 0.0) throw DomainError("mu(gamma) requires gamma != 0");
    return -1.0 - p.a * p.a + p.a * (gamma + 1.0 / gamma);
}

/// The root gamma of mu(gamma) = m with |gamma| <= 1.
inline cplx gamma_of_mu(cplx m, const Parameters& p) {
    const cplx s = (m + 1.0 + p.a * p.a) / p.a;
    const cplx d = std::sqrt(s * s - 4.0);
    cplx g1 = 0.5 * (s + d), g2 = 0.5 * (s - d);
    return std::abs(g1) <= std::abs(g2) ? g1 : g2;
}

// ---------------------------------------------------------------------------
// Singular-set classification

namespace detail {

/// If v = s * q^{e} for a sign s in {+1,-1} and integer e (to `tol` in log-q units), returns e.
inline std::optional<long> q_exponent(cplx v, double q, double tol, bool allow_negative) {
    if (v == 0.0) return std::nullopt;
    const double arg = std::arg(v);
    const bool positive = std::abs(arg) < tol;
    const bool negative = std::abs(std::abs(arg) - M_PI) < tol;
    if (!positive && !(allow_negative && negative)) return std::nullopt;
    const double e = std::log(std::abs(v)) / std::log(q);
    const double er = std::round(e);
    if (std::abs(e - er) > tol) return std::nullopt;
    return static_cast<long>(er);
}

}  // namespace detail

/// gamma in {+-q^{-k/2}}_{k>=1}.
inline bool in_S_sing_plus(cplx gamma, const Parameters& p, double tol = 1e-9) {
    const auto e = detail::q_exponent(gamma * gamma, p.qv(), tol, false);
    return e && *e <= -1;
}

/// gamma in {+-q^{k/2}}_{k in Z}.
inline bool in_S_sing(cplx gamma, const Parameters& p, double tol = 1e-9) {
    return detail::q_exponent(gamma * gamma, p.qv(), tol, false).has_value();
}

/// gamma = a q^n (n >= 0); returns n.
inline std::optional<int> S_pol_plus_index(cplx gamma, const Parameters& p, double tol = 1e-9) {
    const auto e = detail::q_exponent(gamma / p.a, p.qv(), tol, false);
    if (e && *e >= 0) return static_cast<int>(*e);
    return std::nullopt;
}

/// gamma in {a q^n, 1/(a q^n)}_{n>=0}.
inline bool in_S_pol(cplx gamma, const Parameters& p, double tol = 1e-9) {
    return S_pol_plus_index(gamma, p, tol).has_value() || S_pol_plus_index(1.0 / gamma, p, tol).has_value();
}

/// The spectral parameter with its eigenvalue and singular-set flags.
struct SpectralParam {
    cplx gamma;
    cplx mu_value;
    bool in_S_sing_plus = false;
    bool in_S_sing = false;
    bool in_S_pol = false;

    static SpectralParam make(cplx gamma, const Parameters& p) {
        return {gamma, mu(gamma, p), bqj::in_S_sing_plus(gamma, p), bqj::in_S_sing(gamma, p), bqj::in_S_pol(gamma, p)};
    }
};

// ---------------------------------------------------------------------------
// phi_gamma

enum class PhiRoute {
    Auto,
    Direct,         ///< 3phi2(a g, a/g, -1/x; ab, ac; q, -bcx), |bcx| < 1
    Continuation,   ///< transformed 3phi2 with argument a*g, |a g| < 1
    Continuation2,  ///< transformed 3phi2 with argument b*g, |b g| < 1
};

namespace detail {

inline SeriesResult scale_result(const Scaled& pref, const SeriesResult& s) {
    const Scaled v = pref * Scaled(s.value);
    const double m = std::exp2(pref.log2_abs());
    return {v.value(), m * s.err_estimate, s.n_terms};
}

/// Origin value 2phi2(a g, a/g; ab, ac; q, bc).
inline SeriesResult phi_at_zero(cplx g, double a, double b, double c, const QBase& q) {
    return phi_series({a * g, a / g}, {a * b, a * c}, q, b * c);
}

inline SeriesResult phi_direct(cplx g, double x, double a, double b, double c, const QBase& q) {
    if (x == 0.0) return phi_at_zero(g, a, b, c, q);
    if (!(std::abs(b * c * x) < 1.0))
        throw DomainError("direct series for phi needs |bcx| < 1");
    return phi_series({a * g, a / g, -1.0 / x}, {a * b, a * c}, q, -b * c * x);
}

/// (a g, bc, -abcx/g; q)_inf / (ab, ac, -bcx; q)_inf * 3phi2(b/g, c/g, -bcx; bc, -abcx/g; q, a g).
inline SeriesResult phi_continuation(cplx g, double x, double a, double b, double c, const QBase& q) {
    if (!(std::abs(a * g) < 1.0)) throw DomainError("continuation series for phi needs |a gamma| < 1");
    const double bc = b * c;
    const Scaled den = qpoch_inf_scaled({a * b, a * c, -bc * x}, q);
    if (den.is_zero()) throw PoleError("phi continuation prefactor", "(ab, ac, -bcx; q)_inf");
    const Scaled pref = qpoch_inf_scaled({a * g, bc, -a * bc * x / g}, q) / den;
    const auto s = phi_series({b / g, c / g, -bc * x}, {bc, -a * bc * x / g}, q, a * g);
    return scale_result(pref, s);
}

/// (b g, -abcx/g; q)_inf / (ab, -bcx; q)_inf * 3phi2(a/g, c/g, -acx; ac, -abcx/g; q, b g).
inline SeriesResult phi_continuation2(cplx g, double x, double a, double b, double c, const QBase& q) {
    if (!(std::abs(b * g) < 1.0)) throw DomainError("second continuation series for phi needs |b gamma| < 1");
    const double bc = b * c;
    const Scaled den = qpoch_inf_scaled({a * b, -bc * x}, q);
    if (den.is_zero()) throw PoleError("phi continuation prefactor", "(ab, -bcx; q)_inf");
    const Scaled pref = qpoch_inf_scaled({b * g, -a * bc * x / g}, q) / den;
    const auto s = phi_series({a / g, c / g, -a * c * x}, {a * c, -a * bc * x / g}, q, b * g);
    return scale_result(pref, s);
}

}  // namespace detail

/// phi_gamma(x; a, b, c) for a real argument x, with (a, b, c) arbitrary reals.
/// Auto route: the direct series for |bcx| <= 1/2, otherwise the continuation with
/// the member of {gamma, 1/gamma} of smaller modulus, then the second continuation,
/// then the direct series if |bcx| < 1.
inline SeriesResult phi_general(cplx gamma, double x, double a, double b, double c, const QBase& q,
                                PhiRoute route = PhiRoute::Auto) {
    if (gamma == 0.0) throw DomainError("phi requires gamma != 0");
    const cplx gs = std::abs(gamma) <= 1.0 ? gamma : 1.0 / gamma;  // smaller modulus
    const cplx gl = 1.0 / gs;
    switch (route) {
        case PhiRoute::Direct:
            return detail::phi_direct(gamma, x, a, b, c, q);
        case PhiRoute::Continuation:
            return detail::phi_continuation(std::abs(a * gs) < 1.0 ? gs : gl, x, a, b, c, q);
        case PhiRoute::Continuation2:
            return detail::phi_continuation2(std::abs(b * gs) < 1.0 ? gs : gl, x, a, b, c, q);
        case PhiRoute::Auto:
            break;
    }
    const double t = std::abs(b * c * x);
    if (t <= 0.5) return detail::phi_direct(gamma, x, a, b, c, q);
    std::string why;
    for (cplx g : {gs, gl}) {
        if (!(std::abs(a * g) < 1.0)) continue;
        try {
            return detail::phi_continuation(g, x, a, b, c, q);
        } catch (const DomainError& e) {
            why = e.what();
        }
    }
    for (cplx g : {gs, gl}) {
        if (!(std::abs(b * g) < 1.0)) continue;
        try {
            return detail::phi_continuation2(g, x, a, b, c, q);
        } catch (const DomainError& e) {
            why = e.what();
        }
    }
    if (t < 1.0) return detail::phi_direct(gamma, x, a, b, c, q);
    throw DomainError("no valid representation of phi at this (gamma, x)" + (why.empty() ? "" : ": " + why));
}

/// phi_gamma(x) on the lattice; phi_gamma(-1) = 1.
/// At x = -q^k the direct series terminates after k + 1 terms; Auto uses it there, since
/// the continuation series cancel badly for small |gamma| (or large |gamma|).
inline SeriesResult phi(cplx gamma, const LatticePoint& x, const Parameters& p, PhiRoute route = PhiRoute::Auto) {
    if (gamma == 0.0) throw DomainError("phi requires gamma != 0");
    const double xv = x.value(p);
    if (route == PhiRoute::Auto && x.branch == Branch::Neg && std::abs(p.b * p.c * xv) < 1.0)
        return detail::phi_direct(gamma, xv, p.a, p.b, p.c, p.q);
    return phi_general(gamma, xv, p.a, p.b, p.c, p.q, route);
}

/// psi_gamma(x; a, b, c) = phi_gamma(bcx/q; a, q/b, q/c) for real x.
inline SeriesResult psi_general(cplx gamma, double x, double a, double b, double c, const QBase& q,
                                PhiRoute route = PhiRoute::Auto) {
    const double qq = q.value();
    return phi_general(gamma, b * c * x / qq, a, qq / b, qq / c, q, route);
}

inline SeriesResult psi(cplx gamma, const LatticePoint& x, const Parameters& p, PhiRoute route = PhiRoute::Auto) {
    return psi_general(gamma, x.value(p), p.a, p.b, p.c, p.q, route);
}

/// psi from its defining series 3phi2(a g, a/g, -q/(bcx); qa/b, qa/c; q, -qx), |qx| < 1.
inline SeriesResult psi_direct(cplx gamma, const LatticePoint& x, const Parameters& p) {
    const double xv = x.value(p), qq = p.qv();
    if (!(std::abs(qq * xv) < 1.0)) throw DomainError("direct series for psi needs |qx| < 1");
    if (gamma == 0.0) throw DomainError("psi requires gamma != 0");
    return phi_series({p.a * gamma, p.a / gamma, -qq / (p.b * p.c * xv)}, {qq * p.a / p.b, qq * p.a / p.c}, p.q,
                      -qq * xv);
}

/// (D_q phi_gamma)(x) = bc mu / ((1-q)(1-ab)(1-ac)) phi_gamma(x; qa, b, c).
inline cplx dq_phi_formula(cplx gamma, const LatticePoint& x, const Parameters& p) {
    const double qq = p.qv();
    const double den = (1 - qq) * (1 - p.a * p.b) * (1 - p.a * p.c);
    if (den == 0.0) throw DomainError("dq_phi_formula needs ab, ac != 1");
    const cplx f = p.b * p.c * mu(gamma, p) / den;
    return f * phi_general(gamma, x.value(p), qq * p.a, p.b, p.c, p.q).value;
}

/// (D_q psi_gamma)(x) = q mu / ((1-q)(1-qa/b)(1-qa/c)) psi_gamma(x; qa, b, c).
inline cplx dq_psi_formula(cplx gamma, const LatticePoint& x, const Parameters& p) {
    const double qq = p.qv();
    const double den = (1 - qq) * (1 - qq * p.a / p.b) * (1 - qq * p.a / p.c);
    if (den == 0.0) throw DomainError("dq_psi_formula needs qa/b, qa/c != 1");
    const cplx f = qq * mu(gamma, p) / den;
    return f * psi_general(gamma, x.value(p), qq * p.a, p.b, p.c, p.q).value;
}

/// phi_gamma(0) and phi_gamma'(0) from the 2phi2 origin formulas.
inline std::pair<cplx, cplx> phi_origin_general(cplx gamma, double a, double b, double c, const QBase& q) {
    const double qq = q.value();
    const cplx m = -1.0 - a * a + a * (gamma + 1.0 / gamma);
    const cplx v = detail::phi_at_zero(gamma, a, b, c, q).value;
    const cplx d = b * c * m / ((1 - qq) * (1 - a * b) * (1 - a * c)) *
                   phi_series({qq * a * gamma, qq * a / gamma}, {qq * a * b, qq * a * c}, q, b * c).value;
    return {v, d};
}

inline std::pair<cplx, cplx> phi_origin(cplx gamma, const Parameters& p) {
    return phi_origin_general(gamma, p.a, p.b, p.c, p.q);
}

/// psi_gamma(0) = phi_gamma(0; a, q/b, q/c), psi_gamma'(0) = (bc/q) phi_gamma'(0; a, q/b, q/c).
inline std::pair<cplx, cplx> psi_origin(cplx gamma, const Parameters& p) {
    const double qq = p.qv();
    const auto [v, d] = phi_origin_general(gamma, p.a, qq / p.b, qq / p.c, p.q);
    return {v, p.b * p.c / qq * d};
}

// ---------------------------------------------------------------------------
// Asymptotic solution Phi_gamma on the positive branch

enum class AsymRoute {
    Auto,
    Large,       ///< transformed series in -q/(bcx), needs x > q/(bc)
    Small,       ///< series with argument a*gamma, needs |a gamma| < 1
    Recurrence,  ///< downward three-term recurrence from two seeds with x > q/(bc)
};

namespace detail {

/// Prefactor and 3phi2 of the Phi representation with argument a*gamma, at x = y q^k.
/// Used with y = z (x > 0) and with y = -1 (the Phi^- solution).
inline SeriesResult asym_small(cplx g, double x, int k, double a, double b, double c, const QBase& q) {
    if (!(std::abs(a * g) < 1.0)) throw DomainError("Phi series with argument a*gamma needs |a gamma| < 1");
    const double qq = q.value();
    const Scaled den = qpoch_inf_scaled({-qq / (a * b * x), -qq / (a * c * x), qq * g * g}, q);
    if (den.is_zero()) throw PoleError("Phi prefactor", "(-q/abx, -q/acx, q gamma^2; q)_inf");
    const Scaled pref = qpoch_inf_scaled({-qq * g / (a * x), -qq * qq * g / (a * b * c * x), a * g}, q) / den *
                        Scaled::ipow(a * g, -k);
    const auto s = phi_series({qq * g / a, -qq / (a * b * x), -qq / (a * c * x)},
                              {-qq * g / (a * x), -qq * qq * g / (a * b * c * x)}, q, a * g);
    return scale_result(pref, s);
}

/// Threshold above which the large-x series (argument -q/(bcx)) converges.
inline double asym_large_threshold(double b, double c, double q) { return q / (b * c); }

/// Representation with argument -q/(bcx), valid for x > q/(bc).
inline SeriesResult asym_large(cplx g, double x, int k, double a, double b, double c, const QBase& q) {
    const double qq = q.value();
    if (!(x > asym_large_threshold(b, c, qq))) throw DomainError("Phi large-x series needs x > q/(bc)");
    const Scaled den = qpoch_inf_scaled({-qq / (a * b * x), -qq / (a * c * x)}, q);
    if (den.is_zero()) throw PoleError("Phi prefactor", "(-q/abx, -q/acx; q)_inf");
    const Scaled pref =
        qpoch_inf_scaled({-qq / (b * c * x), -qq * g / (a * x)}, q) / den * Scaled::ipow(a * g, -k);
    const auto s = phi_series({qq * g / a, b * g, c * g}, {-qq * g / (a * x), qq * g * g}, q, -qq / (b * c * x));
    return scale_result(pref, s);
}

/// Largest Pos index k with z q^k > q/(bc).
inline int asym_seed_index(const Parameters& p) {
    const double qq = p.qv();
    const double thr = asym_large_threshold(p.b, p.c, qq);
    int k = static_cast<int>(std::floor(std::log(thr / p.z) / std::log(qq)));
    while (!(LatticePoint::pos(k).value(p) > thr)) --k;
    while (LatticePoint::pos(k + 1).value(p) > thr) ++k;
    return k;
}

/// Downward recurrence f(qx) = f(x) + [mu f(x) - B(x)(f(x/q) - f(x))] / A(x).
inline std::vector<cplx> asym_recurrence(cplx g, int k_seed, int k_target, const Parameters& p) {
    std::vector<cplx> vals;
    const auto s0 = asym_large(g, LatticePoint::pos(k_seed - 1).value(p), k_seed - 1, p.a, p.b, p.c, p.q);
    const auto s1 = asym_large(g, LatticePoint::pos(k_seed).value(p), k_seed, p.a, p.b, p.c, p.q);
    vals.push_back(s0.value);
    vals.push_back(s1.value);
    const cplx m = mu(g, p);
    for (int k = k_seed; k < k_target; ++k) {
        const double x = LatticePoint::pos(k).value(p);
        const cplx fu = vals[vals.size() - 2], fx = vals.back();
        vals.push_back(fx + (m * fx - coeff_B(x, p) * (fu - fx)) / coeff_A(x, p));
    }
    return vals;  // indices k_seed - 1 .. k_target
}

}  // namespace detail

/// Phi_gamma(z q^k) on the positive branch.
/// Auto route: large-x series when x > q/(bc); otherwise the a*gamma series when it
/// converges and keeps full precision, else the downward recurrence.
inline SeriesResult phi_asym(cplx gamma, int k, const Parameters& p, AsymRoute route = AsymRoute::Auto) {
    if (gamma == 0.0) throw DomainError("Phi requires gamma != 0");
    if (in_S_sing_plus(gamma, p)) throw DomainError("Phi_gamma undefined for gamma in S_sing^+");
    const double x = LatticePoint::pos(k).value(p);
    const bool large_ok = x > detail::asym_large_threshold(p.b, p.c, p.qv());
    switch (route) {
        case AsymRoute::Large:
            return detail::asym_large(gamma, x, k, p.a, p.b, p.c, p.q);
        case AsymRoute::Small:
            return detail::asym_small(gamma, x, k, p.a, p.b, p.c, p.q);
        case AsymRoute::Recurrence: {
            const int ks = detail::asym_seed_index(p);
            if (k <= ks) return detail::asym_large(gamma, x, k, p.a, p.b, p.c, p.q);
            const auto v = detail::asym_recurrence(gamma, ks, k, p);
            return {v.back(), 1e-15 * (k - ks) * std::abs(v.back()), k - ks};
        }
        case AsymRoute::Auto:
            break;
    }
    if (large_ok) return detail::asym_large(gamma, x, k, p.a, p.b, p.c, p.q);
    if (std::abs(p.a * gamma) < 1.0) {
        try {
            auto r = detail::asym_small(gamma, x, k, p.a, p.b, p.c, p.q);
            if (r.err_estimate <= 1e-12 * std::abs(r.value)) return r;
        } catch (const DomainError&) {
        }
    }
    return phi_asym(gamma, k, p, AsymRoute::Recurrence);
}

inline SeriesResult phi_asym(cplx gamma, const LatticePoint& x, const Parameters& p, AsymRoute route = AsymRoute::Auto) {
    if (x.branch != Branch::Pos) throw DomainError("phi_asym is defined on the positive branch");
    return phi_asym(gamma, x.k, p, route);
}

/// Phi^y_gamma with a different base point y > 0 (x = y q^k).
inline SeriesResult phi_asym_based(cplx gamma, int k, double y_base, const Parameters& p,
                                   AsymRoute route = AsymRoute::Auto) {
    Parameters py = p;
    py.z = y_base;
    return phi_asym(gamma, k, py, route);
}

/// Phi_gamma sampled on the positive branch of a window (one recurrence pass).
inline std::vector<cplx> phi_asym_samples(cplx gamma, int k_min, int k_max, const Parameters& p) {
    if (in_S_sing_plus(gamma, p)) throw DomainError("Phi_gamma undefined for gamma in S_sing^+");
    std::vector<cplx> out;
    const int ks = detail::asym_seed_index(p);
    for (int k = k_min; k <= std::min(k_max, ks); ++k)
        out.push_back(detail::asym_large(gamma, LatticePoint::pos(k).value(p), k, p.a, p.b, p.c, p.q).value);
    if (k_max > ks) {
        const auto v = detail::asym_recurrence(gamma, ks, k_max, p);
        for (int k = std::max(k_min, ks + 1); k <= k_max; ++k) out.push_back(v[static_cast<std::size_t>(k - ks + 1)]);
    }
    return out;
}

/// Phi^-_gamma(-q^k): the a*gamma representation with base point y = -1.
inline SeriesResult phi_minus(cplx gamma, const LatticePoint& x, const Parameters& p) {
    if (x.branch != Branch::Neg) throw DomainError("phi_minus is defined on the negative branch");
    if (!(std::abs(gamma) < 1.0 / p.a)) throw DomainError("phi_minus needs |gamma| < 1/a");
    if (in_S_sing_plus(gamma, p)) throw DomainError("phi_minus undefined for gamma in S_sing^+");
    return detail::asym_small(gamma, x.value(p), x.k, p.a, p.b, p.c, p.q);
}

/// (q g/a, q g/b, q g/c; q)_inf / (q/ab, q/ac, q g^2; q)_inf: the factor with Phi^- = factor * phi on I_-.
inline cplx phi_minus_factor(cplx gamma, const Parameters& p) {
    const double qq = p.qv();
    const Scaled den = qpoch_inf_scaled({qq / (p.a * p.b), qq / (p.a * p.c), qq * gamma * gamma}, p.q);
    if (den.is_zero()) throw PoleError("phi_minus factor", "(q/ab, q/ac, q gamma^2; q)_inf");
    return (qpoch_inf_scaled({qq * gamma / p.a, qq * gamma / p.b, qq * gamma / p.c}, p.q) / den).value();
}

// ---------------------------------------------------------------------------
// Big q-Jacobi polynomials

/// (qa/b, qa/c; q)_n / (ab, ac; q)_n (bc/q)^n: phi_{a q^n} = ratio * psi_{a q^n}.
inline cplx bigq_psi_ratio(int n, const Parameters& p) {
    const QBase& q = p.q;
    const double qq = p.qv();
    const cplx den = qpoch_finite(p.a * p.b, q, n) * qpoch_finite(p.a * p.c, q, n);
    if (den == 0.0) throw DomainError("big q-Jacobi ratio: (ab, ac; q)_n vanishes");
    return qpoch_finite(qq * p.a / p.b, q, n) * qpoch_finite(qq * p.a / p.c, q, n) / den *
           std::pow(p.b * p.c / qq, n);
}

/// phi_{a q^n}(x) as a polynomial of degree n in x (any complex x):
/// sum_k (q^-n, a^2 q^n; q)_k / (ab, ac, q; q)_k (-bc)^k prod_{j<k} (x + q^j).
inline cplx big_qjacobi_poly(int n, cplx x, const Parameters& p) {
    if (n < 0) throw DomainError("big_qjacobi_poly needs n >= 0");
    const QBase& q = p.q;
    const double qq = p.qv(), a = p.a, b = p.b, c = p.c;
    if (qpoch_finite(a * c, q, n) == 0.0) throw DomainError("big_qjacobi_poly: (ac; q)_n vanishes");
    if (qpoch_finite(a * b, q, n) == 0.0) throw DomainError("big_qjacobi_poly: (ab; q)_n vanishes");
    cplx term = 1.0, sum = 1.0;
    double qk = 1.0;
    for (int k = 0; k < n; ++k) {
        term *= (1.0 - std::pow(qq, k - n)) * (1.0 - a * a * std::pow(qq, n + k)) * (x + qk) * (-b * c) /
                ((1.0 - a * b * qk) * (1.0 - a * c * qk) * (1.0 - qq * qk));
        sum += term;
        qk *= qq;
    }
    return sum;
}

}  // namespace bqj
