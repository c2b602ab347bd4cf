/// @file spectral.hpp
/// @brief Plancherel measure (continuous density and discrete atoms), the constant M,
///        the Askey-Wilson weight, the Green kernel, the resolvent and Stone's formula.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "cfun.hpp"
#include "eigen.hpp"
#include "lattice.hpp"
#include "qseries.hpp"

namespace bqj {

// ---------------------------------------------------------------------------
// Constants

/// M = (ab, ac; q)_inf^2 theta(-bcz)^2 / K.
inline double const_M(const Parameters& p) {
    const QBase& q = p.q;
    const Scaled pq = qpoch_inf_scaled({p.a * p.b, p.a * p.c}, q);
    const Scaled t = theta_reduced_scaled(-p.b * p.c * p.z, q);
    return (pq * pq * t * t / Scaled(const_K(p))).value().real();
}

/// M = (ab, ac; q)_inf^2 theta(-abz, -acz, -bcz) / ((1-q) z theta(-1/z)).
inline double const_M_explicit(const Parameters& p) {
    const QBase& q = p.q;
    const double z = p.z;
    const Scaled pq = qpoch_inf_scaled({p.a * p.b, p.a * p.c}, q);
    const Scaled num = pq * pq * theta_reduced_scaled({-p.a * p.b * z, -p.a * p.c * z, -p.b * p.c * z}, q);
    return (num / (Scaled((1 - p.qv()) * z) * theta_reduced_scaled(-1.0 / z, q))).value().real();
}

// ---------------------------------------------------------------------------
// Askey-Wilson weight

/// Delta(x) = (x^2, 1/x^2; q)_inf / prod_j (t_j x, t_j/x; q)_inf.
inline cplx aw_weight(cplx x, const std::array<double, 4>& t, const QBase& q) {
    if (x == 0.0) throw DomainError("aw_weight requires x != 0");
    Scaled den(1.0);
    for (double tj : t) den *= qpoch_inf_scaled({tj * x, tj / x}, q);
    if (den.is_zero()) throw PoleError("aw_weight pole", "(t_j x, t_j/x; q)_inf");
    return (qpoch_inf_scaled({x * x, 1.0 / (x * x)}, q) / den).value();
}

/// Residue of Delta(x)/x at x = e q^k with e = t[j].
inline double aw_residue(int j, int k, const std::array<double, 4>& t, const QBase& q) {
    if (j < 0 || j > 3 || k < 0) throw DomainError("aw_residue needs 0 <= j <= 3 and k >= 0");
    const double e = t[static_cast<std::size_t>(j)], qq = q.value();
    std::array<double, 3> o{};
    for (int i = 0, n = 0; i < 4; ++i)
        if (i != j) o[static_cast<std::size_t>(n++)] = t[static_cast<std::size_t>(i)];
    if (e * e == 1.0) throw DomainError("aw_residue: e^2 = 1 gives a double pole");
    Scaled den = qpoch_inf_scaled(qq, q);
    for (double f : o) den *= qpoch_inf_scaled({e * f, f / e}, q);
    if (den.is_zero()) throw DomainError("aw_residue: pole is not simple");
    Scaled v = qpoch_inf_scaled(1.0 / (e * e), q) / den;
    cplx fin = qpoch_finite(e * e, q, k);
    cplx fden = qpoch_finite(qq, q, k);
    for (double f : o) {
        fin *= qpoch_finite(e * f, q, k);
        fden *= qpoch_finite(qq * e / f, q, k);
    }
    if (fden == 0.0) throw DomainError("aw_residue: pole is not simple");
    v *= Scaled(fin / fden * (1.0 - e * e * std::pow(qq, 2 * k)) / (1.0 - e * e));
    v *= Scaled::ipow(qq / (e * o[0] * o[1] * o[2]), k);
    return v.value().real();
}

// ---------------------------------------------------------------------------
// Discrete spectrum

enum class AtomFamily { Pos, Neg };

/// A point mass of the Plancherel measure at gamma_tilde in (-1, 1).
/// Pos: gamma_tilde = 1/(q^k e) with e = (a, b, c)[e_index]. Neg: gamma_tilde = -abcz/q^{k+1}.
struct DiscreteAtom {
    double gamma_tilde = 0.0;
    AtomFamily family = AtomFamily::Neg;
    int e_index = -1;
    int k = 0;
    double mass = 0.0;
    double mu_value = 0.0;
};

struct DiscreteSet {
    std::vector<DiscreteAtom> atoms;  ///< ordered by increasing |gamma_tilde| within each family
    double dropped_mass_bound = 0.0;  ///< bound on the total mass of truncated Neg atoms
};

namespace detail {

inline double param_e(const Parameters& p, int i) { return i == 0 ? p.a : (i == 1 ? p.b : p.c); }

/// Closed-form mass of the Pos-family atom 1/(q^k e), kept scaled.
inline Scaled mass_pos_scaled(int ei, int k, const Parameters& p) {
    const QBase& q = p.q;
    const double qq = p.qv(), z = p.z;
    const double e = param_e(p, ei), f = param_e(p, (ei + 1) % 3), g = param_e(p, (ei + 2) % 3);
    const Scaled den = qpoch_inf_scaled({qq, e * f, f / e, e * g, g / e}, q) *
                       theta_reduced_scaled({-f * g * z, -e * e * f * g * z}, q);
    if (den.is_zero()) throw DomainError("Pos-family mass: degenerate parameters");
    Scaled v = Scaled(const_M(p)) * qpoch_inf_scaled(1.0 / (e * e), q) / den;
    const cplx fin = qpoch_finite(e * e, q, k) * qpoch_finite(e * f, q, k) * qpoch_finite(e * g, q, k);
    const cplx fden = qpoch_finite(qq, q, k) * qpoch_finite(qq * e / f, q, k) * qpoch_finite(qq * e / g, q, k);
    v *= Scaled(fin / fden * (1.0 - e * e * std::pow(qq, 2 * k)) / (1.0 - e * e));
    // (-q^{(k+1)/2}/(fg))^k = q^{k(k+1)/2} (-1/(fg))^k
    v *= Scaled::ipow(qq, static_cast<std::int64_t>(k) * (k + 1) / 2) * Scaled::ipow(-1.0 / (f * g), k);
    return v;
}

/// Closed-form mass of the Neg-family atom -abcz/q^{k+1}, kept scaled.
inline Scaled mass_neg_scaled(int k, const Parameters& p) {
    const QBase& q = p.q;
    const double qq = p.qv(), a = p.a, b = p.b, c = p.c, z = p.z;
    const double s = a * b * c * z;
    const Scaled den = qpoch_inf_scaled({qq, qq, -qq / (a * b * z), -qq / (a * c * z), -qq / (b * c * z),
                                         -a * s / qq, -b * s / qq, -c * s / qq},
                                        q);
    Scaled v = Scaled(const_M(p)) / den;
    const Scaled fin = qpoch_finite_scaled(-qq / (a * b * z), q, k) * qpoch_finite_scaled(-qq / (a * c * z), q, k) *
                       qpoch_finite_scaled(-qq / (b * c * z), q, k);
    const Scaled fden = qpoch_finite_scaled(-qq * qq / (a * s), q, k) * qpoch_finite_scaled(-qq * qq / (b * s), q, k) *
                        qpoch_finite_scaled(-qq * qq / (c * s), q, k);
    if (fden.is_zero()) throw DomainError("Neg-family mass: degenerate parameters");
    v *= fin / fden;
    // q^{2k} - s^2/q^2 = q^{2k} (1 - s^2 q^{-2k-2}); the bracket stays in range because |atom| < 1.
    const cplx bracket = 1.0 - (Scaled(s * s / (qq * qq)) * Scaled::ipow(qq, -2 * static_cast<std::int64_t>(k))).value();
    v *= Scaled::ipow(qq, 2 * static_cast<std::int64_t>(k)) * Scaled(bracket);
    // (q^{(k+3)/2}/(s^2/z))^k = q^{k(k+3)/2} (z/s^2)^k
    v *= Scaled::ipow(qq, static_cast<std::int64_t>(k) * (k + 3) / 2) * Scaled::ipow(z / (s * s), k);
    return v;
}

}  // namespace detail

/// Closed-form atom mass.
inline double discrete_mass(const DiscreteAtom& atom, const Parameters& p) {
    const Scaled v = atom.family == AtomFamily::Pos ? detail::mass_pos_scaled(atom.e_index, atom.k, p)
                                                    : detail::mass_neg_scaled(atom.k, p);
    return v.value().real();
}

/// Atom masses below this are dropped from the Neg family.
inline constexpr double kAtomMassFloor = 1e-300;

/// The set S of atoms with their closed-form masses.
inline DiscreteSet discrete_set_S(const Parameters& p) {
    if (!p.in_V()) throw DomainError("discrete_set_S needs parameters in V");
    DiscreteSet out;
    const double qq = p.qv();
    for (int ei = 0; ei < 3; ++ei) {
        const double e = detail::param_e(p, ei);
        for (int k = 0; e * std::pow(qq, k) > 1.0; ++k) {
            DiscreteAtom at;
            at.family = AtomFamily::Pos;
            at.e_index = ei;
            at.k = k;
            at.gamma_tilde = 1.0 / (e * std::pow(qq, k));
            out.atoms.push_back(at);
        }
    }
    // Neg family: abcz/q^{k+1} < 1, i.e. k + 1 < log(abcz)/log(q).
    const double s = p.a * p.b * p.c * p.z;
    int kmax = static_cast<int>(std::ceil(std::log(s) / std::log(qq))) - 1;
    while (s / std::pow(qq, kmax + 1) >= 1.0) --kmax;
    while (s / std::pow(qq, kmax + 2) < 1.0) ++kmax;
    for (int k = kmax;; --k) {
        const double m = detail::mass_neg_scaled(k, p).value().real();
        if (std::abs(m) < kAtomMassFloor || k < kmax - 2000) {
            // Super-geometric decay: the first dropped mass bounds the rest up to a factor 2.
            out.dropped_mass_bound = 2.0 * std::abs(m);
            break;
        }
        DiscreteAtom at;
        at.family = AtomFamily::Neg;
        at.k = k;
        at.gamma_tilde = -s * std::pow(qq, -(k + 1));
        out.atoms.push_back(at);
    }
    for (auto& at : out.atoms) {
        at.mass = discrete_mass(at, p);
        at.mu_value = mu(at.gamma_tilde, p).real();
    }
    return out;
}

namespace detail {

/// Poles of gamma -> 1/(gamma c(gamma) c(1/gamma)) nearest to `center`, excluding center itself.
inline double nearest_other_pole(double center, const Parameters& p) {
    const double qq = p.qv(), s = p.a * p.b * p.c * p.z;
    double best = std::abs(center);  // essential singularity at 0
    auto consider = [&](double v) {
        const double d = std::abs(v - center);
        if (d > 1e-12 * std::abs(center)) best = std::min(best, d);
    };
    for (int j = -600; j <= 600; ++j) {
        const double qj = std::pow(qq, j);
        if (!std::isfinite(qj) || qj == 0.0) continue;
        for (int i = 0; i < 3; ++i) {
            const double e = param_e(p, i);
            if (j >= 0) {
                consider(e * qj);
                consider(1.0 / (e * qj));
            }
        }
        consider(-s * qj);
        consider(-qj / s);
    }
    return best;
}

}  // namespace detail

/// Contour residue (1/2 pi i) of f around `center` on a circle of `radius`, n-point trapezoid.
template <class F>
cplx contour_residue(F&& f, cplx center, double radius, int n = 64) {
    cplx sum = 0.0;
    for (int j = 0; j < n; ++j) {
        const cplx u = std::polar(1.0, 2.0 * std::numbers::pi * j / n);
        sum += f(center + radius * u) * u;
    }
    return radius * sum / static_cast<double>(n);
}

/// (1/K) Res_{gamma = gamma_tilde} of -1/(gamma c(gamma) c(1/gamma)), numerically.
/// Values are rescaled to the centre's magnitude so tiny masses do not underflow.
inline double discrete_mass_residue(const DiscreteAtom& atom, const Parameters& p) {
    const double g0 = atom.gamma_tilde;
    const double r = std::min({1e-3 * std::max(1.0, std::abs(g0)), 0.5 * detail::nearest_other_pole(g0, p)});
    const double K = const_K(p);
    auto scaled = [&](cplx g) {
        return detail::c_reciprocal_scaled(g, p.a, p.b, p.c, p.z, p.q) *
               detail::c_reciprocal_scaled(1.0 / g, p.a, p.b, p.c, p.z, p.q) / Scaled(-K * g);
    };
    const std::int64_t e0 = scaled(g0 + r).exponent();
    const cplx res = contour_residue([&](cplx g) { return (scaled(g) * Scaled::pow2(-e0)).value(); }, g0, r);
    return (Scaled(res) * Scaled::pow2(e0)).value().real();
}

/// Max relative difference between 1/(K c(g) c(1/g) g) and
/// M Delta(g; e, f, -q/efgz, -efgz) / ((h g, h/g; q)_inf g) over the three choices of h.
inline double rel_planch_aw_residual(cplx g, const Parameters& p) {
    const double qq = p.qv(), z = p.z, s = p.a * p.b * p.c;
    const cplx lhs = c_reciprocal(g, p) * c_reciprocal(1.0 / g, p) / (const_K(p) * g);
    const double M = const_M(p);
    double worst = 0.0;
    for (int hi = 0; hi < 3; ++hi) {
        const double h = detail::param_e(p, hi), e = detail::param_e(p, (hi + 1) % 3),
                     f = detail::param_e(p, (hi + 2) % 3);
        const std::array<double, 4> t{e, f, -qq / (s * z), -s * z};
        const cplx rhs = M * aw_weight(g, t, p.q) / (qpoch_inf_scaled({h * g, h / g}, p.q).value() * g);
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Continuous part

/// Density w.r.t. d(theta) on [0, pi]: 1/(2 pi K |c(e^{i theta})|^2).
/// A pole of 1/c on the circle is replaced by the average at theta +- 1e-6.
inline double continuous_density(double theta, const Parameters& p) {
    auto dens = [&](double t) {
        const double r = std::abs(c_reciprocal(std::polar(1.0, t), p));
        return r * r / (2.0 * std::numbers::pi * const_K(p));
    };
    try {
        return dens(theta);
    } catch (const PoleError&) {
        return 0.5 * (dens(theta - 1e-6) + dens(theta + 1e-6));
    }
}

/// Discrete Plancherel measure on [0, pi] (trapezoid) plus the atoms.
struct SpectralMeasure {
    Parameters params;
    double K = 0.0, M = 0.0;
    DiscreteSet discrete;
    std::vector<double> theta;    ///< grid on [0, pi]
    std::vector<double> weight;   ///< trapezoid weight times density
    double continuous_mass = 0.0;

    /// Builds the measure with at least `min_points` grid intervals, doubling until the
    /// continuous mass changes by less than 1e-8 relative.
    static SpectralMeasure make(const Parameters& p, int min_points = 1024) {
        SpectralMeasure m;
        m.params = p;
        m.K = const_K(p);
        m.M = const_M(p);
        m.discrete = discrete_set_S(p);
        // Trapezoid error on the circle decays like rho^(2N) with rho the largest modulus
        // of a density pole inside the unit disc.
        double rho = 0.0;
        for (const auto& at : m.discrete.atoms) rho = std::max(rho, std::abs(at.gamma_tilde));
        for (int i = 0; i < 3; ++i) {
            const double e = detail::param_e(p, i);
            for (int j = 0; j < 200; ++j) {
                const double v = e * std::pow(p.qv(), j);
                if (v < 1.0) rho = std::max(rho, v);
            }
        }
        int n = std::max(min_points, 16);
        if (rho > 0.0 && rho < 1.0) {
            const double need = 20.0 / -std::log(rho);
            while (n < need && n < (1 << 18)) n *= 2;
        }
        double prev = m.build(n);
        for (int it = 0; it < 6; ++it) {
            const double cur = m.build(2 * n);
            n *= 2;
            if (std::abs(cur - prev) <= 1e-8 * std::abs(cur)) break;
            prev = cur;
        }
        return m;
    }

    int intervals() const { return static_cast<int>(theta.size()) - 1; }

    double total_atom_mass() const {
        double s = 0.0;
        for (const auto& at : discrete.atoms) s += at.mass;
        return s;
    }

    /// JSON export with {K, M, atoms, density_samples}.
    nlohmann::json to_json(int n_density_samples = 64) const {
        nlohmann::json j;
        j["K"] = K;
        j["M"] = M;
        j["continuous_mass"] = continuous_mass;
        j["dropped_mass_bound"] = discrete.dropped_mass_bound;
        j["atoms"] = nlohmann::json::array();
        for (const auto& at : discrete.atoms) {
            j["atoms"].push_back({{"family", at.family == AtomFamily::Pos ? "pos" : "neg"},
                                  {"e", at.e_index},
                                  {"k", at.k},
                                  {"gamma", at.gamma_tilde},
                                  {"mu", at.mu_value},
                                  {"mass", at.mass}});
        }
        j["density_samples"] = nlohmann::json::array();
        for (int i = 0; i <= n_density_samples; ++i) {
            const double t = std::numbers::pi * i / n_density_samples;
            j["density_samples"].push_back({{"theta", t}, {"value", continuous_density(t, params)}});
        }
        return j;
    }

private:
    double build(int n) {
        theta.assign(static_cast<std::size_t>(n) + 1, 0.0);
        weight.assign(static_cast<std::size_t>(n) + 1, 0.0);
        const double h = std::numbers::pi / n;
        double total = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = h * i;
            theta[static_cast<std::size_t>(i)] = t;
            const double w = (i == 0 || i == n) ? 0.5 * h : h;
            weight[static_cast<std::size_t>(i)] = w * continuous_density(t, params);
            total += weight[static_cast<std::size_t>(i)];
        }
        continuous_mass = total;
        return total;
    }
};

// ---------------------------------------------------------------------------
// Eigenfunctions at atoms

/// phi at a real atom gamma_tilde: c(gamma_tilde) Phi_gamma_tilde on I_+, phi on I_-.
/// On I_+ the direct representations cancel catastrophically for |gamma| < 1.
inline cplx phi_at_atom(double gamma_tilde, const LatticePoint& x, const Parameters& p) {
    if (x.branch == Branch::Neg) return phi(gamma_tilde, x, p).value;
    return c_function(gamma_tilde, p) * phi_asym(gamma_tilde, x, p).value;
}

// ---------------------------------------------------------------------------
// Green kernel and resolvent

/// phi_gamma and the second kernel factor (Phi_gamma, or psi_gamma in the polynomial
/// regime) at lattice points, with the kernel Wronskian.
class GreenBasis {
public:
    GreenBasis(cplx gamma, const Parameters& p) : gamma_(gamma), p_(p) {
        if (p.regime == Regime::Polynomial) {
            W_ = wronskian_psi_phi_closed(gamma, p);
        } else {
            W_ = W_gamma(gamma, p);
        }
        if (W_ == 0.0) throw DomainError("Green kernel: vanishing Wronskian");
    }

    cplx wronskian() const { return W_; }
    cplx gamma() const { return gamma_; }

    cplx phi_at(const LatticePoint& x) { return lookup(x).first; }
    cplx second_at(const LatticePoint& x) { return lookup(x).second; }

    /// K_gamma(x, y) = W^{-1} S(max) phi(min), S the second factor.
    cplx kernel(const LatticePoint& x, const LatticePoint& y) {
        const double xv = x.value(p_), yv = y.value(p_);
        return yv <= xv ? second_at(x) * phi_at(y) / W_ : phi_at(x) * second_at(y) / W_;
    }

private:
    std::pair<cplx, cplx> lookup(const LatticePoint& x) {
        const auto key = std::make_pair(x.branch == Branch::Neg ? 0 : 1, x.k);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        const cplx f = phi(gamma_, x, p_).value;
        cplx s;
        if (p_.regime == Regime::Polynomial) {
            s = psi(gamma_, x, p_).value;
        } else {
            s = phi_asym_full(gamma_, x, p_);
        }
        return cache_[key] = {f, s};
    }

    cplx gamma_;
    Parameters p_;
    cplx W_{};
    std::map<std::pair<int, int>, std::pair<cplx, cplx>> cache_;
};

/// The spectral parameter of the resolvent at a non-real mu (|gamma| < 1).
inline cplx resolvent_gamma(cplx m, const Parameters& p) {
    if (m.imag() == 0.0) throw DomainError("resolvent needs a non-real spectral value");
    return gamma_of_mu(m, p);
}

namespace detail {

/// Nonzero entries (point, value, Jackson weight) of a lattice function.
struct SupportEntry {
    LatticePoint x;
    cplx value;
    double weight;
};

inline std::vector<SupportEntry> support_of(const LatticeFunction& f, const Parameters& p) {
    std::vector<SupportEntry> out;
    for (const auto& x : f.window().points()) {
        if (!f.valid(x)) continue;
        const cplx v = f[x];
        if (v != 0.0) out.push_back({x, v, jackson_weight(x, p)});
    }
    return out;
}

}  // namespace detail

/// G_f(x, gamma) = sum_y K_gamma(x, y) f(y) w(y) on the window of `f`.
inline LatticeFunction green_apply(const LatticeFunction& f, cplx gamma, const Parameters& p) {
    if (!(std::abs(gamma) < 1.0)) throw DomainError("green_apply needs |gamma| < 1");
    if (mu(gamma, p).imag() == 0.0) throw DomainError("green_apply needs a non-real mu(gamma)");
    GreenBasis gb(gamma, p);
    const auto pts = f.window().points();  // increasing x
    const std::size_t n = pts.size();
    // left[i] = sum_{j <= i} f phi w, right[i] = sum_{j > i} f S w
    std::vector<cplx> left(n), right(n);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx v = f.valid(pts[i]) ? f[pts[i]] : cplx(0.0);
        if (v != 0.0) acc += v * gb.phi_at(pts[i]) * jackson_weight(pts[i], p);
        left[i] = acc;
    }
    acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        right[i] = acc;
        const cplx v = f.valid(pts[i]) ? f[pts[i]] : cplx(0.0);
        if (v != 0.0) acc += v * gb.second_at(pts[i]) * jackson_weight(pts[i], p);
    }
    LatticeFunction g(f.window());
    for (std::size_t i = 0; i < n; ++i) {
        cplx val = 0.0;
        if (left[i] != 0.0) val += gb.second_at(pts[i]) * left[i];
        if (right[i] != 0.0) val += gb.phi_at(pts[i]) * right[i];
        g[pts[i]] = val / gb.wronskian();
    }
    return g;
}

/// Max over interior window points of |(L - mu)G - f| / (1 + S(x)), S the magnitude of the
/// individual terms of (L - mu)G at x.
inline double resolvent_residual(const LatticeFunction& f, const LatticeFunction& G, cplx gamma,
                                 const Parameters& p) {
    const cplx m = mu(gamma, p);
    const auto LG = apply_L(G, p);
    double worst = 0.0;
    for (const auto& x : G.window().points()) {
        if (!LG.valid(x)) continue;
        const double xv = x.value(p);
        const cplx fx = G[x];
        double scale = std::abs(m * fx);
        const bool lower = detail::is_lower_endpoint(x), upper = detail::is_upper_endpoint(x, p);
        scale += std::abs(coeff_A(xv, p)) * (std::abs(G[x.shifted_down()]) + std::abs(fx));
        if (!lower && !upper) scale += std::abs(coeff_B(xv, p)) * (std::abs(G[x.shifted_up()]) + std::abs(fx));
        const cplx src = f.valid(x) ? f[x] : cplx(0.0);
        worst = std::max(worst, std::abs(LG[x] - m * fx - src) / (1.0 + scale));
    }
    return worst;
}

/// <R(mu) f, g> = sum_x sum_y K_gamma(x, y) f(y) conj(g(x)) w(x) w(y), R(mu) = (L - mu)^{-1}.
inline cplx resolvent_pairing(const LatticeFunction& f, const LatticeFunction& g, cplx m, const Parameters& p) {
    const cplx gamma = resolvent_gamma(m, p);
    GreenBasis gb(gamma, p);
    const auto sf = detail::support_of(f, p), sg = detail::support_of(g, p);
    cplx s = 0.0;
    for (const auto& ex : sg)
        for (const auto& ey : sf) s += gb.kernel(ex.x, ey.x) * ey.value * std::conj(ex.value) * ex.weight * ey.weight;
    return s;
}

// ---------------------------------------------------------------------------
// Transform values needed by the spectral projection

/// (F f)(gamma) = <f, phi_gamma> for finitely supported f.
inline cplx transform_value(const LatticeFunction& f, cplx gamma, const Parameters& p) {
    cplx s = 0.0;
    for (const auto& e : detail::support_of(f, p)) s += e.value * std::conj(phi(gamma, e.x, p).value) * e.weight;
    return s;
}

inline cplx transform_at_atom(const LatticeFunction& f, double gamma_tilde, const Parameters& p) {
    cplx s = 0.0;
    for (const auto& e : detail::support_of(f, p)) s += e.value * std::conj(phi_at_atom(gamma_tilde, e.x, p)) * e.weight;
    return s;
}

// ---------------------------------------------------------------------------
// Stone's formula

struct StoneResult {
    cplx lhs;                      ///< extrapolated Stone limit
    cplx rhs;                      ///< closed-form spectral projection
    double scale = 1.0;            ///< ||f|| ||g||
    std::vector<cplx> lhs_by_eps;  ///< unextrapolated values, one per eps
};

namespace detail {

/// Adaptive 61-point Gauss-Kronrod for complex integrands with an absolute error target.
template <class F>
cplx integrate_abs(const F& f, double a, double b, double abs_tol, int depth = 14) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    // The imaginary pass visits the same nodes in the same order; reuse the first pass.
    std::vector<std::pair<double, cplx>> nodes;
    std::size_t next = 0;
    auto value_at = [&](double x) {
        if (next < nodes.size() && nodes[next].first == x) return nodes[next++].second;
        return f(x);
    };
    double err_re = 0.0, err_im = 0.0;
    const double re = GK::integrate(
        [&](double x) {
            const cplx v = f(x);
            nodes.emplace_back(x, v);
            return v.real();
        },
        a, b, 0, 0.0, &err_re);
    const double im = GK::integrate([&](double x) { return value_at(x).imag(); }, a, b, 0, 0.0, &err_im);
    if (std::hypot(err_re, err_im) <= abs_tol || depth == 0) return {re, im};
    const double mid = 0.5 * (a + b);
    return integrate_abs(f, a, mid, 0.5 * abs_tol, depth - 1) + integrate_abs(f, mid, b, 0.5 * abs_tol, depth - 1);
}

inline double lattice_norm(const LatticeFunction& f, const Parameters& p) {
    double s = 0.0;
    for (const auto& e : support_of(f, p)) s += std::norm(e.value) * e.weight;
    return std::sqrt(s);
}

/// Spectral values mu at which the measure has atoms (closed-form list).
inline std::vector<double> atom_mus(const Parameters& p) {
    std::vector<double> out;
    if (p.regime == Regime::Polynomial) {
        for (int n = 0; n < 200; ++n) {
            const double gn = p.a * std::pow(p.qv(), n);
            const double m = mu(gn, p).real();
            if (!std::isfinite(m)) break;
            out.push_back(m);
        }
    } else {
        for (const auto& at : discrete_set_S(p).atoms) out.push_back(at.mu_value);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Polynomial regime

/// Squared norm of psi_{a q^n} on [-1, -q/bc]_q, closed form.
inline double big_qjacobi_norm(int n, const Parameters& p) {
    if (n < 0) throw DomainError("big_qjacobi_norm needs n >= 0");
    if (!p.in_polynomial_regime()) throw DomainError("big_qjacobi_norm needs the polynomial regime");
    const QBase& q = p.q;
    const double qq = p.qv(), a = p.a, b = p.b, c = p.c, qn = std::pow(qq, n);
    const Scaled den = qpoch_inf_scaled({qq * a / b, qq * a / c, qn * a * b, qn * a * c}, q);
    const cplx fden = qpoch_finite(qq * a / b, q, n) * qpoch_finite(qq * a / c, q, n);
    if (den.is_zero() || fden == 0.0) throw DomainError("big_qjacobi_norm: degenerate parameters");
    Scaled v = Scaled(1 - qq) * qpoch_inf_scaled({qq, b * c, qq / (b * c), qn * qn * qq * a * a}, q) / den;
    v *= Scaled(qpoch_finite(qq, q, n) * qpoch_finite(qn * a * a, q, n) / fden);
    v *= Scaled::ipow(-std::pow(qq, 0.5 * (3 - n)) / (b * c), n);
    return v.value().real();
}

/// The same norm from the residue of 1/W(psi, phi) at gamma = a q^n.
inline double big_qjacobi_norm_residue(int n, const Parameters& p) {
    if (n < 0) throw DomainError("big_qjacobi_norm_residue needs n >= 0");
    const QBase& q = p.q;
    const double qq = p.qv(), a = p.a, b = p.b, c = p.c, gn = a * std::pow(qq, n);
    // W = (1-q)(a g, a/g; q)_inf theta(bc) / (ab, ac, qa/b, qa/c; q)_inf; drop the factor
    // (1 - a q^n/g) of (a/g; q)_inf, whose reciprocal has residue g_n.
    Scaled w = Scaled(1 - qq) * qpoch_inf_scaled({a * gn, a / gn * std::pow(qq, n + 1)}, q) *
               theta_reduced_scaled(b * c, q) / qpoch_inf_scaled({a * b, a * c, qq * a / b, qq * a / c}, q);
    w *= Scaled(qpoch_finite(a / gn, q, n));
    const cplx res = gn / w.value();
    const cplx inv = a / gn * (1.0 / gn - gn) * bigq_psi_ratio(n, p) * res;
    return (1.0 / inv).real();
}

/// <E((mu1, mu2)) f, g> in the polynomial regime: the sum over degrees n with
/// mu(a q^n) in the interval of <f, psi_n><psi_n, g> / N(n).
inline cplx polynomial_projection(const LatticeFunction& f, const LatticeFunction& g, double mu1, double mu2,
                                  const Parameters& p) {
    cplx s = 0.0;
    for (int n = 0; n < 200; ++n) {
        const double gn = p.a * std::pow(p.qv(), n);
        const double m = mu(gn, p).real();
        if (!std::isfinite(m)) break;
        if (!(m > mu1 && m < mu2)) continue;
        cplx fp = 0.0, gp = 0.0;
        for (const auto& e : detail::support_of(f, p)) fp += e.value * std::conj(psi(gn, e.x, p).value) * e.weight;
        for (const auto& e : detail::support_of(g, p)) gp += e.value * std::conj(psi(gn, e.x, p).value) * e.weight;
        s += fp * std::conj(gp) / big_qjacobi_norm(n, p);
    }
    return s;
}

/// Stone's formula for <E((mu1, mu2)) f, g> against the closed-form projection.
/// lhs(eps) = (1/2 pi i) int_{mu1}^{mu2} [<R(mu + i eps) f, g> - <R(mu - i eps) f, g>] dmu,
/// Richardson-extrapolated over eps_list (each entry half the previous one).
inline StoneResult stone_projection_check(const LatticeFunction& f, const LatticeFunction& g, double mu1, double mu2,
                                          const std::vector<double>& eps_list, const Parameters& p,
                                          const SpectralMeasure* measure = nullptr) {
    if (!(mu1 < mu2)) throw DomainError("stone_projection_check needs mu1 < mu2");
    if (eps_list.empty()) throw DomainError("stone_projection_check needs at least one eps");
    const double lo = -(1 + p.a) * (1 + p.a), hi = -(1 - p.a) * (1 - p.a);
    const double edge_tol = 1e-6;
    for (double e : {lo, hi})
        for (double m : {mu1, mu2})
            if (std::abs(m - e) < edge_tol) throw DomainError("stone interval touches an end point of the band");
    const auto amus = detail::atom_mus(p);
    for (double am : amus)
        for (double m : {mu1, mu2})
            if (std::abs(m - am) < edge_tol) throw DomainError("stone interval touches a point mass");

    StoneResult res;
    res.scale = detail::lattice_norm(f, p) * detail::lattice_norm(g, p);

    // Break points: atoms inside the interval (peaks of width eps).
    std::vector<double> pts{mu1};
    for (double am : amus)
        if (am > mu1 && am < mu2) pts.push_back(am);
    pts.push_back(mu2);
    std::sort(pts.begin(), pts.end());

    // Absolute targets: the integrals vanish on gaps, where relative targets cannot be met.
    const double qtol = 1e-10 * res.scale;
    const auto sf = detail::support_of(f, p), sg = detail::support_of(g, p);
    for (double eps : eps_list) {
        // Real parameters: the kernel at mu - i eps is the conjugate of the kernel at mu + i eps.
        auto integrand = [&](double m) {
            GreenBasis gb(resolvent_gamma(cplx(m, eps), p), p);
            cplx diff = 0.0;
            for (const auto& ex : sg)
                for (const auto& ey : sf) {
                    const cplx k = gb.kernel(ex.x, ey.x);
                    diff += (k - std::conj(k)) * ey.value * std::conj(ex.value) * ex.weight * ey.weight;
                }
            return diff / cplx(0.0, 2.0 * std::numbers::pi);
        };
        cplx total = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            total += detail::integrate_abs(integrand, pts[i], pts[i + 1], qtol / static_cast<double>(pts.size() - 1));
        res.lhs_by_eps.push_back(total);
    }
    // Richardson on eps, eps/2, eps/4, ...: remove the eps, eps^2, ... terms in turn.
    std::vector<cplx> t = res.lhs_by_eps;
    for (std::size_t level = 1; level < t.size(); ++level) {
        const double f2 = std::pow(2.0, static_cast<double>(level));
        for (std::size_t i = t.size() - 1; i >= level; --i) t[i] = (f2 * t[i] - t[i - 1]) / (f2 - 1.0);
    }
    res.lhs = t.back();

    if (p.regime == Regime::Polynomial) {
        res.rhs = polynomial_projection(f, g, mu1, mu2, p);
        return res;
    }
    // Continuous band: mu(e^{i theta}) = -1 - a^2 + 2a cos(theta), decreasing in theta.
    const double m_lo = std::max(mu1, lo), m_hi = std::min(mu2, hi);
    cplx rhs = 0.0;
    if (m_lo < m_hi) {
        auto th = [&](double m) { return std::acos(std::clamp((m + 1 + p.a * p.a) / (2 * p.a), -1.0, 1.0)); };
        const double t1 = th(m_hi), t2 = th(m_lo);
        auto integrand = [&](double t) {
            const cplx u = std::polar(1.0, t);
            return transform_value(f, u, p) * std::conj(transform_value(g, u, p)) * continuous_density(t, p);
        };
        rhs += detail::integrate_abs(integrand, t1, t2, 0.1 * qtol);
    }
    const auto& atoms = measure ? measure->discrete.atoms : discrete_set_S(p).atoms;
    for (const auto& at : atoms) {
        if (at.mu_value > mu1 && at.mu_value < mu2)
            rhs += transform_at_atom(f, at.gamma_tilde, p) * std::conj(transform_at_atom(g, at.gamma_tilde, p)) *
                   at.mass;
    }
    res.rhs = rhs;
    return res;
}

/// Probe intervals for Stone's formula: a continuous sub-band, an isolated atom and a gap.
struct StoneIntervals {
    std::pair<double, double> sub_band;
    std::optional<std::pair<double, double>> isolated_atom;  ///< outside the band, mass >= 1e-6
    std::optional<std::pair<double, double>> gap;            ///< the gap nearest the band
};

inline StoneIntervals stone_intervals(const SpectralMeasure& m) {
    const Parameters& p = m.params;
    const double lo = -(1 + p.a) * (1 + p.a), hi = -(1 - p.a) * (1 - p.a);
    StoneIntervals out;
    out.sub_band = {lo + 0.3 * (hi - lo), lo + 0.7 * (hi - lo)};
    std::vector<double> feats{lo, hi};
    for (const auto& at : m.discrete.atoms)
        if (at.mass > 1e-12) feats.push_back(at.mu_value);
    std::sort(feats.begin(), feats.end());
    double best = 0.0;
    for (const auto& at : m.discrete.atoms) {
        if (at.mass < 1e-6 || (at.mu_value > lo && at.mu_value < hi)) continue;
        double d = 1e9;
        for (double v : feats)
            if (v != at.mu_value) d = std::min(d, std::abs(v - at.mu_value));
        const double hw = std::min(0.4 * d, 0.2);
        if (hw > best) {
            best = hw;
            out.isolated_atom = std::make_pair(at.mu_value - hw, at.mu_value + hw);
        }
    }
    // Atoms deep in the tail sit in large gaps far from the band; take the nearest one.
    double nearest = 1e300;
    for (std::size_t i = 0; i + 1 < feats.size(); ++i) {
        if (feats[i] == lo && feats[i + 1] == hi) continue;
        const double width = feats[i + 1] - feats[i];
        const double dist = std::min(std::abs(feats[i] - lo), std::abs(feats[i + 1] - hi));
        if (width > 1e-3 && dist < nearest) {
            nearest = dist;
            out.gap = std::make_pair(feats[i] + 0.2 * width, feats[i + 1] - 0.2 * width);
        }
    }
    return out;
}

}  // namespace bqj
