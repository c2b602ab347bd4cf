/// @file lattice.hpp
/// @brief The q-lattice [-1, inf(z))_q, the weights p and r, the second order
///        q-difference operator L, Jackson integrals, inner products and Wronskians.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qseries.hpp"

namespace bqj {

enum class Regime {
    Noncompact,  ///< lattice {-q^k}_{k>=0} u {z q^k}_{k in Z}
    Polynomial,  ///< finite lattice [-1, -q/bc]_q with bc < 0
};

/// Operator parameters (q, a, b, c, z).
struct Parameters {
    QBase q{0.5};
    double a = 0.4, b = 0.5, c = 0.6, z = 1.0;
    Regime regime = Regime::Noncompact;

    /// Parameters in V (a, b, c > 0, ab, ac, bc < 1) with z > 0.
    static Parameters noncompact(double q, double a, double b, double c, double z) {
        Parameters p = unchecked(q, a, b, c, z);
        if (auto why = p.violation(); !why.empty()) throw DomainError("parameters outside V: " + why);
        return p;
    }

    /// Parameters with ab, qa/b, ac, qa/c < 1 and bc < 0; the lattice is [-1, -q/bc]_q.
    static Parameters polynomial(double q, double a, double b, double c) {
        Parameters p = unchecked(q, a, b, c, -q / (b * c));
        p.regime = Regime::Polynomial;
        if (auto why = p.violation(); !why.empty())
            throw DomainError("parameters outside the polynomial regime: " + why);
        return p;
    }

    /// No validation; used for the auxiliary parameter sets (a, q/b, q/c), (qa, b, c), ...
    static Parameters unchecked(double q, double a, double b, double c, double z) {
        Parameters p;
        p.q = QBase(q);
        p.a = a;
        p.b = b;
        p.c = c;
        p.z = z;
        return p;
    }

    double qv() const { return q.value(); }

    /// Empty if the regime inequalities hold, else the first violated one.
    std::string violation() const {
        if (regime == Regime::Polynomial) {
            const double qq = qv();
            if (!(a * b < 1)) return "ab < 1";
            if (!(qq * a / b < 1)) return "qa/b < 1";
            if (!(a * c < 1)) return "ac < 1";
            if (!(qq * a / c < 1)) return "qa/c < 1";
            if (!(b * c < 0)) return "bc < 0";
            return {};
        }
        if (!(a > 0)) return "a > 0";
        if (!(b > 0)) return "b > 0";
        if (!(c > 0)) return "c > 0";
        if (!(a * b < 1)) return "ab < 1";
        if (!(a * c < 1)) return "ac < 1";
        if (!(b * c < 1)) return "bc < 1";
        if (!(z > 0)) return "z > 0";
        return {};
    }

    bool in_V() const { return regime == Regime::Noncompact && violation().empty(); }
    bool in_polynomial_regime() const { return regime == Regime::Polynomial && violation().empty(); }

    /// V_z^gen: in V and none of a^2, b^2, c^2, ab, ac, bc, a/b, a/c, (abcz)^2 is an
    /// integer power of q (within `tol` in log-q units).
    bool in_V_gen(double tol = 1e-9) const { return in_V() && generic_violation(tol).empty(); }

    std::string generic_violation(double tol = 1e-9) const {
        const double lq = std::log(qv());
        const std::array<std::pair<double, const char*>, 9> checks{{{a * a, "a^2"},
                                                                   {b * b, "b^2"},
                                                                   {c * c, "c^2"},
                                                                   {a * b, "ab"},
                                                                   {a * c, "ac"},
                                                                   {b * c, "bc"},
                                                                   {a / b, "a/b"},
                                                                   {a / c, "a/c"},
                                                                   {std::pow(a * b * c * z, 2), "(abcz)^2"}}};
        for (const auto& [v, name] : checks) {
            if (!(v > 0)) continue;
            const double e = std::log(v) / lq;
            if (std::abs(e - std::round(e)) < tol) return std::string(name) + " is a power of q";
        }
        return {};
    }
};

enum class Branch { Neg, Pos };

/// A point of the lattice: -q^k (Neg, k >= 0) or z q^k (Pos, k in Z).
struct LatticePoint {
    Branch branch = Branch::Neg;
    int k = 0;

    static LatticePoint neg(int k) {
        if (k < 0) throw DomainError("Neg lattice index must be >= 0");
        return {Branch::Neg, k};
    }
    static LatticePoint pos(int k) { return {Branch::Pos, k}; }

    /// q^k, with an extended-precision power for large |k|.
    static double qpow(double q, int k) {
        if (std::abs(k) > 40) return static_cast<double>(std::pow(static_cast<long double>(q), k));
        return std::pow(q, k);
    }

    double value(const Parameters& p) const {
        const double qk = qpow(p.qv(), k);
        return branch == Branch::Neg ? -qk : p.z * qk;
    }

    /// The point q x (index + 1 on either branch).
    LatticePoint shifted_down() const { return {branch, k + 1}; }
    /// The point x / q.
    LatticePoint shifted_up() const { return {branch, k - 1}; }

    friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

/// Index ranges kept on each branch.
struct LatticeWindow {
    int k_max_neg = 80;
    int k_min_pos = -60;
    int k_max_pos = 80;

    static LatticeWindow polynomial_default() { return {80, 0, 80}; }

    void validate() const {
        if (k_max_neg < 0) throw DomainError("lattice window needs k_max_neg >= 0");
        if (k_min_pos > k_max_pos) throw DomainError("lattice window needs k_min_pos <= k_max_pos");
    }

    bool contains(const LatticePoint& x) const {
        if (x.branch == Branch::Neg) return x.k >= 0 && x.k <= k_max_neg;
        return x.k >= k_min_pos && x.k <= k_max_pos;
    }

    std::size_t size() const { return static_cast<std::size_t>(k_max_neg + 1 + k_max_pos - k_min_pos + 1); }

    /// All points, ordered by increasing real value.
    std::vector<LatticePoint> points() const {
        std::vector<LatticePoint> out;
        out.reserve(size());
        for (int k = 0; k <= k_max_neg; ++k) out.push_back(LatticePoint::neg(k));
        for (int k = k_max_pos; k >= k_min_pos; --k) out.push_back(LatticePoint::pos(k));
        return out;
    }

    friend bool operator==(const LatticeWindow&, const LatticeWindow&) = default;
};

/// A complex function sampled on a lattice window. Samples may be flagged invalid
/// (e.g. boundary outputs of the operator L).
class LatticeFunction {
public:
    LatticeFunction() : LatticeFunction(LatticeWindow{}) {}
    explicit LatticeFunction(LatticeWindow w) : window_(w) {
        window_.validate();
        neg_.assign(static_cast<std::size_t>(w.k_max_neg + 1), cplx{});
        pos_.assign(static_cast<std::size_t>(w.k_max_pos - w.k_min_pos + 1), cplx{});
        neg_valid_.assign(neg_.size(), 1);
        pos_valid_.assign(pos_.size(), 1);
    }

    template <class F>
    static LatticeFunction sample(LatticeWindow w, F&& fn) {
        LatticeFunction f(w);
        for (const auto& x : w.points()) f[x] = fn(x);
        return f;
    }

    const LatticeWindow& window() const { return window_; }

    cplx& operator[](const LatticePoint& x) { return x.branch == Branch::Neg ? neg_[index(x)] : pos_[index(x)]; }
    const cplx& operator[](const LatticePoint& x) const {
        return x.branch == Branch::Neg ? neg_[index(x)] : pos_[index(x)];
    }
    cplx at(const LatticePoint& x) const {
        if (!window_.contains(x)) throw DomainError("lattice point outside the window");
        return (*this)[x];
    }

    bool valid(const LatticePoint& x) const {
        if (!window_.contains(x)) return false;
        return x.branch == Branch::Neg ? neg_valid_[index(x)] != 0 : pos_valid_[index(x)] != 0;
    }
    void set_valid(const LatticePoint& x, bool v) {
        (x.branch == Branch::Neg ? neg_valid_[index(x)] : pos_valid_[index(x)]) = v ? 1 : 0;
    }

    LatticeFunction& operator+=(const LatticeFunction& o) { return combine(o, 1.0); }
    LatticeFunction& operator-=(const LatticeFunction& o) { return combine(o, -1.0); }
    LatticeFunction& operator*=(cplx s) {
        for (auto& v : neg_) v *= s;
        for (auto& v : pos_) v *= s;
        return *this;
    }
    friend LatticeFunction operator+(LatticeFunction a, const LatticeFunction& b) { return a += b; }
    friend LatticeFunction operator-(LatticeFunction a, const LatticeFunction& b) { return a -= b; }
    friend LatticeFunction operator*(cplx s, LatticeFunction a) { return a *= s; }

    /// CSV with header `branch,k,x,re,im`, 17 significant digits.
    void write_csv(std::ostream& os, const Parameters& p) const {
        os << "branch,k,x,re,im\n";
        char buf[160];
        for (const auto& x : window_.points()) {
            const cplx v = (*this)[x];
            std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g\n", x.branch == Branch::Neg ? "neg" : "pos", x.k,
                          x.value(p), v.real(), v.imag());
            os << buf;
        }
    }

    /// Inverse of write_csv. The window is the bounding box of the rows.
    static LatticeFunction read_csv(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line.rfind("branch,k,x,re,im", 0) != 0)
            throw DomainError("lattice CSV: missing header");
        struct Row {
            LatticePoint x;
            cplx v;
        };
        std::vector<Row> rows;
        LatticeWindow w{-1, 1 << 30, -(1 << 30)};
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string br, ks, xs, re, im;
            std::getline(ss, br, ',');
            std::getline(ss, ks, ',');
            std::getline(ss, xs, ',');
            std::getline(ss, re, ',');
            std::getline(ss, im, ',');
            LatticePoint x{br == "neg" ? Branch::Neg : Branch::Pos, std::stoi(ks)};
            if (br != "neg" && br != "pos") throw DomainError("lattice CSV: bad branch '" + br + "'");
            rows.push_back({x, cplx(std::stod(re), std::stod(im))});
            if (x.branch == Branch::Neg) w.k_max_neg = std::max(w.k_max_neg, x.k);
            else {
                w.k_min_pos = std::min(w.k_min_pos, x.k);
                w.k_max_pos = std::max(w.k_max_pos, x.k);
            }
        }
        if (w.k_max_neg < 0 || w.k_min_pos > w.k_max_pos) throw DomainError("lattice CSV: a branch is empty");
        LatticeFunction f(w);
        for (const auto& r : rows) f[r.x] = r.v;
        return f;
    }

private:
    std::size_t index(const LatticePoint& x) const {
        return x.branch == Branch::Neg ? static_cast<std::size_t>(x.k) : static_cast<std::size_t>(x.k - window_.k_min_pos);
    }
    LatticeFunction& combine(const LatticeFunction& o, double sign) {
        if (!(o.window_ == window_)) throw DomainError("lattice functions live on different windows");
        for (std::size_t i = 0; i < neg_.size(); ++i) {
            neg_[i] += sign * o.neg_[i];
            neg_valid_[i] &= o.neg_valid_[i];
        }
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            pos_[i] += sign * o.pos_[i];
            pos_valid_[i] &= o.pos_valid_[i];
        }
        return *this;
    }

    LatticeWindow window_;
    std::vector<cplx> neg_, pos_;
    std::vector<char> neg_valid_, pos_valid_;
};

// ---------------------------------------------------------------------------
// Coefficients and weights

/// A(x) = a^2 (1 + 1/(abx)) (1 + 1/(acx)).
inline double coeff_A(double x, const Parameters& p) {
    if (x == 0.0) throw DomainError("coeff_A requires x != 0");
    return p.a * p.a * (1.0 + 1.0 / (p.a * p.b * x)) * (1.0 + 1.0 / (p.a * p.c * x));
}

/// B(x) = (1 + q/(bcx)) (1 + 1/x).
inline double coeff_B(double x, const Parameters& p) {
    if (x == 0.0) throw DomainError("coeff_B requires x != 0");
    return (1.0 + p.qv() / (p.b * p.c * x)) * (1.0 + 1.0 / x);
}

/// p(x) = (-abx, -acx; q)_inf / (-bcx, -qx; q)_inf.
inline SeriesResult weight_p(double x, const Parameters& p) {
    const QBase& q = p.q;
    const Scaled den = qpoch_inf_scaled({-p.b * p.c * x, -p.qv() * x}, q);
    if (den.is_zero()) throw PoleError("weight p has a pole", "(-bcx, -qx; q)_inf");
    const Scaled v = qpoch_inf_scaled({-p.a * p.b * x, -p.a * p.c * x}, q) / den;
    SeriesResult out;
    out.value = v.value();
    out.err_estimate = 8.0 * kUlp * q.factor_cap(std::abs(x)) * std::abs(out.value);
    out.n_terms = q.factor_cap(std::abs(x));
    return out;
}

/// r(x) = (1-q)^2/(qbc) (-bcx, -qx; q)_inf / (-qabx, -qacx; q)_inf.
inline SeriesResult weight_r(double x, const Parameters& p) {
    const QBase& q = p.q;
    const double qq = p.qv();
    const Scaled den = qpoch_inf_scaled({-qq * p.a * p.b * x, -qq * p.a * p.c * x}, q);
    if (den.is_zero()) throw PoleError("weight r has a pole", "(-qabx, -qacx; q)_inf");
    const Scaled v = Scaled((1 - qq) * (1 - qq) / (qq * p.b * p.c)) * qpoch_inf_scaled({-p.b * p.c * x, -qq * x}, q) / den;
    SeriesResult out;
    out.value = v.value();
    out.err_estimate = 8.0 * kUlp * q.factor_cap(std::abs(x)) * std::abs(out.value);
    out.n_terms = q.factor_cap(std::abs(x));
    return out;
}

/// K = (1-q) z theta(-bcz, -qz) / theta(-abz, -acz), thetas reduced to the fundamental annulus.
inline double const_K(const Parameters& p) {
    const QBase& q = p.q;
    const double z = p.z;
    const Scaled v = Scaled((1 - p.qv()) * z) * theta_reduced_scaled({-p.b * p.c * z, -p.qv() * z}, q) /
                     theta_reduced_scaled({-p.a * p.b * z, -p.a * p.c * z}, q);
    return v.value().real();
}

/// Same constant from unreduced theta products.
inline double const_K_direct(const Parameters& p) {
    const QBase& q = p.q;
    const double z = p.z;
    const Scaled num = theta_scaled(-p.b * p.c * z, q) * theta_scaled(-p.qv() * z, q);
    const Scaled den = theta_scaled(-p.a * p.b * z, q) * theta_scaled(-p.a * p.c * z, q);
    return (Scaled((1 - p.qv()) * z) * num / den).value().real();
}

/// Jackson weight of a lattice point: (1-q)|x| / p(x).
inline double jackson_weight(const LatticePoint& x, const Parameters& p) {
    const double xv = x.value(p);
    return (1 - p.qv()) * std::abs(xv) / weight_p(xv, p).value.real();
}

// ---------------------------------------------------------------------------
// The operator L

namespace detail {

inline bool is_lower_endpoint(const LatticePoint& x) { return x.branch == Branch::Neg && x.k == 0; }

inline bool is_upper_endpoint(const LatticePoint& x, const Parameters& p) {
    return p.regime == Regime::Polynomial && x.branch == Branch::Pos && x.k == 0;
}

inline void require_operator_window(const LatticeWindow& w, const Parameters& p) {
    if (w.k_max_neg < 1) throw DomainError("window too small for L: need k_max_neg >= 1");
    if (p.regime == Regime::Polynomial) {
        if (w.k_min_pos != 0) throw DomainError("polynomial lattice window must start at k_min_pos = 0");
        if (w.k_max_pos < 1) throw DomainError("window too small for L: need k_max_pos >= 1");
    } else if (w.k_max_pos - w.k_min_pos < 2) {
        throw DomainError("window too small for L: need k_max_pos - k_min_pos >= 2");
    }
}

}  // namespace detail

/// (Lf)(x) for a single point given the neighbouring samples.
/// `f_up` is f(x/q) and is ignored at end-points.
inline cplx apply_L_point(const LatticePoint& x, cplx f_down, cplx f_x, cplx f_up, const Parameters& p) {
    const double xv = x.value(p);
    if (detail::is_lower_endpoint(x) || detail::is_upper_endpoint(x, p)) return coeff_A(xv, p) * (f_down - f_x);
    return coeff_A(xv, p) * (f_down - f_x) + coeff_B(xv, p) * (f_up - f_x);
}

/// Lf = A (T_q - Id) f + B (T_{1/q} - Id) f, with (Lf)(-1) = A(-1)(f(-q) - f(-1)).
/// Outputs needing samples outside the window are marked invalid.
inline LatticeFunction apply_L(const LatticeFunction& f, const Parameters& p) {
    const LatticeWindow& w = f.window();
    detail::require_operator_window(w, p);
    LatticeFunction out(w);
    for (const auto& x : w.points()) {
        const auto down = x.shifted_down();
        const auto up = x.shifted_up();
        const bool endpoint = detail::is_lower_endpoint(x) || detail::is_upper_endpoint(x, p);
        if (!w.contains(down) || (!endpoint && !w.contains(up))) {
            out.set_valid(x, false);
            continue;
        }
        out[x] = apply_L_point(x, f[down], f[x], endpoint ? cplx{} : f[up], p);
        out.set_valid(x, f.valid(x) && f.valid(down) && (endpoint || f.valid(up)));
    }
    return out;
}

/// (D_q f)(x) = (f(x) - f(qx)) / ((1-q) x).
inline cplx dq(const LatticeFunction& f, const LatticePoint& x, const Parameters& p) {
    const auto down = x.shifted_down();
    if (!f.window().contains(x) || !f.window().contains(down)) throw DomainError("dq: point or its q-shift outside window");
    return (f[x] - f[down]) / ((1 - p.qv()) * x.value(p));
}

/// L in the factored form p(x) (D_q (r D_q f))(x/q); at end-points -q p r/((1-q)x) D_q f.
inline LatticeFunction apply_L_selfadjoint_form(const LatticeFunction& f, const Parameters& p) {
    const LatticeWindow& w = f.window();
    detail::require_operator_window(w, p);
    const double qq = p.qv();
    LatticeFunction out(w);
    for (const auto& x : w.points()) {
        const auto down = x.shifted_down();
        const auto up = x.shifted_up();
        const bool endpoint = detail::is_lower_endpoint(x) || detail::is_upper_endpoint(x, p);
        if (!w.contains(down) || (!endpoint && !w.contains(up))) {
            out.set_valid(x, false);
            continue;
        }
        const double xv = x.value(p);
        const double px = weight_p(xv, p).value.real();
        const double rx = weight_r(xv, p).value.real();
        const cplx dqf_x = dq(f, x, p);
        if (endpoint) {
            out[x] = -qq * px * rx / ((1 - qq) * xv) * dqf_x;
        } else {
            const double xu = xv / qq;
            const double ru = weight_r(xu, p).value.real();
            const cplx dqf_u = (f[up] - f[x]) / ((1 - qq) * xu);
            out[x] = px * (ru * dqf_u - rx * dqf_x) / ((1 - qq) * xu);
        }
        out.set_valid(x, f.valid(x) && f.valid(down) && (endpoint || f.valid(up)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Wronskian

/// W(f,g)(x) = q r(x)/((1-q)x) (f(x) g(qx) - f(qx) g(x)) from point values.
inline cplx wronskian_values(double x, cplx fx, cplx fqx, cplx gx, cplx gqx, const Parameters& p) {
    const double qq = p.qv();
    return qq * weight_r(x, p).value.real() / ((1 - qq) * x) * (fx * gqx - fqx * gx);
}

inline cplx wronskian(const LatticeFunction& f, const LatticeFunction& g, const LatticePoint& x, const Parameters& p) {
    const auto down = x.shifted_down();
    for (const auto* h : {&f, &g})
        if (!h->window().contains(x) || !h->window().contains(down))
            throw DomainError("wronskian: point or its q-shift outside window");
    return wronskian_values(x.value(p), f[x], f[down], g[x], g[down], p);
}

/// W(f,g)(x) = q r(x) ((D_q f)(x) g(x) - f(x) (D_q g)(x)).
inline cplx wronskian_dq_form(const LatticeFunction& f, const LatticeFunction& g, const LatticePoint& x,
                              const Parameters& p) {
    return p.qv() * weight_r(x.value(p), p).value.real() * (dq(f, x, p) * g.at(x) - f.at(x) * dq(g, x, p));
}

// ---------------------------------------------------------------------------
// Jackson integrals and inner products

namespace detail {

/// Tail of a sum whose last terms (ordered toward the open end) decay geometrically.
/// Returns {extrapolated tail, uncertainty}.
struct Tail {
    cplx value{};
    double err = 0.0;
};

inline Tail geometric_tail(std::span<const cplx> last, double sum_scale) {
    Tail t;
    if (last.empty()) return t;
    const cplx tn = last.back();
    if (tn == 0.0) return t;
    if (std::abs(tn) < 1e-18 * sum_scale) {
        t.err = std::abs(tn);
        return t;
    }
    std::vector<cplx> rho;
    for (std::size_t i = 1; i < last.size(); ++i) {
        if (last[i - 1] == 0.0) return {cplx{}, std::abs(tn)};
        rho.push_back(last[i] / last[i - 1]);
    }
    if (rho.empty()) return {cplx{}, std::abs(tn)};
    double rmax = 0.0;
    for (auto r : rho) rmax = std::max(rmax, std::abs(r));
    if (rmax >= 1.0) throw ConvergenceError("Jackson sum tail does not decay on the window");
    const cplx r = rho.back();
    const double spread = rho.size() > 1 ? std::abs(rho.back() - rho[rho.size() - 2]) : std::abs(r);
    if (spread <= 0.05 * std::abs(r)) {
        t.value = tn * r / (1.0 - r);
        t.err = std::abs(tn) * spread / std::pow(1.0 - rmax, 2) + kUlp * std::abs(t.value);
    } else {
        t.err = std::abs(tn) * rmax / (1.0 - rmax);
    }
    return t;
}

}  // namespace detail

/// int_0^gamma f d_qx = (1-q) sum_{n=0}^{n_max} f(gamma q^n) gamma q^n, with a geometric tail estimate.
template <class F>
SeriesResult jackson_0_to(F&& f, double gamma, const QBase& q, int n_max = 200) {
    std::vector<cplx> terms;
    cplx sum{};
    double abs_sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double x = gamma * LatticePoint::qpow(q.value(), n);
        const cplx t = (1 - q.value()) * f(x) * x;
        terms.push_back(t);
        sum += t;
        abs_sum += std::abs(t);
    }
    const std::size_t m = std::min<std::size_t>(5, terms.size());
    const auto tail = detail::geometric_tail(std::span<const cplx>(terms).last(m), abs_sum);
    return {sum + tail.value, tail.err + kUlp * abs_sum, n_max + 1};
}

/// int_0^{inf(gamma)} f d_qx over n_min <= n <= n_max with tail estimates on both ends.
template <class F>
SeriesResult jackson_0_to_infinity(F&& f, double gamma, const QBase& q, int n_min, int n_max) {
    std::vector<cplx> terms;
    cplx sum{};
    double abs_sum = 0.0;
    for (int n = n_min; n <= n_max; ++n) {
        const double x = gamma * LatticePoint::qpow(q.value(), n);
        const cplx t = (1 - q.value()) * f(x) * x;
        terms.push_back(t);
        sum += t;
        abs_sum += std::abs(t);
    }
    const std::size_t m = std::min<std::size_t>(5, terms.size());
    std::vector<cplx> head(terms.rbegin() + static_cast<long>(terms.size() - m), terms.rend());
    const auto t_small = detail::geometric_tail(std::span<const cplx>(terms).last(m), abs_sum);
    const auto t_large = detail::geometric_tail(head, abs_sum);
    return {sum + t_small.value + t_large.value, t_small.err + t_large.err + kUlp * abs_sum, n_max - n_min + 1};
}

/// int_alpha^beta f d_qx = int_0^beta - int_0^alpha.
template <class F>
SeriesResult jackson_between(F&& f, double alpha, double beta, const QBase& q, int n_max = 200) {
    const auto hi = jackson_0_to(f, beta, q, n_max);
    const auto lo = jackson_0_to(f, alpha, q, n_max);
    return {hi.value - lo.value, hi.err_estimate + lo.err_estimate, hi.n_terms + lo.n_terms};
}

namespace detail {

/// Sum of per-point terms over the window with tail extrapolation at the open ends:
/// the Neg branch toward 0, the Pos branch toward 0 and toward infinity.
/// In the polynomial regime the Pos branch is closed at k = 0 and only its small-x end is open.
template <class Term>
SeriesResult lattice_sum(const LatticeWindow& w, const Parameters& p, Term&& term) {
    std::vector<cplx> neg, pos;
    for (int k = 0; k <= w.k_max_neg; ++k) neg.push_back(term(LatticePoint::neg(k)));
    for (int k = w.k_min_pos; k <= w.k_max_pos; ++k) pos.push_back(term(LatticePoint::pos(k)));
    cplx sum{};
    double abs_sum = 0.0;
    for (auto t : neg) sum += t, abs_sum += std::abs(t);
    for (auto t : pos) sum += t, abs_sum += std::abs(t);
    auto last = [](const std::vector<cplx>& v) {
        const std::size_t m = std::min<std::size_t>(5, v.size());
        return std::span<const cplx>(v).last(m);
    };
    Tail total;
    auto add = [&](const Tail& t) {
        total.value += t.value;
        total.err += t.err;
    };
    add(geometric_tail(last(neg), abs_sum));
    add(geometric_tail(last(pos), abs_sum));
    const bool closed_top = p.regime == Regime::Polynomial && w.k_min_pos == 0;
    if (!closed_top) {
        const std::size_t m = std::min<std::size_t>(5, pos.size());
        std::vector<cplx> head(pos.rend() - static_cast<long>(m), pos.rend());
        add(geometric_tail(head, abs_sum));
    }
    return {sum + total.value, total.err + kUlp * abs_sum, static_cast<int>(neg.size() + pos.size())};
}

}  // namespace detail

/// int_{-1}^{inf(z)} f d_qx over the lattice window, with tail estimates.
inline SeriesResult jackson_integral(const LatticeFunction& f, const Parameters& p) {
    return detail::lattice_sum(f.window(), p, [&](const LatticePoint& x) {
        return (1 - p.qv()) * std::abs(x.value(p)) * f[x];
    });
}

/// <f, g> = int f conj(g) d_qx / p(x), with geometric tail extrapolation at the open ends.
inline SeriesResult inner_product(const LatticeFunction& f, const LatticeFunction& g, const Parameters& p) {
    if (!(f.window() == g.window())) throw DomainError("inner_product: functions live on different windows");
    return detail::lattice_sum(f.window(), p, [&](const LatticePoint& x) {
        return f[x] * std::conj(g[x]) * jackson_weight(x, p);
    });
}

/// Truncated inner product <f,g>_{k;l,m}: Neg indices 0..k, Pos indices l..m, no tail.
inline cplx inner_product_truncated(const LatticeFunction& f, const LatticeFunction& g, const Parameters& p, int k,
                                    int l, int m) {
    cplx s{};
    for (int n = 0; n <= k; ++n) {
        const auto x = LatticePoint::neg(n);
        s += f.at(x) * std::conj(g.at(x)) * jackson_weight(x, p);
    }
    for (int n = l; n <= m; ++n) {
        const auto x = LatticePoint::pos(n);
        s += f.at(x) * std::conj(g.at(x)) * jackson_weight(x, p);
    }
    return s;
}

}  // namespace bqj
