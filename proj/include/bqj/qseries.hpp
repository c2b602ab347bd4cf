/// @file qseries.hpp
/// @brief q-shifted factorials, theta products and basic hypergeometric series.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace bqj {

using cplx = std::complex<double>;

inline constexpr double kUlp = std::numeric_limits<double>::epsilon();

/// The base q with 0 < q < 1.
class QBase {
public:
    explicit QBase(double q) : q_(q) {
        if (!(q > 0.0 && q < 1.0)) throw DomainError("base q must satisfy 0 < q < 1");
    }
    double value() const noexcept { return q_; }
    operator double() const noexcept { return q_; }

    /// Factor cap: ceil(log(ulp)/log(q)) + 64, widened by the number of factors
    /// needed before |x q^j| drops below one.
    int factor_cap(double abs_x = 1.0) const {
        const double lq = std::log(q_);
        int cap = static_cast<int>(std::ceil(std::log(kUlp) / lq)) + 64;
        if (abs_x > 1.0) cap += static_cast<int>(std::ceil(std::log(abs_x) / -lq));
        return cap;
    }

private:
    double q_;
};

/// Value of a truncated q-series with a bound on the neglected part.
struct SeriesResult {
    cplx value{0.0, 0.0};
    double err_estimate = 0.0;
    int n_terms = 0;
};

/// Complex number with a separate binary exponent, m * 2^e.
/// Used so that long products of large/small factors neither overflow nor underflow.
class Scaled {
public:
    Scaled() = default;
    Scaled(cplx v) : m_(v) { normalize(); }  // NOLINT: implicit by design

    static Scaled pow2(std::int64_t e) {
        Scaled s;
        s.m_ = 1.0;
        s.e_ = e;
        return s;
    }

    Scaled& operator*=(const Scaled& o) {
        m_ *= o.m_;
        e_ += o.e_;
        normalize();
        return *this;
    }
    Scaled& operator/=(const Scaled& o) {
        if (o.m_ == 0.0) throw DomainError("division by zero in scaled product");
        m_ /= o.m_;
        e_ -= o.e_;
        normalize();
        return *this;
    }
    friend Scaled operator*(Scaled a, const Scaled& b) { return a *= b; }
    friend Scaled operator/(Scaled a, const Scaled& b) { return a /= b; }

    bool is_zero() const { return m_ == 0.0; }
    cplx mantissa() const { return m_; }
    std::int64_t exponent() const { return e_; }

    /// log2 |value|; -inf for zero.
    double log2_abs() const {
        if (is_zero()) return -std::numeric_limits<double>::infinity();
        return std::log2(std::abs(m_)) + static_cast<double>(e_);
    }

    cplx value() const {
        if (is_zero()) return 0.0;
        if (e_ > 2000) return {std::copysign(HUGE_VAL, m_.real()), std::copysign(HUGE_VAL, m_.imag())};
        if (e_ < -2200) return 0.0;
        const int e = static_cast<int>(e_);
        return {std::ldexp(m_.real(), e), std::ldexp(m_.imag(), e)};
    }

    /// Real power x^n with n possibly large, computed by repeated squaring.
    static Scaled ipow(cplx x, std::int64_t n) {
        if (n < 0) return Scaled(1.0) / ipow(x, -n);
        Scaled result(1.0), base(x);
        while (n > 0) {
            if (n & 1) result *= base;
            base *= base;
            n >>= 1;
        }
        return result;
    }

private:
    void normalize() {
        const double mag = std::max(std::abs(m_.real()), std::abs(m_.imag()));
        if (mag == 0.0 || !std::isfinite(mag)) {
            if (mag == 0.0) e_ = 0;
            return;
        }
        int ex = 0;
        std::frexp(mag, &ex);
        m_ = {std::ldexp(m_.real(), -ex), std::ldexp(m_.imag(), -ex)};
        e_ += ex;
    }

    cplx m_{0.0, 0.0};
    std::int64_t e_ = 0;
};

/// (x;q)_n for integer n; negative n uses (x;q)_{-n} = 1/(x q^{-n};q)_n.
inline cplx qpoch_finite(cplx x, const QBase& q, int n) {
    if (n < 0) {
        const cplx shifted = x * std::pow(q.value(), n);
        const cplx den = qpoch_finite(shifted, q, -n);
        if (den == 0.0) throw PoleError("(x;q)_n with negative n has a pole", "(x q^n;q)_{-n}");
        return 1.0 / den;
    }
    cplx prod = 1.0, xq = x;
    for (int j = 0; j < n; ++j) {
        prod *= 1.0 - xq;
        xq *= q.value();
    }
    return prod;
}

/// (x;q)_n as a Scaled value, for long products that leave the double range.
inline Scaled qpoch_finite_scaled(cplx x, const QBase& q, int n) {
    if (n < 0) {
        const Scaled den = qpoch_finite_scaled(x * Scaled::ipow(q.value(), n).value(), q, -n);
        if (den.is_zero()) throw PoleError("(x;q)_n with negative n has a pole", "(x q^n;q)_{-n}");
        return Scaled(1.0) / den;
    }
    Scaled prod(1.0);
    cplx xq = x;
    for (int j = 0; j < n; ++j) {
        prod *= Scaled(1.0 - xq);
        xq *= q.value();
    }
    return prod;
}

namespace detail {

struct InfProduct {
    Scaled value;
    double rel_tail = 0.0;
    int factors = 0;
};

inline InfProduct qpoch_inf_impl(cplx x, const QBase& q) {
    InfProduct out;
    out.value = Scaled(1.0);
    if (x == 0.0) return out;
    const int cap = q.factor_cap(std::abs(x));
    cplx xq = x;
    int j = 0;
    for (; j < cap; ++j) {
        if (std::abs(xq) < 0.5 * kUlp) break;
        out.value *= Scaled(1.0 - xq);
        xq *= q.value();
    }
    out.factors = j;
    // |log prod_{i>=j}(1 - x q^i)| <~ |x q^j| / (1 - q) for small |x q^j|.
    out.rel_tail = std::abs(xq) / (1.0 - q.value());
    return out;
}

}  // namespace detail

/// (x;q)_inf in scaled form.
inline Scaled qpoch_inf_scaled(cplx x, const QBase& q) { return detail::qpoch_inf_impl(x, q).value; }

/// Product of (x_i;q)_inf over a list of arguments, scaled.
inline Scaled qpoch_inf_scaled(std::initializer_list<cplx> xs, const QBase& q) {
    Scaled prod(1.0);
    for (cplx x : xs) prod *= qpoch_inf_scaled(x, q);
    return prod;
}

/// (x;q)_inf with a tail bound.
inline SeriesResult qpoch_inf(cplx x, const QBase& q) {
    const auto r = detail::qpoch_inf_impl(x, q);
    SeriesResult out;
    out.value = r.value.value();
    out.err_estimate = std::abs(out.value) * r.rel_tail;
    out.n_terms = r.factors;
    return out;
}

/// theta(x) = (x, q/x; q)_inf, evaluated directly, scaled.
inline Scaled theta_scaled(cplx x, const QBase& q) {
    if (x == 0.0) throw DomainError("theta(x) requires x != 0");
    return qpoch_inf_scaled(x, q) * qpoch_inf_scaled(q.value() / x, q);
}

/// theta(x) evaluated directly from its two infinite products.
inline SeriesResult theta(cplx x, const QBase& q) {
    if (x == 0.0) throw DomainError("theta(x) requires x != 0");
    const auto p1 = detail::qpoch_inf_impl(x, q);
    const auto p2 = detail::qpoch_inf_impl(q.value() / x, q);
    SeriesResult out;
    out.value = (p1.value * p2.value).value();
    out.err_estimate = std::abs(out.value) * (p1.rel_tail + p2.rel_tail);
    out.n_terms = p1.factors + p2.factors;
    return out;
}

/// theta(x_1) ... theta(x_r).
inline SeriesResult theta(std::initializer_list<cplx> xs, const QBase& q) {
    Scaled prod(1.0);
    double rel = 0.0;
    int n = 0;
    for (cplx x : xs) {
        const auto t = theta(x, q);
        prod *= Scaled(t.value);
        rel += t.value == 0.0 ? 0.0 : t.err_estimate / std::abs(t.value);
        n += t.n_terms;
    }
    SeriesResult out;
    out.value = prod.value();
    out.err_estimate = std::abs(out.value) * rel;
    out.n_terms = n;
    return out;
}

/// Quasi-periodicity factor f_k(x) with theta(q^k x) = f_k(x) theta(x).
inline Scaled theta_shift_factor(cplx x, const QBase& q, std::int64_t k) {
    if (x == 0.0) throw DomainError("theta_shift requires x != 0");
    // q^{-k(k-1)/2} (-x)^{-k} for every integer k.
    const std::int64_t qexp = -(k * (k - 1)) / 2;
    return Scaled::ipow(q.value(), qexp) * Scaled::ipow(-x, -k);
}

/// theta(q^k x) via theta(x) and the quasi-periodicity factor.
inline cplx theta_shift(cplx x, const QBase& q, int k) {
    return (theta_scaled(x, q) * theta_shift_factor(x, q, k)).value();
}

/// theta(x) with x first reduced to the annulus q < |x| <= 1, scaled.
inline Scaled theta_reduced_scaled(cplx x, const QBase& q) {
    if (x == 0.0) throw DomainError("theta(x) requires x != 0");
    // x = q^k x0 with q < |x0| <= 1.
    auto k = static_cast<std::int64_t>(std::floor(std::log(std::abs(x)) / std::log(q.value())));
    cplx x0 = x / Scaled::ipow(q.value(), k).value();
    if (!std::isfinite(std::abs(x0)) || std::abs(x0) == 0.0) {
        x0 = x;
        k = 0;
    }
    while (std::abs(x0) > 1.0) {
        x0 *= q.value();
        ++k;
    }
    while (std::abs(x0) <= q.value()) {
        x0 /= q.value();
        --k;
    }
    return theta_scaled(x0, q) * theta_shift_factor(x0, q, k);
}

inline cplx theta_reduced(cplx x, const QBase& q) { return theta_reduced_scaled(x, q).value(); }

/// Product of reduced thetas.
inline Scaled theta_reduced_scaled(std::initializer_list<cplx> xs, const QBase& q) {
    Scaled prod(1.0);
    for (cplx x : xs) prod *= theta_reduced_scaled(x, q);
    return prod;
}

namespace detail {

/// If x = q^{-m} for an integer m >= 0 (to relative 1e-12), returns m, else -1.
inline int negative_q_power(cplx x, const QBase& q) {
    if (std::abs(x.imag()) > 1e-14 * std::abs(x) || x.real() <= 0.0) return -1;
    const double m = std::log(x.real()) / -std::log(q.value());
    const double mr = std::round(m);
    if (mr < 0.0 || std::abs(m - mr) > 1e-12 * std::max(1.0, mr)) return -1;
    return static_cast<int>(mr);
}

}  // namespace detail

/// Options for basic hypergeometric summation.
struct SeriesOptions {
    double tol = 1e-13;
    int max_terms = 200000;
};

/// r phi s (upper; lower; q, arg), with the standard (-1)^k q^{k(k-1)/2} balancing factor.
inline SeriesResult phi_series(std::span<const cplx> upper, std::span<const cplx> lower, const QBase& q,
                               cplx arg, SeriesOptions opt = {}) {
    const int r = static_cast<int>(upper.size());
    const int s = static_cast<int>(lower.size());
    const int balance = 1 + s - r;

    int terminate_at = -1;
    for (cplx u : upper) {
        const int m = detail::negative_q_power(u, q);
        if (m >= 0 && (terminate_at < 0 || m < terminate_at)) terminate_at = m;
    }
    for (std::size_t j = 0; j < lower.size(); ++j) {
        const int m = detail::negative_q_power(lower[j], q);
        if (m >= 0 && (terminate_at < 0 || m < terminate_at))
            throw PoleError("basic hypergeometric series with lower parameter q^{-" + std::to_string(m) + "}",
                            "(lower[" + std::to_string(j) + "];q)_k");
    }
    if (terminate_at < 0 && arg != 0.0) {
        if (balance < 0 || (balance == 0 && std::abs(arg) >= 1.0))
            throw ConvergenceError("non-terminating basic hypergeometric series with |argument| >= 1");
    }

    const double qv = q.value();
    SeriesResult out;
    cplx term = 1.0, sum = 1.0;
    double abs_sum_terms = 1.0;
    double qk = 1.0;  // q^k
    int small_run = 0;
    double ratios[3] = {0.0, 0.0, 0.0};
    int k = 0;
    for (;; ++k) {
        if (terminate_at >= 0 && k == terminate_at) {
            out.value = sum;
            out.err_estimate = 2.0 * kUlp * abs_sum_terms;
            out.n_terms = k + 1;
            return out;
        }
        if (k >= opt.max_terms) throw ConvergenceError("basic hypergeometric series exceeded term budget");
        cplx ratio = arg / (1.0 - qk * qv);
        for (cplx u : upper) ratio *= 1.0 - u * qk;
        for (std::size_t j = 0; j < lower.size(); ++j) {
            const cplx d = 1.0 - lower[j] * qk;
            if (std::abs(d) < 1e-300)
                throw PoleError("basic hypergeometric series hits a zero denominator",
                                "(lower[" + std::to_string(j) + "];q)_k");
            ratio /= d;
        }
        for (int b = 0; b < std::abs(balance); ++b) ratio = balance > 0 ? ratio * (-qk) : ratio / (-qk);
        const cplx next = term * ratio;
        const double ar = std::abs(ratio);
        ratios[k % 3] = ar;
        term = next;
        sum += term;
        abs_sum_terms += std::abs(term);
        qk *= qv;
        if (!std::isfinite(abs_sum_terms)) throw ConvergenceError("basic hypergeometric series overflowed");

        const double at = std::abs(term);
        const double scale = std::max(std::abs(sum), 1e-300);
        if (at < opt.tol * scale || term == 0.0) ++small_run;
        else small_run = 0;
        if (small_run >= 3) {
            const double rho = std::max({ratios[0], ratios[1], ratios[2]});
            if (term == 0.0 || (rho < 1.0 && at * rho / (1.0 - rho) < opt.tol * scale)) {
                out.value = sum;
                out.err_estimate = (rho < 1.0 ? at * rho / (1.0 - rho) : 0.0) + 2.0 * kUlp * abs_sum_terms;
                out.n_terms = k + 2;
                return out;
            }
        }
    }
}

inline SeriesResult phi_series(std::initializer_list<cplx> upper, std::initializer_list<cplx> lower, const QBase& q,
                               cplx arg, SeriesOptions opt = {}) {
    return phi_series(std::span<const cplx>(upper.begin(), upper.size()),
                      std::span<const cplx>(lower.begin(), lower.size()), q, arg, opt);
}

}  // namespace bqj
