// Extended-precision reference implementations shared by the tests.
#pragma once

#include <complex>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_complex.hpp>

#include <bqj/lattice.hpp>

namespace oracle {

using Real = boost::multiprecision::cpp_bin_float_50;
using Complex = boost::multiprecision::cpp_complex_50;

inline Complex to_mp(std::complex<double> z) { return Complex(Real(z.real()), Real(z.imag())); }

inline std::complex<double> to_double(const Complex& z) {
    return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

/// (x;q)_n by direct multiplication.
inline Complex qpoch(const Complex& x, const Real& q, int n) {
    Complex prod(1);
    Complex xq = x;
    for (int j = 0; j < n; ++j) {
        prod *= Complex(1) - xq;
        xq *= q;
    }
    return prod;
}

/// (x;q)_inf with a fixed, generous factor count.
inline Complex qpoch_inf(const Complex& x, const Real& q, int factors = 400) { return qpoch(x, q, factors); }

inline Complex theta(const Complex& x, const Real& q) { return qpoch_inf(x, q) * qpoch_inf(Complex(q) / x, q); }

/// r phi s by plain summation of a fixed number of terms.
inline Complex phi_series(const std::vector<Complex>& upper, const std::vector<Complex>& lower, const Real& q,
                          const Complex& arg, int terms = 400) {
    const int balance = 1 + static_cast<int>(lower.size()) - static_cast<int>(upper.size());
    Complex sum(0), term(1);
    Real qk(1);
    for (int k = 0; k < terms; ++k) {
        sum += term;
        Complex ratio = arg / (Complex(1) - Complex(qk * q));
        for (const auto& u : upper) ratio *= Complex(1) - u * qk;
        for (const auto& l : lower) ratio /= Complex(1) - l * qk;
        for (int i = 0; i < balance; ++i) ratio *= Complex(-qk);
        for (int i = 0; i > balance; --i) ratio /= Complex(-qk);
        term *= ratio;
        qk *= q;
    }
    return sum;
}

inline double rel(std::complex<double> got, std::complex<double> want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

/// Random parameter draw in V^gen, away from the degenerate set.
inline bqj::Parameters random_generic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uq(0.3, 0.7), ua(0.15, 0.9), uz(0.3, 3.0);
    for (;;) {
        const auto p = bqj::Parameters::unchecked(uq(rng), ua(rng), ua(rng), ua(rng), uz(rng));
        if (p.in_V_gen(0.05) && p.a * p.b < 0.85 && p.a * p.c < 0.85 && p.b * p.c < 0.85) return p;
    }
}

/// Random complex number with modulus in [rmin, rmax].
inline std::complex<double> random_annulus(std::mt19937_64& rng, double rmin, double rmax) {
    std::uniform_real_distribution<double> ur(rmin, rmax), ut(0.0, 2 * 3.141592653589793);
    return std::polar(ur(rng), ut(rng));
}

}  // namespace oracle
