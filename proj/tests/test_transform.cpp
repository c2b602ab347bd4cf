#include <doctest.h>

#include <random>

#include <bqj/transform.hpp>

#include "oracles.hpp"

using namespace bqj;
using oracle::rel;

namespace {

const Parameters P0 = Parameters::noncompact(0.5, 0.4, 0.5, 0.6, 1.0);
const Parameters PB = Parameters::noncompact(0.5, 2.8, 0.3, 0.2, 0.8);
const Parameters PP = Parameters::polynomial(0.5, 0.4, 0.5, -0.6);

/// phi_gamma(-q^k) from the terminating series at 50 digits.
cplx phi_neg_oracle(cplx g, int k, const Parameters& p) {
    using oracle::Complex;
    using oracle::Real;
    const Real q(p.qv()), a(p.a), b(p.b), c(p.c);
    const Complex G = oracle::to_mp(g);
    return oracle::to_double(oracle::phi_series({Complex(a) * G, Complex(a) / G, Complex(pow(q, -k))},
                                                {Complex(a * b), Complex(a * c)}, q, Complex(b * c * pow(q, k))));
}

/// Base-1/q terminating series sum_n (q^k, t0 g, t0/g; 1/q)_n / (t0 t1, t0 t2, 1/q; 1/q)_n q^-n at 50 digits.
cplx hahn_oracle(int k, cplx g, const HahnSystem& s, double qd) {
    using oracle::Complex;
    using oracle::Real;
    const Real p = 1 / Real(qd), qk = pow(Real(qd), k), t0(s.t0), t1(s.t1), t2(s.t2);
    const Complex G = oracle::to_mp(g);
    Complex term(1), sum(1);
    Real pn(1);
    for (int n = 0; n < k; ++n) {
        term *= (1 - qk * pn) * (Complex(1) - t0 * G * pn) * (Complex(1) - t0 / G * pn) /
                ((1 - pn * p) * (1 - t0 * t1 * pn) * (1 - t0 * t2 * pn)) * p;
        sum += term;
        pn *= p;
    }
    return oracle::to_double(sum);
}

/// phi_{a q^n}(x) in the polynomial regime at 50 digits, with the condition number
/// sum |t_k| / |sum t_k| of its terminating series.
std::pair<cplx, double> bigq_oracle(int n, const LatticePoint& x, const Parameters& p) {
    using oracle::Real;
    const Real q(p.qv()), a(p.a), b(p.b), c(p.c);
    const Real X = x.branch == Branch::Neg ? Real(-pow(q, x.k)) : Real(-q / (b * c) * pow(q, x.k));
    Real t(1), s(1), abs_s(1);
    for (int k = 0; k < n; ++k) {
        t *= (1 - pow(q, k - n)) * (1 - a * a * pow(q, n + k)) * (X + pow(q, k)) * (-b * c) /
             ((1 - a * b * pow(q, k)) * (1 - a * c * pow(q, k)) * (1 - pow(q, k + 1)));
        s += t;
        abs_s += abs(t);
    }
    return {cplx(s.convert_to<double>()), (abs_s / abs(s)).convert_to<double>()};
}

LatticeFunction random_compact(const LatticeWindow& w, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    LatticeFunction f(w);
    for (int k = 0; k <= 4; ++k) f[LatticePoint::neg(k)] = cplx(nd(rng), nd(rng));
    for (int k = -3; k <= 4; ++k) f[LatticePoint::pos(k)] = cplx(nd(rng), nd(rng));
    return f;
}

}  // namespace

TEST_CASE("forward transform of a spike is conj(phi) times the Jackson weight") {
    const LatticeWindow w{20, -10, 20};
    for (cplx g : {cplx(0.3, 0.4), std::polar(1.0, 1.1), cplx(-0.2, -0.9)}) {
        for (int k : {0, 2, 5}) {
            LatticeFunction f(w);
            f[LatticePoint::neg(k)] = 1.0;
            const cplx want = std::conj(phi_neg_oracle(g, k, P0)) * jackson_weight(LatticePoint::neg(k), P0);
            CHECK(rel(forward(f, g, P0).value, want) < 1e-12);
        }
    }
}

TEST_CASE("transform is W-invariant on the unit circle") {
    std::mt19937_64 rng(11);
    const LatticeWindow w{20, -10, 20};
    const auto f = random_compact(w, rng);
    for (double th : {0.3, 1.4, 2.7}) {
        const cplx u = std::polar(1.0, th);
        CHECK(rel(forward(f, u, P0).value, forward(f, 1.0 / u, P0).value) < 1e-12);
    }
}

TEST_CASE("Plancherel isometry, pairing and inversion on generic draws") {
    std::mt19937_64 rng(2024);
    const LatticeWindow w{20, -10, 20};
    std::vector<Parameters> ps{P0, PB};
    for (int i = 0; i < 2; ++i) ps.push_back(oracle::random_generic(rng));
    for (const auto& p : ps) {
        CAPTURE(p.qv());
        CAPTURE(p.a);
        CAPTURE(p.b);
        CAPTURE(p.c);
        CAPTURE(p.z);
        const auto m = SpectralMeasure::make(p);
        const auto f = random_compact(w, rng), g = random_compact(w, rng);
        auto r = plancherel_check(f, f, m);
        CHECK(std::abs(r.lhs - r.rhs) / r.scale < 1e-6);
        r = plancherel_check(f, g, m);
        CHECK(std::abs(r.lhs - r.rhs) / r.scale < 1e-6);
        const auto Ff = transform(f, m);
        double worst = 0.0, fmax = 0.0;
        for (const auto& x : LatticeWindow{8, -6, 8}.points()) {
            worst = std::max(worst, std::abs(inverse(Ff, x, m) - f[x]));
            fmax = std::max(fmax, std::abs(f[x]));
        }
        CHECK(worst < 1e-6 * fmax);
    }
}

TEST_CASE("dual orthogonality and spike identity") {
    for (const auto& p : {P0, PB}) {
        const auto m = SpectralMeasure::make(p);
        const std::vector<LatticePoint> xs{LatticePoint::neg(0), LatticePoint::neg(3), LatticePoint::pos(-2),
                                           LatticePoint::pos(1), LatticePoint::pos(4)};
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double ni = 1.0 / jackson_weight(xs[i], p);
            CHECK(std::abs(dual_orthogonality(xs[i], xs[i], m).real() / ni - 1.0) < 1e-6);
            for (std::size_t j = 0; j < i; ++j) {
                const double nj = 1.0 / jackson_weight(xs[j], p);
                CHECK(std::abs(dual_orthogonality(xs[i], xs[j], m)) / std::sqrt(ni * nj) < 1e-6);
            }
        }
    }
}

TEST_CASE("spectral functions reject a mismatched grid") {
    const auto m = SpectralMeasure::make(P0);
    SpectralFunction s = SpectralFunction::zero(m);
    s.continuous.pop_back();
    CHECK_THROWS_AS(inverse(s, LatticePoint::neg(0), m), DomainError);
}

TEST_CASE("Hahn polynomials: eigenfunction route vs 50-digit terminating series") {
    const double q = 0.45;
    const HahnSystem s{2.5, 1.8, 1.4, 1.7};
    for (int k = 0; k <= 8; ++k)
        for (cplx g : {cplx(0.3, 0.8), std::polar(1.0, 2.1), cplx(-0.4, 0.1)}) {
            const cplx o = hahn_oracle(k, g, s, q);
            CHECK(rel(hahn_poly(k, g, s, q), o) < 1e-10);
            CHECK(rel(hahn_poly(k, g, s, q, HahnRoute::Series), o) < 1e-10);
        }
    CHECK_THROWS_AS(HahnSystem({0.5, 1.5, 3.0, 1.0}).validate(), DomainError);
    CHECK_THROWS_AS(hahn_poly(-1, 0.5, s, q), DomainError);
}

TEST_CASE("Hahn system: Gram matrix and closed-form norms") {
    for (const auto& [s, q] : std::vector<std::pair<HahnSystem, double>>{{HahnSystem{}, 0.5}, {{2.5, 1.8, 1.4, 1.7}, 0.45}}) {
        const auto G = hahn_gram(s, q, 7, {-6, 6});
        REQUIRE(G.size() == 20);
        CHECK(G.max_off_diagonal() < 1e-7);
        for (int k = 0; k < 7; ++k) CHECK(std::abs(G(k, k).real() / hahn_poly_norm(k, s, q) - 1.0) < 1e-6);
        for (int k = -6; k <= 6; ++k) {
            const auto i = static_cast<std::size_t>(7 + k + 6);
            CHECK(std::abs(G(i, i).real() / hahn_complement_norm(k, s, q) - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("polynomial regime: big q-Jacobi samples, norms, orthogonality") {
    const LatticeWindow w{80, 0, 80};
    std::vector<LatticeFunction> psis;
    std::vector<double> norms;
    for (int n = 0; n <= 6; ++n) {
        psis.push_back(big_qjacobi_samples(n, w, PP));
        const cplx r = bigq_psi_ratio(n, PP);
        for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(3), LatticePoint::pos(0), LatticePoint::pos(4)}) {
            const auto [want, cond] = bigq_oracle(n, x, PP);
            CHECK(rel(big_qjacobi_poly(n, x.value(PP), PP), want) < 1e-13 * cond);
            CHECK(rel(r * psis.back()[x], want) < 1e-11 * cond);  // non-terminating psi series
        }
        norms.push_back(inner_product(psis.back(), psis.back(), PP).value.real());
        const double closed = big_qjacobi_norm(n, PP);
        CHECK(std::abs(norms.back() / closed - 1.0) < 1e-8);
        CHECK(std::abs(big_qjacobi_norm_residue(n, PP) / closed - 1.0) < 1e-8);
        for (int m = 0; m < n; ++m)
            CHECK(std::abs(inner_product(psis.back(), psis[m], PP).value) / std::sqrt(norms.back() * norms[m]) < 1e-9);
    }
    for (cplx g : {cplx(0.3, 0.4), cplx(1.3, -0.4)})
        for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(4), LatticePoint::pos(5)})
            CHECK(rel(polynomial_wronskian(g, x, PP), wronskian_psi_phi_closed(g, PP)) < 1e-8);
    CHECK_THROWS_AS(big_qjacobi_samples(0, w, P0), DomainError);
}

TEST_CASE("polynomial regime: the band carries no spectral mass") {
    const LatticeWindow sw{40, 0, 40};
    LatticeFunction f(sw), g(sw);
    f[LatticePoint::neg(0)] = 1.0;
    f[LatticePoint::pos(2)] = 0.5;
    g[LatticePoint::neg(1)] = 0.7;
    g[LatticePoint::pos(0)] = cplx(0.2, 0.3);
    const double lo = -(1 + PP.a) * (1 + PP.a), hi = -(1 - PP.a) * (1 - PP.a);
    const auto r = stone_projection_check(f, g, lo + 0.02, hi - 0.02, {1e-2, 5e-3, 2.5e-3}, PP);
    CHECK(std::abs(r.lhs) / r.scale < 1e-4);
    CHECK(r.rhs == cplx(0.0));
}
