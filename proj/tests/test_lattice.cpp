#include <doctest.h>

#include <random>
#include <sstream>

#include <bqj/cfun.hpp>
#include <bqj/lattice.hpp>

#include "oracles.hpp"

using namespace bqj;
using oracle::rel;

namespace {

const Parameters P0 = Parameters::noncompact(0.5, 0.4, 0.5, 0.6, 1.0);

LatticeFunction random_function(const LatticeWindow& w, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return LatticeFunction::sample(w, [&](const LatticePoint&) { return cplx(n(rng), n(rng)); });
}

LatticeFunction conj_of(const LatticeFunction& f) {
    return LatticeFunction::sample(f.window(), [&](const LatticePoint& x) { return std::conj(f[x]); });
}

}  // namespace

TEST_CASE("parameter sets: V, generic subset and polynomial regime") {
    CHECK(P0.in_V());
    CHECK(P0.generic_violation() == "b^2 is a power of q");
    CHECK(Parameters::noncompact(0.5, 0.4, 0.45, 0.6, 1.0).in_V_gen());
    CHECK_THROWS_AS(Parameters::noncompact(0.5, 2.0, 0.6, 0.3, 1.0), DomainError);
    CHECK_THROWS_AS(Parameters::noncompact(0.5, 0.4, 0.5, 0.6, -1.0), DomainError);
    CHECK_THROWS_AS(Parameters::noncompact(1.5, 0.4, 0.5, 0.6, 1.0), DomainError);
    CHECK_FALSE(Parameters::noncompact(0.5, 0.5, 0.4, 0.6, 1.0).in_V_gen());  // a^2 = q^2
    const auto pp = Parameters::polynomial(0.5, 0.4, 0.5, -0.6);
    CHECK(pp.in_polynomial_regime());
    CHECK(std::abs(pp.z - 0.5 / 0.3) < 1e-15);
    CHECK_THROWS_AS(Parameters::polynomial(0.5, 0.4, 0.5, 0.6), DomainError);
}

TEST_CASE("lattice points and windows") {
    CHECK(LatticePoint::neg(0).value(P0) == -1.0);
    CHECK(LatticePoint::neg(3).value(P0) == -0.125);
    CHECK(LatticePoint::pos(-2).value(P0) == 4.0);
    CHECK_THROWS_AS(LatticePoint::neg(-1), DomainError);
    const auto pts = LatticeWindow{3, -2, 2}.points();
    CHECK(pts.size() == 9);
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].value(P0) < pts[i].value(P0));
    CHECK_THROWS_AS((LatticeWindow{-1, 0, 1}.validate()), DomainError);
    CHECK_THROWS_AS((LatticeWindow{1, 2, 1}.validate()), DomainError);
    // Deep points keep full relative accuracy.
    CHECK(std::abs(LatticePoint::pos(70).value(P0) / std::ldexp(1.0, -70) - 1.0) < 1e-15);
}

TEST_CASE("coefficients A and B") {
    CHECK(coeff_B(-1.0, P0) == 0.0);
    CHECK(std::abs(coeff_B(-P0.qv() / (P0.b * P0.c), P0)) < 1e-15);
    // A(1) = 0.16 (1 + 1/0.2)(1 + 1/0.24) by hand
    CHECK(std::abs(coeff_A(1.0, P0) - 0.16 * 6.0 * (1.0 + 1.0 / 0.24)) < 1e-14);
    CHECK_THROWS_AS(coeff_A(0.0, P0), DomainError);
}

TEST_CASE("weights p and r: extended-precision oracle, positivity and limits") {
    const oracle::Real q(0.5);
    for (const auto& x : LatticeWindow{20, -15, 20}.points()) {
        const double xv = x.value(P0);
        const auto X = oracle::Complex(oracle::Real(xv));
        const auto pw = oracle::qpoch_inf(-oracle::Real(0.2) * X, q) * oracle::qpoch_inf(-oracle::Real(0.24) * X, q) /
                        (oracle::qpoch_inf(-oracle::Real(0.3) * X, q) * oracle::qpoch_inf(-q * X, q));
        CHECK(weight_p(xv, P0).value.real() > 0.0);
        CHECK(rel(weight_p(xv, P0).value, oracle::to_double(pw)) < 1e-13);
        CHECK(weight_r(xv, P0).value.real() > 0.0);
    }
    const double r0 = 0.25 / (0.5 * 0.3);
    CHECK(std::abs(weight_r(1e-14, P0).value.real() / r0 - 1.0) < 1e-12);
    CHECK(std::abs(weight_r(-1e-14, P0).value.real() / r0 - 1.0) < 1e-12);
}

TEST_CASE("constant K: positivity, two routes and large-x asymptotics") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const auto p = oracle::random_generic(rng);
        const double K = const_K(p);
        CHECK(K > 0.0);
        CHECK(std::abs(const_K_direct(p) / K - 1.0) < 1e-12);
    }
    const double K = const_K(P0);
    const int m = 40;
    const double x = P0.z * std::pow(P0.qv(), -m);
    const double lhs = (1 - P0.qv()) * x / weight_p(x, P0).value.real();
    CHECK(std::abs(lhs / (K * std::pow(P0.a, -2 * m)) - 1.0) < 1e-8);
}

TEST_CASE("Jackson weights are O(q^k) near the origin") {
    for (int k = 20; k <= 60; ++k) {
        const double qk = std::pow(P0.qv(), k);
        CHECK(jackson_weight(LatticePoint::neg(k), P0) / qk < 1.0);
        CHECK(jackson_weight(LatticePoint::pos(k), P0) / qk < 1.0);
    }
}

TEST_CASE("operator L: constants, two forms and eigenfunctions") {
    const LatticeWindow w{30, -20, 30};
    const auto one = LatticeFunction::sample(w, [](const LatticePoint&) { return cplx(1.0); });
    const auto L1 = apply_L(one, P0);
    const auto S1 = apply_L_selfadjoint_form(one, P0);
    for (const auto& x : w.points()) {
        if (!L1.valid(x)) continue;
        CHECK(std::abs(L1[x]) < 1e-13);
        CHECK(std::abs(S1[x]) < 1e-13);
    }
    CHECK_FALSE(L1.valid(LatticePoint::neg(30)));
    CHECK_FALSE(L1.valid(LatticePoint::pos(-20)));
    CHECK(L1.valid(LatticePoint::neg(0)));

    std::mt19937_64 rng(3);
    const auto f = random_function(w, rng);
    const auto idx = LatticeFunction::sample(w, [&](const LatticePoint& x) { return cplx(x.value(P0)); });
    for (const auto* h : {&f, &idx}) {
        const auto a = apply_L(*h, P0), b = apply_L_selfadjoint_form(*h, P0);
        for (const auto& x : w.points()) {
            if (!a.valid(x)) continue;
            const double scale = std::abs(coeff_A(x.value(P0), P0)) * std::abs((*h)[x]) + std::abs(a[x]) + 1e-300;
            CHECK(std::abs(a[x] - b[x]) / std::max(std::abs(a[x]), 1e-3 * scale) < 1e-11);
        }
    }

    const cplx g(0.3, 0.4);
    const auto phi = LatticeFunction::sample(w, [&](const LatticePoint& x) { return bqj::phi(g, x, P0).value; });
    const auto psi = LatticeFunction::sample(w, [&](const LatticePoint& x) { return bqj::psi(g, x, P0).value; });
    const auto Lphi = apply_L(phi, P0), Lpsi = apply_L(psi, P0);
    const cplx m = mu(g, P0);
    for (const auto& x : w.points()) {
        if (!Lphi.valid(x)) continue;
        const double xv = x.value(P0);
        const double scale = (std::abs(coeff_A(xv, P0)) + std::abs(coeff_B(xv, P0))) * std::abs(phi[x]) + std::abs(m * phi[x]);
        CHECK(std::abs(Lphi[x] - m * phi[x]) / scale < 1e-9);
        if (x.branch == Branch::Neg && x.k == 0) {
            CHECK(std::abs(Lpsi[x] - m * psi[x]) / scale > 1e-3);
        } else {
            const double sp = (std::abs(coeff_A(xv, P0)) + std::abs(coeff_B(xv, P0))) * std::abs(psi[x]) + std::abs(m * psi[x]);
            CHECK(std::abs(Lpsi[x] - m * psi[x]) / sp < 1e-9);
        }
    }
}

TEST_CASE("operator L rejects windows that are too small") {
    const LatticeFunction f(LatticeWindow{0, 0, 5});
    CHECK_THROWS_AS(apply_L(f, P0), DomainError);
}

TEST_CASE("q-derivative: constants, identity and product rule") {
    const LatticeWindow w{10, -5, 10};
    const auto c = LatticeFunction::sample(w, [](const LatticePoint&) { return cplx(2.5); });
    const auto id = LatticeFunction::sample(w, [&](const LatticePoint& x) { return cplx(x.value(P0)); });
    std::mt19937_64 rng(5);
    const auto f = random_function(w, rng), g = random_function(w, rng);
    const auto fg = LatticeFunction::sample(w, [&](const LatticePoint& x) { return f[x] * g[x]; });
    for (const auto& x : w.points()) {
        if (!w.contains(x.shifted_down())) {
            CHECK_THROWS_AS(dq(c, x, P0), DomainError);
            continue;
        }
        CHECK(dq(c, x, P0) == cplx(0.0));
        CHECK(std::abs(dq(id, x, P0) - 1.0) < 1e-13);
        // D(fg)(x) = Df(x) g(x) + f(qx) Dg(x)
        const cplx rhs = dq(f, x, P0) * g[x] + f[x.shifted_down()] * dq(g, x, P0);
        CHECK(rel(dq(fg, x, P0), rhs) < 1e-12);
    }
}

TEST_CASE("Jackson integrals") {
    const QBase q(0.5);
    CHECK(std::abs(jackson_0_to([](double) { return cplx(1.0); }, 0.7, q).value - 0.7) < 1e-15);
    CHECK(std::abs(jackson_0_to([](double x) { return cplx(x); }, 1.0, q).value - 1.0 / 1.5) < 1e-15);
    CHECK(std::abs(jackson_between([](double) { return cplx(1.0); }, 0.3, 0.9, q).value - 0.6) < 1e-15);
    // int_0^inf(1) e^{-x} d_qx against a plain sum over a wide range
    const auto r = jackson_0_to_infinity([](double x) { return cplx(std::exp(-x)); }, 1.0, q, -8, 60);
    double ref = 0.0;
    for (int n = -20; n <= 200; ++n) ref += 0.5 * std::exp(-std::ldexp(1.0, -n)) * std::ldexp(1.0, -n);
    CHECK(std::abs(r.value - ref) < 1e-12);

    const LatticeWindow w{10, -5, 10};
    LatticeFunction f(w);
    f[LatticePoint::neg(2)] = 1.5;
    f[LatticePoint::pos(0)] = cplx(0.0, 2.0);
    f[LatticePoint::pos(-3)] = -1.0;
    const cplx want = 1.5 * (1 - 0.5) * 0.25 / weight_p(-0.25, P0).value.real() * weight_p(-0.25, P0).value.real() +
                      cplx(0.0, 2.0) * 0.5 * 1.0 - 1.0 * 0.5 * 8.0;
    CHECK(std::abs(jackson_integral(f, P0).value - want) < 1e-14);
}

TEST_CASE("inner product: spikes, Hermitian symmetry and symmetry of L") {
    const LatticeWindow w{30, -20, 30};
    for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(4), LatticePoint::pos(-3), LatticePoint::pos(6)}) {
        LatticeFunction d(w);
        d[x] = 1.0;
        const double want = (1 - P0.qv()) * std::abs(x.value(P0)) / weight_p(x.value(P0), P0).value.real();
        CHECK(std::abs(inner_product(d, d, P0).value - want) < 1e-15 * want);
    }
    std::mt19937_64 rng(9);
    LatticeFunction f(w), g(w);
    std::normal_distribution<double> n;
    for (const auto& x : LatticeWindow{5, -4, 5}.points()) {
        f[x] = cplx(n(rng), n(rng));
        g[x] = cplx(n(rng), n(rng));
    }
    CHECK(std::abs(inner_product(f, g, P0).value - std::conj(inner_product(g, f, P0).value)) < 1e-14);
    const auto Lf = apply_L(f, P0), Lg = apply_L(g, P0);
    const cplx lhs = inner_product(Lf, g, P0).value, rhs = inner_product(f, Lg, P0).value;
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(std::abs(lhs), 1.0));
}

TEST_CASE("truncated Green identity reduces to boundary Wronskians") {
    const LatticeWindow w{14, -10, 14};
    std::mt19937_64 rng(1);
    const auto f = random_function(w, rng), g = random_function(w, rng);
    const auto gc = conj_of(g);
    const auto Lf = apply_L(f, P0), Lg = apply_L(g, P0);
    for (const auto& [k, l, m] : std::vector<std::array<int, 3>>{{6, -4, 7}, {3, 0, 10}, {10, -8, 2}}) {
        const cplx lhs = inner_product_truncated(Lf, g, P0, k, l, m) - inner_product_truncated(f, Lg, P0, k, l, m);
        const cplx rhs = wronskian(f, gc, LatticePoint::pos(l - 1), P0) - wronskian(f, gc, LatticePoint::pos(m), P0) +
                         wronskian(f, gc, LatticePoint::neg(k), P0);
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(std::abs(lhs), 1.0));
    }
}

TEST_CASE("Wronskian: antisymmetry, two forms and decay at infinity") {
    const LatticeWindow w{20, -40, 20};
    std::mt19937_64 rng(2);
    const auto f = random_function(w, rng), g = random_function(w, rng);
    for (const auto& x : LatticeWindow{19, -40, 19}.points()) {
        if (x.branch == Branch::Neg && x.k > 19) continue;
        CHECK(std::abs(wronskian(f, f, x, P0)) == 0.0);
        CHECK(std::abs(wronskian(f, g, x, P0) + wronskian(g, f, x, P0)) < 1e-13 * std::abs(wronskian(f, g, x, P0)));
        CHECK(rel(wronskian_dq_form(f, g, x, P0), wronskian(f, g, x, P0)) < 1e-12);
    }
    CHECK_THROWS_AS(wronskian(f, g, LatticePoint::neg(20), P0), DomainError);

    const cplx g1(0.3, 0.4), g2(-0.2, 0.5);
    // Square-summable near infinity: the asymptotic solutions.
    const auto p1 = LatticeFunction::sample(w, [&](const LatticePoint& x) { return phi_asym_full(g1, x, P0); });
    const auto p2 = LatticeFunction::sample(w, [&](const LatticePoint& x) { return phi_asym_full(g2, x, P0); });
    double prev = std::abs(wronskian(p1, p2, LatticePoint::pos(-20), P0));
    for (int m = 21; m <= 39; ++m) {
        const double cur = std::abs(wronskian(p1, p2, LatticePoint::pos(-m), P0));
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("lattice function CSV round trip and arithmetic") {
    const LatticeWindow w{4, -3, 4};
    std::mt19937_64 rng(4);
    const auto f = random_function(w, rng);
    std::stringstream ss;
    f.write_csv(ss, P0);
    const auto back = LatticeFunction::read_csv(ss);
    CHECK(back.window() == w);
    for (const auto& x : w.points()) CHECK(back[x] == f[x]);
    auto h = f;
    h *= 2.0;
    h -= f;
    for (const auto& x : w.points()) CHECK(std::abs(h[x] - f[x]) < 1e-15);
}
