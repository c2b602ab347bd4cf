#include <doctest.h>

#include <random>

#include <bqj/spectral.hpp>

#include "oracles.hpp"

using namespace bqj;
using oracle::rel;

namespace {

const Parameters P0 = Parameters::noncompact(0.5, 0.4, 0.5, 0.6, 1.0);
const Parameters PA = Parameters::noncompact(0.5, 1.6, 0.3, 0.4, 1.0);    // one Pos atom
const Parameters PB = Parameters::noncompact(0.5, 2.8, 0.3, 0.2, 0.8);    // two Pos atoms
const Parameters PC = Parameters::noncompact(0.3, 0.7, 0.9, 0.2, 3.7);

/// Lattice samples of phi at an atom on a wide window.
LatticeFunction atom_samples(double g, const Parameters& p, const LatticeWindow& w) {
    return LatticeFunction::sample(w, [&](const LatticePoint& x) { return phi_at_atom(g, x, p); });
}

LatticeFunction spikes(const LatticeWindow& w, std::vector<std::pair<LatticePoint, cplx>> v) {
    LatticeFunction f(w);
    for (const auto& [x, val] : v) f[x] = val;
    return f;
}

/// phi at an atom: the direct series at 50 digits with the atom
/// location recomputed exactly. phi_gamma is badly conditioned in gamma near small atoms,
/// so the double-rounded gamma_tilde is not a usable argument for the oracle.
cplx phi_oracle_at_atom(const DiscreteAtom& at, const LatticePoint& x, const Parameters& p) {
    using oracle::Complex;
    using oracle::Real;
    const Real q(p.qv()), a(p.a), b(p.b), c(p.c), z(p.z);
    Real g;
    if (at.family == AtomFamily::Neg) {
        g = -a * b * c * z * pow(q, -(at.k + 1));
    } else {
        const Real e = at.e_index == 0 ? a : at.e_index == 1 ? b : c;
        g = 1 / (e * pow(q, at.k));
    }
    const Real X = x.branch == Branch::Neg ? Real(-pow(q, x.k)) : Real(z * pow(q, x.k));
    return oracle::to_double(oracle::phi_series({Complex(a * g), Complex(a / g), Complex(-1 / X)},
                                                {Complex(a * b), Complex(a * c)}, q, Complex(-b * c * X), 800));
}

}  // namespace

TEST_CASE("constant M: two routes, positivity, z scaling") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 10; ++i) {
        const auto p = oracle::random_generic(rng);
        CHECK(const_M(p) > 0.0);
        CHECK(std::abs(const_M_explicit(p) / const_M(p) - 1.0) < 1e-12);
    }
    for (double z : {0.5, 1.0, 2.0}) {
        const auto p = Parameters::noncompact(0.5, 0.4, 0.45, 0.6, z);
        CHECK(std::isfinite(const_M(p)));
        CHECK(const_M(p) > 0.0);
    }
}

TEST_CASE("discrete set: enumeration of both families") {
    const auto s0 = discrete_set_S(P0);
    for (const auto& at : s0.atoms) CHECK(at.family == AtomFamily::Neg);

    const auto sa = discrete_set_S(PA);
    int npos = 0;
    for (const auto& at : sa.atoms)
        if (at.family == AtomFamily::Pos) {
            ++npos;
            CHECK(at.e_index == 0);
            CHECK(at.k == 0);
            CHECK(std::abs(at.gamma_tilde - 1.0 / 1.6) < 1e-15);
        }
    CHECK(npos == 1);

    // gamma_tilde = -abcz/q^{k+1}: replacing z by z/q shifts the Neg labels by one.
    const auto shifted = Parameters::noncompact(P0.qv(), P0.a, P0.b, P0.c, P0.z / P0.qv());
    const auto s1 = discrete_set_S(shifted);
    auto neg_gamma = [](const DiscreteSet& s, int k) -> std::optional<double> {
        for (const auto& at : s.atoms)
            if (at.family == AtomFamily::Neg && at.k == k) return at.gamma_tilde;
        return std::nullopt;
    };
    int compared = 0;
    for (int k = -10; k <= 5; ++k) {
        const auto a = neg_gamma(s1, k), b = neg_gamma(s0, k + 1);
        if (a && b) {
            CHECK(std::abs(*a - *b) < 1e-15 * std::abs(*b));
            ++compared;
        }
    }
    CHECK(compared > 5);
    for (const auto& at : s0.atoms) {
        CHECK(std::abs(at.gamma_tilde) < 1.0);
        CHECK(std::abs(at.mu_value - mu(at.gamma_tilde, P0).real()) < 1e-12 * std::abs(at.mu_value));
    }
    CHECK(s0.dropped_mass_bound < 1e-290);
}

TEST_CASE("Askey-Wilson weight: inversion symmetry, residues, positivity") {
    const QBase q(0.7);
    const std::array<double, 4> t{1.8, 0.3, 0.4, -0.2};
    for (cplx x : {cplx(0.3, 0.4), cplx(-1.2, 0.5), std::polar(1.0, 0.9)})
        CHECK(rel(aw_weight(1.0 / x, t, q), aw_weight(x, t, q)) < 1e-12);
    for (int k : {0, 1}) {
        const double e = 1.8 * std::pow(0.7, k);
        const cplx num = contour_residue([&](cplx x) { return aw_weight(x, t, q) / x; }, e, 1e-3);
        const double closed = aw_residue(0, k, t, q);
        CHECK(std::abs(num.real() / closed - 1.0) < 1e-8);
        CHECK(std::abs(num.imag()) < 1e-8 * std::abs(closed));
    }
    // Masses sit at e q^k with |e q^k| > 1: k = 0, 1 for e = 2.5, q = 0.6.
    const std::array<double, 4> tp{2.5, 0.3, 0.35, 0.2};
    for (int k = 0; k <= 1; ++k) CHECK(aw_residue(0, k, tp, QBase(0.6)) > 0.0);
    CHECK_THROWS_AS(aw_residue(0, 0, {1.0, 0.3, 0.4, 0.2}, q), DomainError);
}

TEST_CASE("atom masses: positivity, closed form vs contour residue, AW relation") {
    for (const auto& p : {P0, PA, PB, PC}) {
        const auto S = discrete_set_S(p);
        REQUIRE(!S.atoms.empty());
        for (const auto& at : S.atoms) {
            CHECK(at.mass > 0.0);
            CHECK(std::abs(discrete_mass(at, p) / at.mass - 1.0) < 1e-15);
            if (at.mass < 1e-250) continue;
            CHECK(std::abs(discrete_mass_residue(at, p) / at.mass - 1.0) < 1e-7);
        }
        for (cplx g : {cplx(0.3, 0.4), cplx(-0.7, 0.1), std::polar(1.0, 1.3)}) CHECK(rel_planch_aw_residual(g, p) < 1e-10);
    }
}

TEST_CASE("atoms are zeros of c(1/gamma)") {
    for (const auto& p : {P0, PA, PB}) {
        for (const auto& at : discrete_set_S(p).atoms) {
            if (at.mass < 1e-100) continue;
            const double g = at.gamma_tilde;
            const double near = std::abs(c_function(1.0 / (g * 1.01), p));
            CHECK(std::abs(c_function(1.0 / g, p)) < 1e-9 * near);
        }
    }
}

TEST_CASE("phi at an atom: c Phi on the positive branch, norms and orthogonality") {
    const LatticeWindow w{160, -100, 160};
    for (const auto& p : {P0, PA, PB}) {
        std::vector<std::pair<DiscreteAtom, LatticeFunction>> fs;
        for (const auto& at : discrete_set_S(p).atoms) {
            if (at.mass < 1e-12) continue;
            for (int k = 0; k <= 5; ++k) {
                const auto x = LatticePoint::pos(k);
                CHECK(rel(phi_at_atom(at.gamma_tilde, x, p), phi_oracle_at_atom(at, x, p)) < 1e-8);
                const auto y = LatticePoint::neg(k);
                CHECK(rel(phi_at_atom(at.gamma_tilde, y, p), phi_oracle_at_atom(at, y, p)) < 1e-10);
            }
            fs.emplace_back(at, atom_samples(at.gamma_tilde, p, w));
        }
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const double n2 = inner_product(fs[i].second, fs[i].second, p).value.real();
            CHECK(std::abs(n2 * fs[i].first.mass - 1.0) < 1e-6);
            for (std::size_t j = 0; j < i; ++j) {
                const double nj = inner_product(fs[j].second, fs[j].second, p).value.real();
                CHECK(std::abs(inner_product(fs[i].second, fs[j].second, p).value) < 1e-7 * std::sqrt(n2 * nj));
            }
        }
    }
}

TEST_CASE("continuous density: symmetry, positivity, spike identity") {
    for (const auto& p : {P0, PA}) {
        for (int i = 0; i <= 512; ++i) {
            const double th = std::numbers::pi * i / 512;
            CHECK(continuous_density(th, p) >= 0.0);
            const cplx g = std::polar(1.0, th);
            if (i > 0 && i < 512) CHECK(rel(c_function(1.0 / g, p), std::conj(c_function(g, p))) < 1e-12);
        }
        const auto m = SpectralMeasure::make(p);
        for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(5), LatticePoint::pos(-3), LatticePoint::pos(2)}) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.theta.size(); ++i)
                s += m.weight[i] * std::norm(phi(std::polar(1.0, m.theta[i]), x, p).value);
            for (const auto& at : m.discrete.atoms) s += at.mass * std::norm(phi_at_atom(at.gamma_tilde, x, p));
            const double xv = x.value(p);
            const double want = weight_p(xv, p).value.real() / ((1 - p.qv()) * std::abs(xv));
            CHECK(std::abs(s / want - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("measure export") {
    const auto m = SpectralMeasure::make(PA);
    const auto j = m.to_json(16);
    CHECK(j.at("K").get<double>() == doctest::Approx(const_K(PA)).epsilon(1e-15));
    CHECK(j.at("M").get<double>() > 0.0);
    CHECK(j.at("density_samples").size() == 17);
    CHECK(j.at("atoms").size() == m.discrete.atoms.size());
    CHECK(j.at("atoms")[0].contains("mass"));
}

TEST_CASE("Green kernel and resolvent") {
    const LatticeWindow w{60, -40, 60};
    std::mt19937_64 rng(43);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> uk(0, 6), up(-5, 6);
    CHECK_FALSE(PA.in_V_gen());  // a/c = q^-2
    for (const auto& p : {P0, PB}) {
        for (int i = 0; i < 5; ++i) {
            LatticeFunction f(w);
            for (int j = 0; j < 4; ++j) {
                f[LatticePoint::neg(uk(rng))] = cplx(nd(rng), nd(rng));
                f[LatticePoint::pos(up(rng))] = cplx(nd(rng), nd(rng));
            }
            cplx g = oracle::random_annulus(rng, 0.2, 0.9);
            if (std::abs(g.imag()) < 0.05) g += cplx(0.0, 0.1);
            CHECK(std::abs(mu(g, p).imag()) > 0.0);
            const auto G = green_apply(f, g, p);
            CHECK(resolvent_residual(f, G, g, p) < 1e-8);
            GreenBasis gb(g, p);
            for (const auto& [x, y] : {std::pair{LatticePoint::neg(2), LatticePoint::pos(3)},
                                       std::pair{LatticePoint::pos(-4), LatticePoint::pos(5)}})
                CHECK(gb.kernel(x, y) == gb.kernel(y, x));
        }
    }
    // A single spike: G is a multiple of phi to its left and of Phi to its right.
    const cplx g(0.2, 0.5);
    const auto x0 = LatticePoint::pos(2);
    const auto G = green_apply(spikes(w, {{x0, 1.0}}), g, P0);
    GreenBasis gb(g, P0);
    const cplx left = G[LatticePoint::neg(3)] / gb.phi_at(LatticePoint::neg(3));
    const cplx right = G[LatticePoint::pos(-3)] / gb.second_at(LatticePoint::pos(-3));
    for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(9), LatticePoint::pos(7)})
        CHECK(rel(G[x], left * gb.phi_at(x)) < 1e-12);
    for (const auto& x : {LatticePoint::pos(1), LatticePoint::pos(-8)}) CHECK(rel(G[x], right * gb.second_at(x)) < 1e-12);
    CHECK_THROWS_AS(green_apply(spikes(w, {{x0, 1.0}}), cplx(0.5, 0.0), P0), DomainError);
}

TEST_CASE("Stone's formula: sub-band, isolated atom and gap") {
    const LatticeWindow w{60, -40, 60};
    const auto f = spikes(w, {{LatticePoint::neg(0), 1.0}, {LatticePoint::neg(3), {0.5, -0.2}}, {LatticePoint::pos(1), 0.7}});
    const auto g = spikes(w, {{LatticePoint::neg(1), 0.8}, {LatticePoint::pos(0), {0.4, 0.1}}, {LatticePoint::pos(2), -0.5}});
    const auto m = SpectralMeasure::make(P0);
    const std::vector<double> eps{1e-2, 5e-3, 2.5e-3};
    auto r = stone_projection_check(f, g, -1.5, -0.8, eps, P0, &m);
    CHECK(std::abs(r.lhs - r.rhs) < 1e-4 * r.scale);
    CHECK(std::abs(r.rhs) > 1e-3 * r.scale);
    r = stone_projection_check(f, g, -2.4, -2.05, eps, P0, &m);  // the atom at mu = -2.185
    CHECK(std::abs(r.lhs - r.rhs) < 1e-4 * r.scale);
    CHECK(std::abs(r.rhs) > 1e-3 * r.scale);
    r = stone_projection_check(f, g, -2.8, -2.3, eps, P0, &m);
    CHECK(std::abs(r.rhs) == 0.0);
    CHECK(std::abs(r.lhs) < 1e-5 * r.scale);
    CHECK_THROWS_AS(stone_projection_check(f, g, -1.96, -1.0, eps, P0, &m), DomainError);
}
