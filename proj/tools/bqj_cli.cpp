// Command-line front end: evaluation, identity suites and tables.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <bqj/cfun.hpp>
#include <bqj/eigen.hpp>
#include <bqj/lattice.hpp>
#include <bqj/qseries.hpp>
#include <bqj/spectral.hpp>
#include <bqj/transform.hpp>

namespace {

using bqj::cplx;
using bqj::LatticePoint;
using bqj::Parameters;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitTolerance = 4;

// ---------------------------------------------------------------------------
// Output tables

using Cell = std::variant<std::monostate, std::string, double, long long, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }

    static std::string format(const Cell& c) {
        if (std::holds_alternative<std::monostate>(c)) return "";
        if (const auto* s = std::get_if<std::string>(&c)) return *s;
        if (const auto* d = std::get_if<double>(&c)) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", *d);
            return buf;
        }
        if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
        return std::get<bool>(c) ? "pass" : "fail";
    }

    static std::string quoted(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return out + "\"";
    }

    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << quoted(columns[i]);
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << quoted(format(r[i]));
            os << '\n';
        }
    }

    void write_json(std::ostream& os) const {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json o;
            for (std::size_t i = 0; i < columns.size() && i < r.size(); ++i) {
                const Cell& c = r[i];
                if (std::holds_alternative<std::monostate>(c)) o[columns[i]] = nullptr;
                else if (const auto* s = std::get_if<std::string>(&c)) o[columns[i]] = *s;
                else if (const auto* d = std::get_if<double>(&c)) o[columns[i]] = std::isfinite(*d) ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(format(c));
                else if (const auto* n = std::get_if<long long>(&c)) o[columns[i]] = *n;
                else o[columns[i]] = std::get<bool>(c);
            }
            arr.push_back(std::move(o));
        }
        os << arr.dump(2) << '\n';
    }
};

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    double q = 0.5, a = 0.4, b = 0.5, c = 0.6, z = 1.0;
    std::string gamma;
    std::optional<double> theta;
    std::string x = "neg:0";
    std::optional<double> tol;
    int kmax_neg = 60, kmin_pos = -40, kmax_pos = 60;
    int n = -1;
    std::string out;
    std::string format = "csv";
};

cplx parse_complex(const std::string& s) {
    const auto at = s.find('@');
    const auto comma = s.find(',');
    try {
        if (at != std::string::npos) return std::polar(std::stod(s.substr(0, at)), std::stod(s.substr(at + 1)));
        if (comma != std::string::npos) return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
        return {std::stod(s), 0.0};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--gamma", "expected re,im or modulus@angle, got '" + s + "'");
    }
}

LatticePoint parse_point(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--x", "expected neg:k or pos:k, got '" + s + "'");
    const std::string br = s.substr(0, colon);
    int k = 0;
    try {
        k = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--x", "bad index in '" + s + "'");
    }
    if (br == "neg") {
        if (k < 0) throw bqj::DomainError("Neg lattice index must be >= 0");
        return LatticePoint::neg(k);
    }
    if (br == "pos") return LatticePoint::pos(k);
    throw CLI::ValidationError("--x", "branch must be neg or pos, got '" + br + "'");
}

/// Noncompact parameters, or the polynomial regime when bc < 0.
Parameters make_params(const RunConfig& cfg) {
    if (cfg.b * cfg.c < 0) return Parameters::polynomial(cfg.q, cfg.a, cfg.b, cfg.c);
    return Parameters::noncompact(cfg.q, cfg.a, cfg.b, cfg.c, cfg.z);
}

/// Polynomial-regime parameters; c is negated when bc > 0.
Parameters make_polynomial_params(const RunConfig& cfg) {
    const double c = cfg.b * cfg.c < 0 ? cfg.c : -cfg.c;
    return Parameters::polynomial(cfg.q, cfg.a, cfg.b, c);
}

bqj::LatticeWindow window_of(const RunConfig& cfg, const Parameters& p) {
    bqj::LatticeWindow w{cfg.kmax_neg, cfg.kmin_pos, cfg.kmax_pos};
    if (p.regime == bqj::Regime::Polynomial) w.k_min_pos = 0;
    w.validate();
    return w;
}

cplx require_gamma(const RunConfig& cfg) {
    if (cfg.gamma.empty()) throw CLI::ValidationError("--gamma", "this quantity needs --gamma");
    return parse_complex(cfg.gamma);
}

// ---------------------------------------------------------------------------
// eval

Table cmd_eval(const std::string& what, const RunConfig& cfg) {
    const Parameters p = make_params(cfg);
    Table t;
    t.columns = {"quantity", "re", "im", "err_estimate"};
    auto row = [&](const std::string& name, cplx v, std::optional<double> err) {
        t.add({name, v.real(), v.imag(), err ? Cell(*err) : Cell()});
    };
    if (what == "phi" || what == "psi") {
        const auto x = parse_point(cfg.x);
        const auto r = what == "phi" ? bqj::phi(require_gamma(cfg), x, p) : bqj::psi(require_gamma(cfg), x, p);
        row(what, r.value, r.err_estimate);
    } else if (what == "Phi") {
        const auto x = parse_point(cfg.x);
        const cplx g = require_gamma(cfg);
        if (x.branch == bqj::Branch::Pos) {
            const auto r = bqj::phi_asym(g, x, p);
            row("Phi", r.value, r.err_estimate);
        } else {
            row("Phi", bqj::phi_asym_full(g, x, p), std::nullopt);
        }
    } else if (what == "c") {
        const cplx g = require_gamma(cfg);
        row("c", bqj::c_function(g, p), std::nullopt);
        row("ctilde", bqj::ctilde_function(g, p), std::nullopt);
    } else if (what == "K") {
        row("K", bqj::const_K(p), std::nullopt);
        row("M", bqj::const_M(p), std::nullopt);
        if (!cfg.gamma.empty()) {
            const auto kc = bqj::K_coefficients(parse_complex(cfg.gamma), p);
            row("K(gamma)", kc.K, std::nullopt);
            row("Ktilde(gamma)", kc.Ktilde, std::nullopt);
        }
    } else if (what == "measure-atom") {
        const cplx g = require_gamma(cfg);
        const auto S = bqj::discrete_set_S(p);
        const auto it = std::find_if(S.atoms.begin(), S.atoms.end(), [&](const bqj::DiscreteAtom& at) {
            return std::abs(g - at.gamma_tilde) <= 1e-9 * std::abs(at.gamma_tilde);
        });
        if (it == S.atoms.end())
            throw bqj::DomainError("gamma = " + Table::format(g.real()) + " is not a point of the discrete spectrum");
        row("gamma", it->gamma_tilde, std::nullopt);
        row("mass", it->mass, std::nullopt);
        row("mass_residue", bqj::discrete_mass_residue(*it, p), std::nullopt);
        row("mu", it->mu_value, std::nullopt);
    } else if (what == "density") {
        if (!cfg.theta) throw CLI::ValidationError("--theta", "density needs --theta");
        row("density", bqj::continuous_density(*cfg.theta, p), std::nullopt);
    } else {
        throw CLI::ValidationError("eval", "unknown quantity '" + what + "'");
    }
    return t;
}

// ---------------------------------------------------------------------------
// verify

struct SuiteRows {
    Table table;
    bool all_pass = true;
    const Parameters* params = nullptr;
    std::optional<double> tol_override;
    std::string suite;

    SuiteRows(std::string s, const Parameters& p, std::optional<double> tol) : params(&p), tol_override(tol), suite(std::move(s)) {
        table.columns = {"suite", "check", "identity", "q", "a", "b", "c", "z", "residual", "tolerance", "pass"};
    }

    void check(const std::string& name, const std::string& identity, double residual, double tol) {
        const double t = tol_override.value_or(tol);
        const bool ok = std::isfinite(residual) && residual <= t;
        all_pass = all_pass && ok;
        const Parameters& p = *params;
        table.add({suite, name, identity, p.qv(), p.a, p.b, p.c, p.z, residual, t, ok});
    }
};

double rel(cplx got, cplx want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

std::string gamma_tag(cplx g) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "gamma=%.6g%+.6gi", g.real(), g.imag());
    return buf;
}

const std::vector<cplx>& probe_gammas() {
    static const std::vector<cplx> g{{0.3, 0.4}, {-0.5, 0.2}, {0.1, -0.7}, {0.8, 0.1}, {1.7, -0.6}};
    return g;
}

/// Fixed finitely supported test functions.
bqj::LatticeFunction probe_f(const bqj::LatticeWindow& w) {
    bqj::LatticeFunction f(w);
    const std::vector<std::pair<LatticePoint, cplx>> v{{LatticePoint::neg(0), 1.0},
                                                       {LatticePoint::neg(3), {0.5, -0.2}},
                                                       {LatticePoint::pos(1), 0.7},
                                                       {LatticePoint::pos(-2), {0.0, 0.3}}};
    for (const auto& [x, val] : v)
        if (w.contains(x)) f[x] = val;
    return f;
}

bqj::LatticeFunction probe_g(const bqj::LatticeWindow& w) {
    bqj::LatticeFunction f(w);
    const std::vector<std::pair<LatticePoint, cplx>> v{{LatticePoint::neg(1), 0.8},
                                                       {LatticePoint::pos(0), {0.4, 0.1}},
                                                       {LatticePoint::pos(2), -0.5},
                                                       {LatticePoint::neg(0), 0.3}};
    for (const auto& [x, val] : v)
        if (w.contains(x)) f[x] = val;
    return f;
}

void suite_wronskian(SuiteRows& s, const Parameters& p) {
    // The difference form loses about q^-k digits near the origin, so stay within |k| <= 8. Beyond z,
    // phi and psi both follow the growing solution and the products cancel, so sample x in [-1, z].
    const std::vector<LatticePoint> pts{LatticePoint::neg(0), LatticePoint::neg(1), LatticePoint::neg(3),
                                        LatticePoint::neg(8), LatticePoint::pos(0),  LatticePoint::pos(1),
                                        LatticePoint::pos(3), LatticePoint::pos(8)};
    for (cplx g : probe_gammas()) {
        const std::string tag = gamma_tag(g);
        const cplx closed = bqj::wronskian_psi_phi_closed(g, p);
        const cplx wg = bqj::W_gamma(g, p);
        double worst = 0.0, spread = 0.0, worst_phi = 0.0;
        std::vector<cplx> vals;
        for (const auto& x : pts) {
            const auto xd = x.shifted_down();
            const double xv = x.value(p);
            const cplx w = bqj::wronskian_values(xv, bqj::psi(g, x, p).value, bqj::psi(g, xd, p).value,
                                                 bqj::phi(g, x, p).value, bqj::phi(g, xd, p).value, p);
            worst = std::max(worst, rel(w, closed));
            vals.push_back(w);
            if (std::abs(g) < 1.0) {
                const cplx w2 = bqj::wronskian_values(xv, bqj::phi_asym_full(g, x, p), bqj::phi_asym_full(g, xd, p),
                                                      bqj::phi(g, x, p).value, bqj::phi(g, xd, p).value, p);
                worst_phi = std::max(worst_phi, rel(w2, wg));
            }
        }
        for (const auto& v : vals) spread = std::max(spread, std::abs(v - vals.front()) / std::abs(vals.front()));
        s.check("W(psi,phi) lattice vs closed form " + tag, "Wronskian of psi and phi", worst, 1e-8);
        s.check("W(psi,phi) constancy spread " + tag, "Wronskian constancy", spread, 1e-9);
        if (std::abs(g) < 1.0) s.check("W(Phi,phi) lattice vs W(gamma) " + tag, "Wronskian of Phi and phi", worst_phi, 1e-8);
    }
}

void suite_connection(SuiteRows& s, const Parameters& p) {
    const std::vector<LatticePoint> pts{LatticePoint::pos(-8), LatticePoint::pos(-2), LatticePoint::pos(0),
                                        LatticePoint::pos(4), LatticePoint::pos(12)};
    for (cplx g : probe_gammas()) {
        const std::string tag = gamma_tag(g);
        double e1 = 0.0, e2 = 0.0, e3 = 0.0;
        for (const auto& x : pts) {
            e1 = std::max(e1, bqj::connection_expand(g, x, p));
            e2 = std::max(e2, bqj::connection_expand_psi(g, x, p));
            e3 = std::max(e3, bqj::connection_K_residual(g, x, p));
        }
        s.check("phi = c Phi + c(1/g) Phi_{1/g} " + tag, "c-function expansion of phi", e1, 1e-9);
        s.check("psi expansion in Phi " + tag, "c-function expansion of psi", e2, 1e-9);
        s.check("Phi = K phi + Ktilde psi " + tag, "K expansion of Phi", e3, 1e-9);
        s.check("connection matrix identity " + tag, "connection matrix identity", bqj::matrix_identity_residual(g, p), 1e-9);
        const cplx wg = p.a * bqj::const_K(p) * bqj::c_function(1.0 / g, p) * (g - 1.0 / g);
        const LatticePoint x = LatticePoint::pos(1), xd = x.shifted_down();
        const cplx wl = bqj::wronskian_values(x.value(p), bqj::phi_asym(g, x, p).value, bqj::phi_asym(g, xd, p).value,
                                              bqj::phi(g, x, p).value, bqj::phi(g, xd, p).value, p);
        if (std::abs(g) < 1.0) s.check("W(gamma) = aKc(1/g)(g - 1/g) " + tag, "W(gamma) closed form", rel(wl, wg), 1e-8);
    }
}

void suite_green(SuiteRows& s, const Parameters& p, const bqj::LatticeWindow& w) {
    const std::vector<cplx> gs{{0.3, 0.4}, {-0.5, 0.2}, {0.1, -0.7}, {0.0, 0.6}, {-0.2, -0.3}};
    const auto f = probe_f(w);
    for (cplx g : gs) {
        const std::string tag = gamma_tag(g);
        const auto G = bqj::green_apply(f, g, p);
        s.check("(L - mu) G_f = f " + tag, "resolvent identity", bqj::resolvent_residual(f, G, g, p), 1e-8);
        bqj::GreenBasis gb(g, p);
        const auto x = LatticePoint::neg(2), y = LatticePoint::pos(3);
        s.check("kernel symmetry " + tag, "Green kernel symmetry", rel(gb.kernel(x, y), gb.kernel(y, x)), 1e-12);
    }
}

void suite_plancherel(SuiteRows& s, const Parameters& p, const bqj::LatticeWindow& w) {
    const auto m = bqj::SpectralMeasure::make(p);
    const auto f = probe_f(w), g = probe_g(w);
    auto r = bqj::plancherel_check(f, f, m);
    s.check("||f||^2 = int |Ff|^2 dnu", "Plancherel isometry", std::abs(r.lhs - r.rhs) / r.scale, 1e-6);
    r = bqj::plancherel_check(f, g, m);
    s.check("<f,g> = int Ff conj(Fg) dnu", "Plancherel pairing", std::abs(r.lhs - r.rhs) / r.scale, 1e-6);
    for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(3), LatticePoint::pos(-2), LatticePoint::pos(2)}) {
        const double want = 1.0 / bqj::jackson_weight(x, p);
        const double got = bqj::dual_orthogonality(x, x, m).real();
        s.check("spike identity at " + std::string(x.branch == bqj::Branch::Neg ? "neg:" : "pos:") + std::to_string(x.k),
                "int |phi(x)|^2 dnu = p(x)/((1-q)|x|)", std::abs(got - want) / want, 1e-6);
    }
    const auto x = LatticePoint::neg(2), y = LatticePoint::pos(1);
    const double nx = std::sqrt(1.0 / bqj::jackson_weight(x, p)), ny = std::sqrt(1.0 / bqj::jackson_weight(y, p));
    s.check("dual orthogonality neg:2 vs pos:1", "dual orthogonality", std::abs(bqj::dual_orthogonality(x, y, m)) / (nx * ny), 1e-6);
    const auto Ff = bqj::transform(f, m);
    double worst = 0.0;
    bqj::LatticeWindow iw{std::min(w.k_max_neg, 12), std::max(w.k_min_pos, -8), std::min(w.k_max_pos, 12)};
    for (const auto& pt : iw.points()) worst = std::max(worst, std::abs(bqj::inverse(Ff, pt, m) - f[pt]));
    s.check("G(Ff) = f max-norm", "inversion", worst, 1e-6);
}

void suite_hahn(SuiteRows& s, const Parameters& p) {
    const double q = p.qv();
    const auto sys = bqj::HahnSystem::from(p);
    double worst = 0.0;
    for (int k = 0; k <= 6; ++k)
        for (cplx g : {cplx(0.3, 0.8), std::polar(1.0, 2.1), cplx(-0.4, 0.1)}) {
            const cplx v = bqj::hahn_poly(k, g, sys, q);
            worst = std::max(worst, rel(bqj::hahn_poly(k, g, sys, q, bqj::HahnRoute::Series), v));
            worst = std::max(worst, rel(bqj::hahn_poly(k, 1.0 / g, sys, q), v));
        }
    s.check("p_k eigenfunction vs terminating series, k <= 6", "continuous dual q^-1-Hahn polynomials", worst, 1e-10);
    worst = 0.0;
    for (int k = -6; k <= 6; ++k)
        for (cplx g : {std::polar(1.0, 0.7), std::polar(1.0, 2.9)}) {
            const cplx v = bqj::hahn_complement(k, g, sys, q, bqj::PhiRoute::Continuation);
            const double x = p.z * std::pow(q, k);
            const bool alt2 = std::abs(p.b * g) < 1.0 || std::abs(p.b / g) < 1.0;
            if (!alt2 && !(std::abs(p.b * p.c * x) < 1.0)) continue;
            const cplx w = bqj::hahn_complement(k, g, sys, q, alt2 ? bqj::PhiRoute::Continuation2 : bqj::PhiRoute::Direct);
            worst = std::max(worst, rel(w, v));
        }
    s.check("r_k series vs second representation, |k| <= 6", "complement functions r_k", worst, 1e-10);
    const auto m = bqj::SpectralMeasure::make(p);
    const auto G = bqj::hahn_gram(sys, q, 7, {-6, 6}, &m);
    s.check("Gram off-diagonal (relative)", "orthogonal basis of L2(dsigma_z)", G.max_off_diagonal(), 1e-7);
    double wp = 0.0, wr = 0.0;
    for (int k = 0; k < 7; ++k) wp = std::max(wp, std::abs(G(k, k).real() / bqj::hahn_poly_norm(k, sys, q) - 1.0));
    for (int k = -6; k <= 6; ++k) {
        const auto i = static_cast<std::size_t>(7 + k + 6);
        wr = std::max(wr, std::abs(G(i, i).real() / bqj::hahn_complement_norm(k, sys, q) - 1.0));
    }
    s.check("p_k norms vs closed form", "Hahn polynomial norms", wp, 1e-6);
    s.check("r_k norms vs closed form", "complement norms", wr, 1e-6);
}

void suite_polynomial(SuiteRows& s, const Parameters& pp, const RunConfig& cfg) {
    bqj::LatticeWindow w{std::max(cfg.kmax_neg, 80), 0, std::max(cfg.kmax_pos, 80)};
    std::vector<bqj::LatticeFunction> psis;
    std::vector<double> norms;
    double wn = 0.0, wres = 0.0, worth = 0.0;
    for (int n = 0; n <= 6; ++n) {
        psis.push_back(bqj::big_qjacobi_samples(n, w, pp));
        norms.push_back(bqj::inner_product(psis.back(), psis.back(), pp).value.real());
        const double closed = bqj::big_qjacobi_norm(n, pp);
        wn = std::max(wn, std::abs(norms.back() / closed - 1.0));
        wres = std::max(wres, std::abs(bqj::big_qjacobi_norm_residue(n, pp) / closed - 1.0));
        for (int m = 0; m < n; ++m)
            worth = std::max(worth, std::abs(bqj::inner_product(psis.back(), psis[static_cast<std::size_t>(m)], pp).value) /
                                        std::sqrt(norms.back() * norms[static_cast<std::size_t>(m)]));
    }
    s.check("||psi_n||^2 lattice vs closed form, n <= 6", "big q-Jacobi norms", wn, 1e-8);
    s.check("closed form vs residue of 1/W", "big q-Jacobi norms, residue route", wres, 1e-8);
    s.check("<psi_m, psi_n> = 0, m != n <= 6", "big q-Jacobi orthogonality", worth, 1e-9);
    double ww = 0.0;
    for (cplx g : {cplx(0.3, 0.4), cplx(-0.5, 0.2), cplx(1.3, -0.4)})
        for (const auto& x : {LatticePoint::neg(0), LatticePoint::neg(4), LatticePoint::pos(0), LatticePoint::pos(5)})
            ww = std::max(ww, rel(bqj::polynomial_wronskian(g, x, pp), bqj::wronskian_psi_phi_closed(g, pp)));
    s.check("W(psi,phi) on [-1,-q/bc]_q vs closed form", "polynomial-regime Wronskian", ww, 1e-8);
    bqj::LatticeWindow sw{40, 0, 40};
    bqj::LatticeFunction f(sw), g(sw);
    f[LatticePoint::neg(0)] = 1.0;
    f[LatticePoint::pos(2)] = 0.5;
    g[LatticePoint::neg(1)] = 0.7;
    g[LatticePoint::pos(0)] = cplx(0.2, 0.3);
    const double lo = -(1 + pp.a) * (1 + pp.a), hi = -(1 - pp.a) * (1 - pp.a);
    const auto r = bqj::stone_projection_check(f, g, lo + 0.02, hi - 0.02, {1e-2, 5e-3, 2.5e-3}, pp);
    s.check("Stone mass of the band", "no continuous spectrum in the compact case", std::abs(r.lhs) / r.scale, 1e-4);
}

void suite_theta(SuiteRows& s, const Parameters& p) {
    const bqj::QBase& q = p.q;
    double w = 0.0;
    for (cplx x : {cplx(0.3), cplx(-0.7), cplx(0.4, 0.9), cplx(2.5, -1.0)})
        for (int k = -8; k <= 8; ++k)
            w = std::max(w, rel(bqj::theta_shift(x, q, k), bqj::theta(x * std::pow(q.value(), k), q).value));
    s.check("theta(q^k x) via quasi-periodicity, |k| <= 8", "theta quasi-periodicity", w, 1e-11);
    w = 0.0;
    for (cplx x : {cplx(0.3), cplx(-0.7), cplx(0.4, 0.9), cplx(2.5, -1.0)})
        w = std::max(w, rel(bqj::theta(q.value() / x, q).value, bqj::theta(x, q).value));
    s.check("theta(x) = theta(q/x)", "theta reflection", w, 1e-11);
    w = 0.0;
    const std::vector<std::array<cplx, 4>> draws{{cplx(0.7), cplx(1.3), cplx(0.45), cplx(2.1)},
                                                 {cplx(-0.6, 0.2), cplx(0.8, 0.5), cplx(1.7), cplx(0.35, -0.4)}};
    for (const auto& [x, l, m, n] : draws) {
        auto th = [&](std::initializer_list<cplx> xs) { return bqj::theta(xs, q).value; };
        const cplx lhs = th({x * l, x / l, m * n, m / n}) - th({x * n, x / n, l * m, m / l});
        const cplx rhs = m / l * th({x * m, x / m, l * n, l / n});
        w = std::max(w, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300}));
    }
    s.check("three-term theta product identity", "theta product identity", w, 1e-11);
    w = 0.0;
    for (cplx x : {cplx(0.3), cplx(-1.7), cplx(0.4, 0.9)})
        for (int mm = 0; mm <= 6; ++mm) {
            const cplx lhs = bqj::qpoch_inf(x * std::pow(q.value(), 1 - mm), q).value;
            const cplx rhs = std::pow(-x, mm) * std::pow(q.value(), -mm * (mm - 1) / 2.0) *
                             bqj::qpoch_finite(1.0 / x, q, mm) * bqj::qpoch_inf(q.value() * x, q).value;
            w = std::max(w, rel(lhs, rhs));
        }
    s.check("(x q^{1-m};q)_inf shift transformation", "q-shift transformation", w, 1e-11);
    w = 0.0;
    for (const auto& [a, b, c] : std::vector<std::array<double, 3>>{{0.5, 0.6, 0.2}, {-0.5, 0.8, 0.25}, {0.9, -0.7, 0.3}}) {
        const cplx sum = bqj::phi_series({a, b}, {c}, q, c / (a * b)).value;
        const cplx prod = (bqj::qpoch_inf_scaled({c / a, c / b}, q) / bqj::qpoch_inf_scaled({c, c / (a * b)}, q)).value();
        w = std::max(w, rel(sum, prod));
    }
    s.check("2phi1(a,b;c;q,c/ab) = q-Gauss product", "q-Gauss sum", w, 1e-11);
}

/// Picks a sub-band, an isolated atom and a spectral gap, and runs Stone's formula on each.
void suite_stone(SuiteRows& s, const Parameters& p, const bqj::LatticeWindow& w) {
    const auto m = bqj::SpectralMeasure::make(p);
    const auto f = probe_f(w), g = probe_g(w);
    const std::vector<double> eps{1e-2, 5e-3, 2.5e-3};
    auto report = [&](const std::string& name, const std::string& identity, double m1, double m2, double tol) {
        const auto r = bqj::stone_projection_check(f, g, m1, m2, eps, p, &m);
        char iv[64];
        std::snprintf(iv, sizeof iv, " (%.6g, %.6g)", m1, m2);
        s.check(name + iv, identity, std::abs(r.lhs - r.rhs) / r.scale, tol);
    };
    const auto iv = bqj::stone_intervals(m);
    report("continuous sub-band", "Stone formula vs continuous projection", iv.sub_band.first, iv.sub_band.second, 1e-4);
    if (iv.isolated_atom)
        report("isolated atom", "Stone formula vs point mass", iv.isolated_atom->first, iv.isolated_atom->second, 1e-4);
    if (iv.gap) report("spectral gap", "no spectrum in a gap", iv.gap->first, iv.gap->second, 1e-5);
}

int cmd_verify(const std::string& suite, const RunConfig& cfg, Table& out) {
    if (suite == "polynomial") {
        const Parameters pp = make_polynomial_params(cfg);
        SuiteRows s(suite, pp, cfg.tol);
        suite_polynomial(s, pp, cfg);
        out = std::move(s.table);
        return s.all_pass ? kExitOk : kExitTolerance;
    }
    const Parameters p = make_params(cfg);
    const auto w = window_of(cfg, p);
    SuiteRows s(suite, p, cfg.tol);
    if (suite == "wronskian") suite_wronskian(s, p);
    else if (suite == "connection") suite_connection(s, p);
    else if (suite == "green") suite_green(s, p, w);
    else if (suite == "plancherel") suite_plancherel(s, p, w);
    else if (suite == "hahn") suite_hahn(s, p);
    else if (suite == "theta-identity") suite_theta(s, p);
    else if (suite == "stone") suite_stone(s, p, w);
    else throw CLI::ValidationError("verify", "unknown suite '" + suite + "'");
    out = std::move(s.table);
    return s.all_pass ? kExitOk : kExitTolerance;
}

// ---------------------------------------------------------------------------
// table

Table cmd_table(const std::string& name, const RunConfig& cfg) {
    Table t;
    if (name == "atoms") {
        const Parameters p = make_params(cfg);
        const auto S = bqj::discrete_set_S(p);
        t.columns = {"family", "e", "k", "gamma", "mu", "mass"};
        const char* names = "abc";
        for (const auto& at : S.atoms)
            t.add({std::string(at.family == bqj::AtomFamily::Pos ? "pos" : "neg"),
                   at.e_index >= 0 ? Cell(std::string(1, names[at.e_index])) : Cell(), static_cast<long long>(at.k),
                   at.gamma_tilde, at.mu_value, at.mass});
    } else if (name == "hahn-gram") {
        const Parameters p = make_params(cfg);
        const int n = cfg.n >= 0 ? cfg.n : 6;
        const auto G = bqj::hahn_gram(bqj::HahnSystem::from(p), p.qv(), n, {-10, 10});
        t.columns = {"label"};
        for (const auto& l : G.labels) t.columns.push_back(l);
        for (std::size_t i = 0; i < G.size(); ++i) {
            std::vector<Cell> row{G.labels[i]};
            for (std::size_t j = 0; j < G.size(); ++j) row.emplace_back(G(i, j).real());
            t.add(std::move(row));
        }
    } else if (name == "bigq-norms") {
        const Parameters pp = make_polynomial_params(cfg);
        const int n = cfg.n >= 0 ? cfg.n : 8;
        bqj::LatticeWindow w{std::max(cfg.kmax_neg, 80), 0, std::max(cfg.kmax_pos, 80)};
        t.columns = {"n", "closed_form", "residue_route", "lattice", "rel_diff"};
        for (int k = 0; k <= n; ++k) {
            const double closed = bqj::big_qjacobi_norm(k, pp);
            const auto s = bqj::big_qjacobi_samples(k, w, pp);
            const double lat = bqj::inner_product(s, s, pp).value.real();
            t.add({static_cast<long long>(k), closed, bqj::big_qjacobi_norm_residue(k, pp), lat, std::abs(lat / closed - 1.0)});
        }
    } else if (name == "density") {
        const Parameters p = make_params(cfg);
        const int n = cfg.n >= 0 ? cfg.n : 64;
        if (n < 1) throw CLI::ValidationError("--n", "density needs --n >= 1");
        t.columns = {"theta", "density"};
        for (int i = 0; i <= n; ++i) {
            const double th = std::numbers::pi * i / n;
            t.add({th, bqj::continuous_density(th, p)});
        }
    } else {
        throw CLI::ValidationError("table", "unknown table '" + name + "'");
    }
    return t;
}

void emit(const Table& t, const RunConfig& cfg) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!cfg.out.empty()) {
        file.open(cfg.out);
        if (!file) throw CLI::ValidationError("--out", "cannot open '" + cfg.out + "'");
        os = &file;
    }
    if (cfg.format == "json") t.write_json(*os);
    else t.write_csv(*os);
}

void add_common_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--q", cfg.q, "base q, 0 < q < 1")->capture_default_str();
    cmd->add_option("--a", cfg.a, "parameter a")->capture_default_str();
    cmd->add_option("--b", cfg.b, "parameter b")->capture_default_str();
    cmd->add_option("--c", cfg.c, "parameter c; bc < 0 selects the polynomial regime")->capture_default_str();
    cmd->add_option("--z", cfg.z, "lattice parameter z > 0")->capture_default_str();
    cmd->add_option("--gamma", cfg.gamma, "spectral parameter: re,im or modulus@angle");
    cmd->add_option("--theta", cfg.theta, "angle on the unit circle");
    cmd->add_option("--x", cfg.x, "lattice point neg:k (-q^k) or pos:k (z q^k)")->capture_default_str();
    cmd->add_option("--tol", cfg.tol, "override every check tolerance");
    cmd->add_option("--kmax-neg", cfg.kmax_neg, "window: largest Neg index")->capture_default_str();
    cmd->add_option("--kmin-pos", cfg.kmin_pos, "window: smallest Pos index")->capture_default_str();
    cmd->add_option("--kmax-pos", cfg.kmax_pos, "window: largest Pos index")->capture_default_str();
    cmd->add_option("--n", cfg.n, "table size");
    cmd->add_option("--out", cfg.out, "output file (default stdout)");
    cmd->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Big q-Jacobi function transform: evaluation, identity checks and tables.\n\n"
                 "Exit codes: 0 pass, 1 usage, 2 domain error, 3 convergence error, 4 tolerance failure.\n"
                 "eval columns: quantity,re,im,err_estimate.\n"
                 "verify columns: suite,check,identity,q,a,b,c,z,residual,tolerance,pass.\n"
                 "Polynomial-regime commands (verify polynomial, table bigq-norms) negate c when bc > 0.\n"
                 "--format json writes the same rows as an array of objects."};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string what;

    auto* eval = app.add_subcommand("eval", "evaluate phi, psi, Phi, c, K, measure-atom or density");
    eval->add_option("quantity", what, "phi | psi | Phi | c | K | measure-atom | density")->required();
    add_common_flags(eval, cfg);

    auto* verify = app.add_subcommand("verify", "run an identity suite");
    verify->add_option("suite", what, "wronskian | connection | green | plancherel | hahn | polynomial | theta-identity | stone")
        ->required();
    add_common_flags(verify, cfg);

    auto* table = app.add_subcommand("table", "emit a table");
    table->add_option("name", what, "atoms | hahn-gram | bigq-norms | density")->required();
    add_common_flags(table, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        Table out;
        int code = kExitOk;
        if (*eval) out = cmd_eval(what, cfg);
        else if (*verify) code = cmd_verify(what, cfg, out);
        else out = cmd_table(what, cfg);
        emit(out, cfg);
        return code;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const bqj::DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const bqj::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << '\n';
        return kExitConvergence;
    }
}
