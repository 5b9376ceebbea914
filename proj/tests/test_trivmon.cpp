#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "qkdv/errors.hpp"
#include "qkdv/params.hpp"
#include "qkdv/trivmon.hpp"

using namespace qkdv;

namespace {

OperParams desk() {
    OperParams p;
    p.k = -2.5;
    p.r1bar = 1.0;
    p.r2bar = 0.0;
    return p;
}

std::vector<cplx> cauchy_coeffs(const std::function<cplx(cplx)>& f, cplx c, double rho, int shift, int m_max) {
    constexpr int M = 128;
    std::vector<cplx> out(static_cast<std::size_t>(m_max + 1), 0.0);
    for (int s = 0; s < M; ++s) {
        const cplx x = rho * std::polar(1.0, kTwoPi * s / M);
        const cplx v = f(c + x);
        for (int j = 0; j <= m_max; ++j)
            out[static_cast<std::size_t>(j)] += v * std::pow(x, shift - j) / static_cast<double>(M);
    }
    return out;
}

// Constant part of the fourth-order local constraint at site ell, times w^4,
// computed from contour-integral Laurent coefficients of the lambda = 0 oper.
cplx constraint3_scaled(const StateSolution& s, int ell) {
    const PotentialPair pp = make_potentials(s, 0.0);
    const cplx w = s.w[static_cast<std::size_t>(ell - 1)];
    double rho = 0.5 * std::abs(w);
    for (int j = 0; j < s.N; ++j)
        if (j != ell - 1) rho = std::min(rho, 0.5 * std::abs(w - s.w[static_cast<std::size_t>(j)]));
    const auto W1 = [&](cplx z) { return pp.eval(CoverPoint::principal(z)).W1; };
    const auto W2 = [&](cplx z) { return pp.eval(CoverPoint::principal(z)).W2; };
    const auto q1 = cauchy_coeffs(W1, w, rho, 2, 4);
    const auto q2 = cauchy_coeffs(W2, w, rho, 3, 4);
    const cplx q11 = q1[1], q21 = q2[1];
    const cplx c3 = q1[4] + q2[4] -
                    (q1[3] * (2.0 * q11 - q21) / 3.0 + q11 * q2[3] +
                     q11 * (2.0 * q11 - q21) * (q11 - 2.0 * q21) * (q11 + q21) / 27.0);
    return c3 * std::pow(w, 4);
}

// Root of the quadratic equation at site 0 for the given other sites.
cplx solve_quadratic_site(std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p, int root) {
    const double k = p.k;
    cplx rhs = 0.0;
    for (std::size_t j = 1; j < w.size(); ++j) {
        const cplx x = w[0] / (w[0] - w[j]);
        rhs += 9.0 * x * x + 3.0 * k * x;
    }
    const cplx c0 = k * k + 3.0 * k - 3.0 * p.r1bar - rhs;
    const cplx sq = std::sqrt(k * k - 4.0 * c0);
    a[0] = (k + (root == 0 ? 1.0 : -1.0) * sq) / 2.0;
    return a[0];
}

StateSolution state_of(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p) {
    StateSolution s;
    s.N = static_cast<int>(a.size());
    s.a = a;
    s.w = w;
    s.params = p;
    return s;
}

}  // namespace

TEST_CASE("residuals: small examples") {
    const OperParams p = desk();
    CHECK(residuals({}, {}, p).F.empty());
    const ResidualVector r = residuals({0.0}, {1.0}, p);
    CHECK(std::abs(r.F[0] - (-4.25)) < 1e-14);
    CHECK_THROWS_AS(residuals({0.0, 1.0}, {1.0, 1.0}, p), Error);
    CHECK_THROWS_AS(residuals({0.0}, {0.0}, p), Error);
    CHECK_THROWS_AS(residuals({0.0}, {1.0, 2.0}, p), Error);
}

TEST_CASE("printed constants A and B") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        OperParams p;
        p.k = -2.5 + 0.4 * u(rng);
        p.r1bar = {u(rng), u(rng)};
        p.r2bar = {u(rng), u(rng)};
        const double k = p.k;
        const cplx A = 14.0 * k * k + 50.0 * k - 8.0 * p.r1bar + 45.0;
        const cplx B = 27.0 * (p.r1bar - p.r2bar) - k * (7.0 * k * k + 7.0 * k + 9.0 * p.r2bar - 13.0 * p.r1bar + 9.0);
        CHECK(std::abs(residual_A(p, MonodromySystem::Printed) - A) < 1e-13);
        CHECK(std::abs(residual_B(p, MonodromySystem::Printed) - B) < 1e-13);
    }
}

TEST_CASE("cubic equations equal the local fourth-order constraint") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int N = 1; N <= 3; ++N) {
        for (int t = 0; t < 4; ++t) {
            OperParams p;
            p.k = -2.5 + 0.4 * u(rng);
            p.r1bar = {u(rng), u(rng)};
            p.r2bar = {u(rng), u(rng)};
            std::vector<cplx> a(static_cast<std::size_t>(N)), w(static_cast<std::size_t>(N));
            for (int j = 0; j < N; ++j) {
                w[static_cast<std::size_t>(j)] = std::polar(1.0 + j, kTwoPi * (0.1 + 0.3 * j) + 0.2 * u(rng));
                a[static_cast<std::size_t>(j)] = {2.0 * u(rng), 2.0 * u(rng)};
            }
            solve_quadratic_site(a, w, p, t % 2);
            const ResidualVector r = residuals(a, w, p);
            REQUIRE(std::abs(r.F[0]) < 1e-12);
            const cplx oracle = 9.0 * constraint3_scaled(state_of(a, w, p), 1);
            CHECK(std::abs(r.F[static_cast<std::size_t>(N)] - oracle) < 1e-9 * std::max(1.0, std::abs(oracle)));
        }
    }
}

TEST_CASE("jacobian against central differences") {
    const OperParams p = desk();
    const auto J1 = jacobian({0.3}, {-1.2}, p);
    CHECK(std::abs(J1(0, 0) - (2.0 * 0.3 + 2.5)) < 1e-14);
    CHECK(std::abs(J1(0, 1)) < 1e-14);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto sys : {MonodromySystem::Local, MonodromySystem::Printed}) {
        for (int N = 2; N <= 3; ++N) {
            std::vector<cplx> a, w;
            for (int j = 0; j < N; ++j) {
                a.emplace_back(u(rng), u(rng));
                w.push_back(std::polar(1.0 + 0.5 * j, 2.0 * j + 0.3 * u(rng)));
            }
            const Eigen::MatrixXcd J = jacobian(a, w, p, sys);
            const double h = 1e-6;
            double worst = 0.0;
            for (int c = 0; c < 2 * N; ++c) {
                for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
                    auto ap = a, am = a, wp = w, wm = w;
                    auto& vp = c < N ? ap[static_cast<std::size_t>(c)] : wp[static_cast<std::size_t>(c - N)];
                    auto& vm = c < N ? am[static_cast<std::size_t>(c)] : wm[static_cast<std::size_t>(c - N)];
                    vp += h * dir;
                    vm -= h * dir;
                    const auto Fp = residuals(ap, wp, p, sys).F, Fm = residuals(am, wm, p, sys).F;
                    for (int r = 0; r < 2 * N; ++r) {
                        const cplx fd = (Fp[static_cast<std::size_t>(r)] - Fm[static_cast<std::size_t>(r)]) / (2.0 * h);
                        // Holomorphic: the derivative along i equals i times the derivative along 1.
                        worst = std::max(worst, std::abs(fd - J(r, c) * dir) / std::max(1.0, std::abs(J(r, c))));
                    }
                }
            }
            CHECK(worst < 1e-5);
        }
    }
}

TEST_CASE("N=1 closed form") {
    const OperParams p = desk();
    const auto sols = solve_n1_closed_form(p);
    CHECK(sols[0].a[0].real() == doctest::Approx(1.16091269).epsilon(1e-8));
    CHECK(sols[1].a[0].real() == doctest::Approx(-3.66091269).epsilon(1e-8));
    CHECK(sols[0].w[0].real() == doctest::Approx(-0.06242284).epsilon(1e-7));
    CHECK(sols[1].w[0].real() == doctest::Approx(-1.93757716).epsilon(1e-7));
    for (const auto& s : sols) {
        CHECK(s.residual_norm < 1e-10);
        CHECK(std::abs(s.w[0].imag()) < 1e-14);
    }
    CHECK(static_cast<int>(sols.size()) == p2_count(1));

    const auto printed = solve_n1_closed_form(p, MonodromySystem::Printed);
    CHECK(printed[0].w[0].real() == doctest::Approx(-18.2321).epsilon(1e-5));
    CHECK(printed[1].w[0].real() == doctest::Approx(-18.7679).epsilon(1e-5));

    OperParams degenerate = p;
    degenerate.r1bar = (3.0 * p.k * p.k + 12.0 * p.k) / 12.0;
    CHECK_THROWS_AS(solve_n1_closed_form(degenerate), Error);
}

TEST_CASE("Newton enumeration for N=1") {
    const OperParams p = desk();
    SolverConfig cfg;
    cfg.n_seeds = 50;
    const auto found = newton_solve(1, p, cfg);
    const auto exact = solve_n1_closed_form(p);
    REQUIRE(found.size() == 2);
    for (const auto& e : exact) {
        double best = 1e300;
        for (const auto& f : found) best = std::min(best, solution_distance(e, f));
        CHECK(best < 1e-10);
    }
    for (const auto& f : found) CHECK(residuals(f.a, f.w, p).norm_inf() < cfg.newton_tol);

    std::vector<cplx> a = exact[0].a, w = exact[0].w;
    int iterations = -1;
    REQUIRE(newton_refine(a, w, p, cfg, &iterations));
    CHECK(iterations <= 2);
}

TEST_CASE("Newton enumeration is deterministic and thread independent") {
    const OperParams p = desk();
    SolverConfig cfg;
    cfg.n_seeds = 120;
    cfg.threads = 1;
    const auto one = newton_solve(2, p, cfg);
    cfg.threads = 3;
    const auto three = newton_solve(2, p, cfg);
    REQUIRE(one.size() == three.size());
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(solution_distance(one[i], three[i]) == 0.0);
}

TEST_CASE("solver configuration validation") {
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dedup_tol = cfg.newton_tol / 2.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SolverConfig{};
    cfg.damping = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_THROWS_AS(newton_solve(0, desk(), SolverConfig{}), Error);
}

TEST_CASE("solution distance is permutation invariant") {
    StateSolution x = state_of({1.0, 2.0}, {3.0, 4.0}, desk());
    StateSolution y = state_of({2.0, 1.0}, {4.0, 3.0}, desk());
    CHECK(solution_distance(x, y) == 0.0);
    y.a[0] += 1e-3;
    CHECK(solution_distance(x, y) == doctest::Approx(1e-3));
}

TEST_CASE("Frobenius certificate") {
    const OperParams p = desk();
    for (const auto& s : solve_n1_closed_form(p)) {
        for (const cplx lam : {cplx(0.0), cplx(1.0), cplx(-0.3, 0.8)}) {
            const auto c = frobenius_certificate(s, 1, lam);
            CHECK(c.max_constraint() < 1e-9);
            CHECK(c.passed());
        }
        StateSolution bad = s;
        bad.a[0] += 1e-3;
        const auto c = frobenius_certificate(bad, 1, 0.5);
        CHECK(c.finda21 > 1e-5);
        CHECK(c.finda21 < 1e-1);
        CHECK(c.constraint3_lambda < 1e-12);
        CHECK_FALSE(c.passed());
        CHECK_FALSE(c.recursion_ok[2]);
    }
    for (const auto& s : solve_n1_closed_form(p, MonodromySystem::Printed)) {
        const auto c = frobenius_certificate(s, 1, 0.5);
        CHECK(c.finda21 < 1e-9);
        CHECK(c.constraint3_const > 1e-2);
        CHECK_FALSE(c.passed());
    }
}

TEST_CASE("numeric monodromy") {
    const OperParams p = desk();
    for (const auto& s : solve_n1_closed_form(p)) {
        for (const cplx lam : {cplx(0.0), cplx(1.0)}) {
            const auto M = numeric_monodromy(s, 1, lam);
            CHECK(M.deviation < 1e-6);
            CHECK(std::abs(M.determinant - 1.0) < 1e-6);
        }
    }
    StateSolution junk = state_of({0.7}, {cplx(-1.0, 0.5)}, p);
    const auto M = numeric_monodromy(junk, 1, 0.5);
    CHECK(M.deviation > 1e-2);
    CHECK(std::abs(M.determinant - 1.0) < 1e-6);
    for (const auto& s : solve_n1_closed_form(p, MonodromySystem::Printed))
        CHECK(numeric_monodromy(s, 1, 0.5).deviation > 1e-2);
    StateSolution g = junk;
    g.N = 0;
    g.a.clear();
    g.w.clear();
    CHECK_THROWS_AS(numeric_monodromy(g, 1, 0.5), Error);
}
