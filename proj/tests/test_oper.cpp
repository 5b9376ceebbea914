#include <cmath>
#include <random>

#include "doctest.h"
#include "qkdv/errors.hpp"
#include "qkdv/oper.hpp"
#include "qkdv/params.hpp"

using namespace qkdv;

namespace {

StateSolution ground(double r1bar, double r2bar) {
    StateSolution s;
    s.params.k = -2.5;
    s.params.r1bar = r1bar;
    s.params.r2bar = r2bar;
    return s;
}

StateSolution random_state(std::mt19937_64& rng, int N) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    StateSolution s;
    s.N = N;
    s.params.k = -2.5 + 0.4 * u(rng);
    s.params.r1bar = {u(rng), u(rng)};
    s.params.r2bar = {u(rng), u(rng)};
    for (int j = 0; j < N; ++j) {
        s.w.emplace_back(3.0 * u(rng) + 4.0 * (j + 1), 3.0 * u(rng));
        s.a.emplace_back(u(rng), u(rng));
    }
    return s;
}

// Laurent coefficients of f around c by a discrete Cauchy integral on a circle of radius rho.
std::vector<cplx> cauchy_coeffs(const std::function<cplx(cplx)>& f, cplx c, double rho, int shift, int m_max) {
    constexpr int M = 128;
    std::vector<cplx> out(static_cast<std::size_t>(m_max + 1), 0.0);
    for (int s = 0; s < M; ++s) {
        const cplx e = std::polar(1.0, kTwoPi * s / M);
        const cplx x = rho * e;
        const cplx v = f(c + x);
        for (int j = 0; j <= m_max; ++j)
            out[static_cast<std::size_t>(j)] += v * std::pow(x, -(j - shift)) / static_cast<double>(M);
    }
    return out;
}

}  // namespace

TEST_CASE("potential values for the ground state") {
    StateSolution s = ground(0.0, 0.0);
    PotentialValues v = eval_potentials(s, 0.0, {1.0, 0.0});
    CHECK(std::abs(v.W1) < 1e-15);
    CHECK(std::abs(v.W2 - 1.0) < 1e-15);

    s = ground(1.0, 0.0);
    v = eval_potentials(s, 1.0, {1.0, 0.0});
    CHECK(std::abs(v.W1 - 1.0) < 1e-15);
    CHECK(std::abs(v.W2 - 2.0) < 1e-15);

    v = eval_potentials(s, 1.0, {1.0, kTwoPi});
    CHECK(std::abs(v.W2 - (1.0 + std::exp(kTwoPi * kI * -2.5))) < 1e-14);
    CHECK(std::abs(v.W2 - 0.0) < 1e-14);  // e^{-5 pi i} = -1
}

TEST_CASE("potential derivatives match finite differences") {
    std::mt19937_64 rng(1);
    const StateSolution s = random_state(rng, 2);
    const PotentialPair p = make_potentials(s, cplx(0.3, -0.2));
    const CoverPoint z{1.7, 0.4};
    const double h = 1e-5;
    const CoverPoint zp = offset_point(z, h), zm = offset_point(z, -h);
    const PotentialValues v = p.eval(z), vp = p.eval(zp), vm = p.eval(zm);
    CHECK(std::abs((vp.W1 - vm.W1) / (2 * h) - v.dW1) < 1e-7 * (1 + std::abs(v.dW1)));
    CHECK(std::abs((vp.W2 - vm.W2) / (2 * h) - v.dW2) < 1e-7 * (1 + std::abs(v.dW2)));
}

TEST_CASE("evaluation near a site is refused") {
    std::mt19937_64 rng(2);
    const StateSolution s = random_state(rng, 1);
    const CoverPoint near = CoverPoint::principal(s.w[0] + 1e-9);
    CHECK_THROWS_AS(eval_potentials(s, 0.0, near), Error);
}

TEST_CASE("Laurent data at a site") {
    StateSolution s;
    s.N = 1;
    s.params.k = -2.5;
    s.params.r1bar = 1.0;
    s.params.r2bar = 0.0;
    s.w = {-18.2321};
    s.a = {1.16089};
    const LaurentData d = laurent_at_w(s, 1, 6);
    CHECK(std::abs(d.q1[0] - 3.0) < 1e-14);
    CHECK(std::abs(d.q2[0] - 3.0) < 1e-14);
    CHECK(std::abs(d.q1[1] - (-2.5 / -18.2321)) < 1e-14);
    CHECK(std::abs(d.q1[2] - 3.5 / (18.2321 * 18.2321)) < 1e-14);
    CHECK(std::abs(d.q1[2] - 0.010529) < 1e-6);
    CHECK_THROWS_AS(laurent_at_w(s, 2, 6), Error);
    CHECK_THROWS_AS(laurent_at_w(s, 1, 3), Error);
}

TEST_CASE("Laurent data matches the closed forms for m <= 4") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const StateSolution s = random_state(rng, 3);
        const double k = s.params.k;
        const cplx r1 = s.params.r1bar, r2 = s.params.r2bar;
        for (int ell = 1; ell <= s.N; ++ell) {
            const auto L = static_cast<std::size_t>(ell - 1);
            const cplx w = s.w[L], a = s.a[L], a22 = a22_at(s, ell);
            cplx q12 = (r1 - k) / (w * w), q13 = (k - 2.0 * r1) / (w * w * w), q14 = (3.0 * r1 - k) / std::pow(w, 4);
            cplx q23 = (r2 + a - 2.0 * a22 + w) / (w * w * w);
            cplx q24 = (3.0 * a22 - a - 3.0 * r2 - 2.0 * w) / std::pow(w, 4);
            for (int j = 1; j <= s.N; ++j) {
                if (j == ell) continue;
                const auto J = static_cast<std::size_t>(j - 1);
                const cplx d = w - s.w[J], aj = s.a[J], bj = a22_at(s, j);
                q12 += 3.0 / (d * d) + k / (w * d);
                q13 -= 6.0 / (d * d * d) + k / (w * d * d) + k / (w * w * d);
                q14 += 9.0 / std::pow(d, 4) + k / (w * d * d * d) + k / (w * w * d * d) + k / (w * w * w * d);
                q23 += 3.0 / (d * d * d) + aj / (w * d * d) + bj / (w * w * d);
                q24 -= 9.0 / std::pow(d, 4) + 2.0 * aj / (w * d * d * d) + (aj + bj) / (w * w * d * d) +
                       2.0 * bj / (w * w * w * d);
            }
            const LaurentData D = laurent_at_w(s, ell, 6);
            CHECK(std::abs(D.q1[1] - k / w) < 1e-12);
            CHECK(std::abs(D.q2[1] - a / w) < 1e-12);
            CHECK(std::abs(D.q2[2] - (a22 - a) / (w * w)) < 1e-12);
            CHECK(std::abs(D.q1[2] - q12) < 1e-12);
            CHECK(std::abs(D.q1[3] - q13) < 1e-12);
            CHECK(std::abs(D.q1[4] - q14) < 1e-12);
            CHECK(std::abs(D.q2[3] - q23) < 1e-12);
            CHECK(std::abs(D.q2[4] - q24) < 1e-12);
            const CoverPoint wc = CoverPoint::principal(w);
            CHECK(std::abs(D.q2_lambda[3] - cover_pow(wc, k)) < 1e-14);
            CHECK(std::abs(D.q2_lambda[4] - k * cover_pow(wc, k - 1)) < 1e-14);
        }
    }
}

TEST_CASE("Laurent data matches Cauchy integrals of the potentials") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const StateSolution s = random_state(rng, 2);
        const RationalPotential w1 = state_w1(s), w2 = state_w2(s);
        for (int ell = 1; ell <= s.N; ++ell) {
            const cplx w = s.w[static_cast<std::size_t>(ell - 1)];
            const double rho = 0.25 * std::min(std::abs(w), std::abs(s.w[0] - s.w[1]));
            const LaurentData D = laurent_at_w(s, ell, 4);
            const auto c1 = cauchy_coeffs([&](cplx z) { return w1.eval(z); }, w, rho, 2, 4);
            const auto c2 = cauchy_coeffs([&](cplx z) { return w2.eval(z); }, w, rho, 3, 4);
            for (std::size_t m = 0; m <= 4; ++m) {
                CHECK(std::abs(D.q1[m] - c1[m]) < 1e-8 * (1 + std::abs(c1[m])));
                CHECK(std::abs(D.q2[m] - c2[m]) < 1e-8 * (1 + std::abs(c2[m])));
            }
        }
        const double rho0 = 0.25 * std::min(std::abs(s.w[0]), std::abs(s.w[1]));
        const LaurentData Z = laurent_at_zero(s, 6);
        const auto z1 = cauchy_coeffs([&](cplx z) { return w1.eval(z); }, 0.0, rho0, 2, 6);
        const auto z2 = cauchy_coeffs([&](cplx z) { return w2.eval(z); }, 0.0, rho0, 3, 6);
        for (std::size_t m = 0; m <= 6; ++m) {
            CHECK(std::abs(Z.q1[m] - z1[m]) < 1e-8 * (1 + std::abs(z1[m])));
            CHECK(std::abs(Z.q2[m] - z2[m]) < 1e-8 * (1 + std::abs(z2[m])));
        }
    }
}

TEST_CASE("Laurent data at zero for the ground state") {
    const LaurentData Z = laurent_at_zero(ground(1.0, 0.5), 4);
    CHECK(std::abs(Z.q1[0] - 1.0) < 1e-15);
    CHECK(std::abs(Z.q2[0] - 0.5) < 1e-15);
    CHECK(std::abs(Z.q2[1] - 1.0) < 1e-15);
    for (std::size_t m = 1; m <= 4; ++m) CHECK(std::abs(Z.q1[m]) == 0.0);
}

TEST_CASE("expansion at infinity") {
    std::mt19937_64 rng(8);
    const StateSolution s = random_state(rng, 2);
    const RationalPotential w2 = state_w2(s);
    const auto c = w2.expand_at_infinity(30);
    const cplx z = 80.0 * std::polar(1.0, 0.3);
    cplx sum = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) sum += c[j] * std::pow(z, -static_cast<double>(j));
    CHECK(std::abs(sum - w2.eval(z)) < 1e-12 * std::abs(w2.eval(z)) + 1e-20);
}

TEST_CASE("adjoint is an involution and flips a constant potential") {
    PotentialPair p;
    p.w2.terms.push_back({cplx(2.0, 1.0), 0, {}, 0});
    const PotentialPair q = adjoint(p);
    CHECK(std::abs(q.w2.eval(1.3) + cplx(2.0, 1.0)) < 1e-15);

    std::mt19937_64 rng(10);
    const StateSolution s = random_state(rng, 2);
    const PotentialPair a = make_potentials(s, cplx(0.4, 0.1));
    const PotentialPair aa = adjoint(adjoint(a));
    const CoverPoint z{1.3, 0.7};
    const PotentialValues v = a.eval(z), vv = aa.eval(z);
    CHECK(std::abs(v.W1 - vv.W1) < 1e-13);
    CHECK(std::abs(v.W2 - vv.W2) < 1e-13);
}

TEST_CASE("the Wronskian of two solutions solves the adjoint equation") {
    std::mt19937_64 rng(12);
    const StateSolution s = random_state(rng, 1);
    const cplx lam(0.3, 0.2);
    const PotentialPair p = make_potentials(s, lam);
    const PotentialPair adj = adjoint(p);
    ArithConfig cfg;
    const auto path = radial_path(1.0, 2.0, 0.3);
    const JetValue f0{1.0, 0.0, 0.0}, g0{0.0, 1.0, 0.5};
    const JetValue f1 = integrate_ode(p.rhs(), f0, path, cfg);
    const JetValue g1 = integrate_ode(p.rhs(), g0, path, cfg);
    const auto wr = [&](const JetValue& f, const JetValue& g, const CoverPoint& z) {
        const cplx W1 = p.eval(z).W1;
        const cplx h = f.value * g.d1 - f.d1 * g.value;
        return JetValue{h, f.value * g.d2 - f.d2 * g.value, f.d1 * g.d2 - f.d2 * g.d1 + W1 * h};
    };
    const JetValue h0 = wr(f0, g0, path.start), h1 = wr(f1, g1, path.end);
    const JetValue h1_adj = integrate_ode(adj.rhs(), h0, path, cfg);
    CHECK((h1_adj - h1).norm_inf() < 1e-6 * h1.norm_inf());
    // The primal equation does not transport the Wronskian.
    const JetValue h1_primal = integrate_ode(p.rhs(), h0, path, cfg);
    CHECK((h1_primal - h1).norm_inf() > 1e-3 * h1.norm_inf());
}

TEST_CASE("twist by a full turn is the identity") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const StateSolution s = random_state(rng, 2);
    const PotentialPair p = make_potentials(s, cplx(0.7, -0.3));
    const PotentialPair t0 = twist_potentials(p, 0.0);
    const PotentialPair t1 = twist_potentials(p, 1.0);
    for (int i = 0; i < 20; ++i) {
        const CoverPoint z{0.5 + 2.0 * (u(rng) + 1.0), 3.0 * u(rng)};
        const PotentialValues v = p.eval(z), a = t0.eval(z), b = t1.eval(z);
        CHECK(std::abs(v.W1 - a.W1) <= 1e-12 * std::abs(v.W1));
        CHECK(std::abs(v.W2 - a.W2) <= 1e-12 * std::abs(v.W2));
        CHECK(std::abs(v.W1 - b.W1) <= 1e-12 * std::abs(v.W1));
        CHECK(std::abs(v.W2 - b.W2) <= 1e-12 * std::abs(v.W2));
        CHECK(std::abs(v.dW2 - b.dW2) <= 1e-12 * std::abs(v.dW2));
    }
}

TEST_CASE("half twist of the ground state") {
    const StateSolution s = ground(0.4, -0.3);
    const cplx lam = 0.8;
    const PotentialPair half = twist_potentials(make_potentials(s, lam), 0.5);
    const double khat = s.params.khat();
    for (double arg : {0.0, 0.5, -1.0}) {
        const CoverPoint z{1.3, arg};
        const CoverPoint zr = rotate(z, 0.5);
        const cplx zm = zr.project();
        const cplx lam_r = std::polar(1.0, kPi * khat) * lam;
        const cplx W2_rot = s.params.r2bar / (zm * zm * zm) + 1.0 / (zm * zm) + lam_r * cover_pow(zr, s.params.k);
        CHECK(std::abs(half.eval(z).W2 - (-W2_rot)) < 1e-13);
        CHECK(std::abs(half.eval(z).W1 - s.params.r1bar / (zm * zm)) < 1e-13);
    }
}

TEST_CASE("dual equation is the adjoint pulled back by a half turn") {
    std::mt19937_64 rng(16);
    const StateSolution s = random_state(rng, 2);
    const cplx lam(0.5, 0.25);
    const double khat = s.params.khat();
    const PotentialPair dual = dual_potentials(s, lam);
    const PotentialPair prim = make_potentials(s, std::polar(1.0, kPi * khat) * lam);
    const CoverPoint z{1.1, 0.2};
    const CoverPoint zr = rotate(z, 0.5);
    const PotentialValues d = dual.eval(z), v = prim.eval(zr);
    CHECK(std::abs(d.W1 - v.W1) < 1e-13);
    CHECK(std::abs(d.W2 - (v.W2 + v.dW1)) < 1e-12);
}

TEST_CASE("indicial polynomials follow from the leading Laurent data at zero") {
    std::mt19937_64 rng(17);
    const StateSolution s = random_state(rng, 2);
    const IndicialPolys polys = indicial_polys(s.params);
    // beta(beta-1)(beta-2) - c1 beta + c2 for leading coefficients c1/z^2, c2/z^3.
    const auto check = [&](const PotentialPair& pp, const CubicCoeffs& expect) {
        const auto v1 = [&](cplx z) { return pp.eval(CoverPoint::principal(z)).W1; };
        const auto v2 = [&](cplx z) { return pp.eval(CoverPoint::principal(z)).W2; };
        const cplx c1 = cauchy_coeffs(v1, 0.0, 0.5, 2, 0)[0];
        const cplx c2 = cauchy_coeffs(v2, 0.0, 0.5, 3, 0)[0];
        CHECK(std::abs(expect.a2 + 3.0) < 1e-12);
        CHECK(std::abs(expect.a1 - (2.0 - c1)) < 1e-10);
        CHECK(std::abs(expect.a0 - c2) < 1e-10);
    };
    check(make_potentials(s, 0.0), polys.primal);
    check(dual_potentials(s, 0.0), polys.dual);
}

TEST_CASE("singularity classification") {
    std::mt19937_64 rng(18);
    const StateSolution s = random_state(rng, 2);
    const auto zero = classify_singularity(s, SingularSite::Zero);
    CHECK(zero.regular);
    CHECK(zero.delta1 == 2.0);
    CHECK(zero.delta2 == 3.0);
    const auto inf = classify_singularity(ground(1.0, 0.0), SingularSite::Infinity);
    CHECK_FALSE(inf.regular);
    CHECK(inf.slope == doctest::Approx(4.0 / 3.0));
    CHECK_FALSE(inf.location.has_value());
    const auto inf2 = classify_singularity(s, SingularSite::Infinity);
    CHECK(inf2.slope == doctest::Approx(4.0 / 3.0));
    for (int ell = 1; ell <= 2; ++ell) {
        const auto site = classify_singularity(s, SingularSite::Site, ell);
        CHECK(site.regular);
        CHECK(site.delta1 == 2.0);
        CHECK(site.delta2 == 3.0);
    }
    CHECK_THROWS_AS(classify_singularity(s, SingularSite::Site, 3), Error);
}

TEST_CASE("invalid states are rejected") {
    StateSolution s = ground(1.0, 0.0);
    s.N = 2;
    s.w = {1.0, 1.0};
    s.a = {0.0, 0.0};
    CHECK_THROWS_AS(s.validate(), Error);
    s.w = {0.0, 1.0};
    CHECK_THROWS_AS(s.validate(), Error);
}
