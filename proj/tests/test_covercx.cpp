#include <cmath>
#include <random>

#include "doctest.h"
#include "qkdv/covercx.hpp"
#include "qkdv/errors.hpp"

using namespace qkdv;

namespace {
const LinearRhs kZero = [](const CoverPoint&) { return ThirdOrderCoeffs{}; };
const LinearRhs kExp = [](const CoverPoint&) { return ThirdOrderCoeffs{0.0, 1.0}; };

double jet_dist(const JetValue& a, const JetValue& b) { return (a - b).norm_inf(); }
}  // namespace

TEST_CASE("cover_pow follows the unreduced argument") {
    CHECK(std::abs(cover_pow({1.0, 0.0}, cplx(0.3, -1.7)) - 1.0) < 1e-15);
    CHECK(std::abs(cover_pow({1.0, kTwoPi}, 0.5) + 1.0) < 1e-15);
    CHECK(std::abs(cover_pow({4.0, 0.0}, 0.5) - 2.0) < 1e-15);
    CHECK_THROWS_AS(cover_pow({0.0, 0.0}, 0.5), Error);
    CHECK_THROWS_AS(CoverPoint(-1.0, 0.0), Error);
}

TEST_CASE("cover_pow is additive in the exponent") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const CoverPoint z{std::exp(u(rng)), 4.0 * u(rng)};
        const cplx a(u(rng), u(rng)), b(u(rng), u(rng));
        const cplx lhs = cover_pow(z, a) * cover_pow(z, b);
        const cplx rhs = cover_pow(z, a + b);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
    }
}

TEST_CASE("rotate adds whole turns") {
    const CoverPoint z{1.0, 0.0};
    CHECK(rotate(z, 0.5).arg == doctest::Approx(kPi));
    CHECK(rotate(z, 1.0).arg == doctest::Approx(kTwoPi));
    const CoverPoint back = rotate(rotate({2.5, 0.3}, 0.5), -0.5);
    CHECK(back.modulus == 2.5);
    CHECK(back.arg == doctest::Approx(0.3));
}

TEST_CASE("offset_point stays on the sheet of its centre") {
    const CoverPoint c{2.0, 3.0 * kPi};
    const CoverPoint p = offset_point(c, cplx(0.0, 0.5));
    CHECK(std::abs(p.project() - (c.project() + cplx(0.0, 0.5))) < 1e-14);
    CHECK(std::abs(p.arg - 3.0 * kPi) < 0.5);
}

TEST_CASE("integrate_ode on polynomial and exponential solutions") {
    ArithConfig cfg;
    CHECK(jet_dist(integrate_ode(kZero, {1, 0, 0}, radial_path(1, 2), cfg), {1, 0, 0}) < 1e-13);
    CHECK(jet_dist(integrate_ode(kZero, {0, 1, 0}, radial_path(1, 2), cfg), {1, 1, 0}) < 1e-13);
    const JetValue e = integrate_ode(kExp, {1, 1, 1}, radial_path(0, 1), cfg);
    const double ee = std::exp(1.0);
    CHECK(jet_dist(e, {ee, ee, ee}) < 1e-11 * ee);
}

TEST_CASE("integrate_ode along arcs matches the exact exponential") {
    ArithConfig cfg;
    // Psi = exp(z) with jet (e^z, e^z, e^z).
    const ODEPath arc = arc_path(1.5, 0.0, kPi);
    const cplx z0 = 1.5, z1 = -1.5;
    const JetValue out = integrate_ode(kExp, JetValue{1, 1, 1} * std::exp(z0), arc, cfg);
    const cplx ex = std::exp(z1);
    CHECK(jet_dist(out, {ex, ex, ex}) < 1e-10);
}

TEST_CASE("reversal and step-hint invariance") {
    ArithConfig cfg;
    const LinearRhs rhs = [](const CoverPoint& z) {
        const cplx w = z.project();
        return ThirdOrderCoeffs{1.0 / (w * w), cplx(0.3, 0.1) / w + cover_pow(z, -2.5)};
    };
    const JetValue init{cplx(1.0, 0.2), cplx(-0.5, 0.0), cplx(0.1, 0.3)};
    const JetValue fwd = integrate_ode(rhs, init, radial_path(1.0, 3.0, 0.4), cfg);
    const JetValue back = integrate_ode(rhs, fwd, radial_path(3.0, 1.0, 0.4), cfg);
    CHECK(jet_dist(back, init) < 10 * cfg.rel_tol * 10);
    const JetValue fwd2 = integrate_ode(rhs, init, radial_path(1.0, 3.0, 0.4, 32), cfg);
    CHECK(jet_dist(fwd, fwd2) < 10 * cfg.rel_tol * fwd.norm_inf() * 10);
}

TEST_CASE("extended precision transport agrees with double") {
    ArithConfig cfg;
    ArithConfig ext = cfg;
    ext.precision_mode = PrecisionMode::Extended;
    const JetValue a = integrate_ode(kExp, {1, 1, 1}, radial_path(0, 1), cfg);
    const JetValue b = integrate_ode(kExp, {1, 1, 1}, radial_path(0, 1), ext);
    CHECK(jet_dist(a, b) < 1e-11);
}

TEST_CASE("integration through a pole reports a singularity") {
    ArithConfig cfg;
    const LinearRhs pole = [](const CoverPoint& z) {
        const cplx d = z.project() - 1.0;
        return ThirdOrderCoeffs{0.0, 1.0 / (d * d * d * d)};
    };
    CHECK_THROWS_AS(integrate_ode(pole, {1, 0, 0}, radial_path(0.5, 1.5), cfg), Error);
}

TEST_CASE("invalid paths and tolerances are rejected") {
    ArithConfig bad;
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(integrate_ode(kZero, {1, 0, 0}, radial_path(1, 2), bad), Error);
    ODEPath arc = arc_path(1.0, 0.0, 1.0);
    arc.end.modulus = 2.0;
    CHECK_THROWS_AS(integrate_ode(kZero, {1, 0, 0}, arc, ArithConfig{}), Error);
}
