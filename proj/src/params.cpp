#include "qkdv/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "qkdv/errors.hpp"

namespace qkdv {

void OperParams::validate() const {
    if (!(k > -3.0 && k < -2.0))
        throw Error(ErrorKind::Domain, "k must lie in (-3, -2)");
}

WeylElement WeylElement::identity() { return {{1, 2, 3}, 1}; }
WeylElement WeylElement::sigma() { return {{3, 2, 1}, -1}; }
WeylElement WeylElement::tau() { return {{2, 3, 1}, 1}; }

WeylElement WeylElement::compose(const WeylElement& inner) const {
    WeylElement out;
    for (int i = 1; i <= 3; ++i) out.perm[static_cast<std::size_t>(i - 1)] = (*this)(inner(i));
    out.parity = parity * inner.parity;
    return out;
}

std::array<WeylElement, 6> WeylElement::all() {
    const auto id = identity();
    const auto t = tau();
    const auto t2 = t.compose(t);
    const auto s = sigma();
    return {id, t, t2, s, s.compose(t), s.compose(t2)};
}

namespace {
constexpr std::array<const char*, 6> kWeylNames{"id", "tau", "tau2", "sigma", "sigma_tau", "sigma_tau2"};
}

const char* weyl_name(const WeylElement& s) {
    const auto all = WeylElement::all();
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i] == s) return kWeylNames[i];
    return "?";
}

std::optional<WeylElement> weyl_from_name(const char* name) {
    const auto all = WeylElement::all();
    for (std::size_t i = 0; i < all.size(); ++i)
        if (std::strcmp(kWeylNames[i], name) == 0) return all[i];
    return std::nullopt;
}

CFTParams oper_to_cft(const OperParams& p) {
    p.validate();
    const double k = p.k;
    const double g = k + 3.0;
    CFTParams out;
    out.c = -2.0 * (4.0 * k + 9.0) * (3.0 * k + 5.0) / g;
    // (r1bar - 8)k^2 + 6(r1bar - 5)k + 9 r1bar - 27 rewritten in g to avoid cancellation near k = -3.
    out.delta2 = (p.r1bar * g * g - (8.0 * g * g - 18.0 * g + 9.0)) / (9.0 * g);
    out.delta3 = std::pow(g, 1.5) / 27.0 * (p.r1bar - p.r2bar);
    const double gam = std::tgamma(p.khat());
    const cplx mu3 = p.lambda / (-kI * gam * gam * gam);
    out.mu = mu3 == cplx{} ? cplx{} : std::pow(mu3, 1.0 / 3.0);
    return out;
}

double k_from_central_charge(cplx c) {
    // c = 50 - 24 (g + 1/g) with g = k + 3 in (0, 1).
    const double s = (50.0 - c.real()) / 24.0;
    if (std::abs(c.imag()) > 1e-12 || s < 2.0)
        throw Error(ErrorKind::Domain, "central charge outside the k in (-3,-2) branch");
    const double g = (s - std::sqrt(s * s - 4.0)) / 2.0;
    return g - 3.0;
}

OperParams cft_to_oper(const CFTParams& c, double k) {
    OperParams p;
    p.k = k;
    p.validate();
    const double g = k + 3.0;
    p.r1bar = (9.0 * g * c.delta2 + (8.0 * g * g - 18.0 * g + 9.0)) / (g * g);
    p.r2bar = p.r1bar - 27.0 * c.delta3 / std::pow(g, 1.5);
    const double gam = std::tgamma(p.khat());
    p.lambda = -kI * gam * gam * gam * c.mu * c.mu * c.mu;
    return p;
}

std::pair<cplx, cplx> r_to_rbar(const RPair& r) {
    const cplx a = r.r1, b = r.r2;
    return {a * a - a * b + b * b - a - b, a * b * (a - b) + b * (2.0 * b - a - 2.0)};
}

std::array<cplx, 3> cubic_roots(const CubicCoeffs& c) {
    // Depressed cubic x = y - a2/3: y^3 + p y + q = 0.
    const cplx a2 = c.a2, a1 = c.a1, a0 = c.a0;
    const cplx p = a1 - a2 * a2 / 3.0;
    const cplx q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    const cplx disc = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
    cplx u3 = -q / 2.0 + disc;
    if (std::abs(-q / 2.0 - disc) > std::abs(u3)) u3 = -q / 2.0 - disc;
    std::array<cplx, 3> roots;
    const cplx omega = std::polar(1.0, kTwoPi / 3.0);
    if (std::abs(u3) == 0.0) {
        roots.fill(-a2 / 3.0);
    } else {
        cplx u = std::pow(u3, 1.0 / 3.0);
        for (auto& r : roots) {
            r = u - p / (3.0 * u) - a2 / 3.0;
            u *= omega;
        }
    }
    for (auto& r : roots) {
        for (int it = 0; it < 3; ++it) {
            const cplx f = c.eval(r);
            const cplx df = (3.0 * r + 2.0 * a2) * r + a1;
            if (std::abs(df) < 1e-300) break;
            const cplx step = f / df;
            r -= step;
            if (std::abs(step) < 1e-16 * (1.0 + std::abs(r))) break;
        }
    }
    return roots;
}

RPair rbar_to_r(cplx r1bar, cplx r2bar) {
    auto roots = cubic_roots({-3.0, 2.0 - r1bar, r2bar});
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    // b1 = r2, b3 = 2 - r1.
    return {2.0 - roots[2], roots[0]};
}

RPair dot_action(WeylGenerator g, const RPair& r) {
    if (g == WeylGenerator::Sigma) return {-r.r2 + 2.0, -r.r1 + 2.0};
    return {-r.r2 + 2.0, r.r1 - r.r2 + 1.0};
}

RPair dot_action(const WeylElement& s, const RPair& r) {
    const Indices idx = indices_from_r(r);
    const auto b = [&](int i) { return idx.beta[static_cast<std::size_t>(s(i) - 1)]; };
    return {2.0 - b(3), b(1)};
}

Indices indices_from_r(const RPair& r) {
    Indices idx;
    idx.beta = {r.r2, r.r1 - r.r2 + 1.0, -r.r1 + 2.0};
    idx.beta_star = {-r.r2 + 2.0, r.r2 - r.r1 + 1.0, r.r1};
    return idx;
}

IndicialPolys indicial_polys(const OperParams& p) {
    IndicialPolys out;
    out.primal = {-3.0, 2.0 - p.r1bar, p.r2bar};
    out.dual = {-3.0, 2.0 - p.r1bar, 2.0 * p.r1bar - p.r2bar};
    return out;
}

std::pair<cplx, cplx> sector_phases(const WeylElement& s, const Indices& idx) {
    const auto b = [&](int i) { return idx.beta[static_cast<std::size_t>(s(i) - 1)]; };
    const auto bs = [&](int i) { return idx.beta_star[static_cast<std::size_t>(s(i) - 1)]; };
    return {b(2) - b(1), bs(2) - bs(3)};
}

LegacyConversion legacy_convert(const LegacyParams& legacy) {
    if (!(legacy.M > 0.0)) throw Error(ErrorKind::Domain, "M must be positive");
    LegacyConversion out;
    const double k = -(3.0 * legacy.M + 2.0) / (1.0 + legacy.M);
    const double g = k + 3.0;
    out.oper.k = k;
    out.oper.lambda = -legacy.E / std::pow(g / 3.0, 3.0 * (k + 2.0));
    out.r.r1 = (legacy.ell1 - 1.0) * g / 3.0 + 1.0;
    out.r.r2 = (legacy.ell2 - 1.0) * g / 3.0 + 1.0;
    std::tie(out.oper.r1bar, out.oper.r2bar) = r_to_rbar(out.r);
    out.ell_tilde = {-legacy.ell1 + 2.0, legacy.ell1 - legacy.ell2 + 1.0, legacy.ell2};
    return out;
}

LegacyParams legacy_from_oper(const OperParams& p, const RPair& r) {
    p.validate();
    const double g = p.k + 3.0;
    LegacyParams out;
    out.M = -(p.k + 2.0) / (p.k + 3.0);
    out.E = -std::pow(g / 3.0, 3.0 * (p.k + 2.0)) * p.lambda;
    out.ell1 = 3.0 / g * (r.r1 - 1.0) + 1.0;
    out.ell2 = 3.0 / g * (r.r2 - 1.0) + 1.0;
    return out;
}

BHKParams bhk_params(const OperParams& p, const RPair& r) {
    BHKParams b;
    b.g = p.k + 3.0;
    b.p1 = r.r1 / 2.0 + r.r2 / 2.0 - 1.0;
    b.p2 = std::sqrt(3.0) / 2.0 * (r.r1 - r.r2);
    b.q_phase = std::polar(1.0, kPi * b.g);
    const auto phase_diff = [](cplx x) { return std::exp(kI * kPi * x) - std::exp(-kI * kPi * x); };
    const double s3 = std::sqrt(3.0);
    b.c1 = phase_diff(b.p1 - s3 * b.p2);
    b.c2 = std::exp(-2.0 * kI * kPi * b.p1) - std::exp(2.0 * kI * kPi * b.p1);
    b.c3 = phase_diff(b.p1 + s3 * b.p2);
    return b;
}

CFTParams cft_from_bhk(const BHKParams& b) {
    CFTParams out;
    out.c = 50.0 - 24.0 * (b.g + 1.0 / b.g);
    // Momenta entering the conformal weights carry the factor g/3 relative to (p1, p2).
    const cplx m1 = b.g / 3.0 * b.p1;
    const cplx m2 = b.g / 3.0 * b.p2;
    out.delta2 = (m1 * m1 + m2 * m2) / b.g + (out.c - 2.0) / 24.0;
    out.delta3 = 2.0 * m2 * (m2 * m2 - 3.0 * m1 * m1) / std::pow(3.0 * b.g, 1.5);
    return out;
}

std::uint64_t p2_count(int n) {
    if (n < 0) return 0;
    const auto N = static_cast<std::size_t>(n);
    std::vector<std::uint64_t> coeff(N + 1, 0);
    coeff[0] = 1;
    // Two colours: multiply by 1/(1-q^m) twice for every part size m.
    for (int colour = 0; colour < 2; ++colour)
        for (std::size_t m = 1; m <= N; ++m)
            for (std::size_t i = m; i <= N; ++i) coeff[i] += coeff[i - m];
    return coeff[N];
}

GenericityReport check_genericity(const OperParams& p, const Indices& idx, int max_order, double tol) {
    GenericityReport rep;
    rep.min_distance = 1e300;
    const double kh = p.khat();
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            const cplx d = idx.beta[j] - idx.beta[i];
            const double int_dist = std::abs(d - std::round(d.real()));
            if (int_dist < rep.min_distance) rep.min_distance = int_dist;
            if (int_dist < tol) {
                rep.generic = false;
                rep.reason = "index collision";
            }
            for (int m = 0; m <= max_order; ++m) {
                for (int n = 0; n <= m; ++n) {
                    if (m == 0 && n == 0) continue;
                    const double dist = std::abs(d - (m - n * kh));
                    rep.min_distance = std::min(rep.min_distance, dist);
                    if (dist < tol && rep.generic) {
                        rep.generic = false;
                        rep.reason = "resonant index shift";
                    }
                }
            }
        }
    }
    return rep;
}

}  // namespace qkdv
