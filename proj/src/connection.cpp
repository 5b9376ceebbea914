#include "qkdv/connection.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "qkdv/errors.hpp"
#include "qkdv/parallel.hpp"

namespace qkdv {

namespace {

cplx cover_log(const CoverPoint& z) { return {std::log(z.modulus), z.arg}; }

cplx ipow(cplx x, int n) {
    cplx r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

double pole_radius(const std::vector<cplx>& poles) {
    double r = std::numeric_limits<double>::infinity();
    for (const cplx& w : poles) r = std::min(r, std::abs(w));
    return r;
}

// Step hint keeping the integrator's first step well inside the distance to the nearest singularity.
int steps_hint(const PotentialPair& pot, const CoverPoint& start, double length) {
    const double d = pot.distance_to_singularities(start.project());
    return std::max(16, static_cast<int>(std::ceil(length / (0.05 * d))));
}

ODEPath radial(const PotentialPair& pot, double from, double to, double arg) {
    return radial_path(from, to, arg, steps_hint(pot, CoverPoint{from, arg}, std::abs(to - from)));
}

ODEPath arc(const PotentialPair& pot, double r, double from, double to) {
    return arc_path(r, from, to, steps_hint(pot, CoverPoint{r, from}, r * std::abs(to - from)));
}

}  // namespace

const char* equation_name(Equation eq) { return eq == Equation::Primal ? "primal" : "dual"; }

PotentialPair equation_potentials(const StateSolution& sol, cplx lambda, Equation eq) {
    return eq == Equation::Primal ? make_potentials(sol, lambda) : dual_potentials(sol, lambda);
}

Indices state_indices(const StateSolution& sol) {
    return indices_from_r(rbar_to_r(sol.params.r1bar, sol.params.r2bar));
}

std::array<cplx, 3> equation_indices(const StateSolution& sol, Equation eq) {
    const Indices idx = state_indices(sol);
    return eq == Equation::Primal ? idx.beta : idx.beta_star;
}

// ---------------------------------------------------------------------------
// Frobenius series at 0

cplx FrobeniusSeries::coeff(int m, int n) const {
    if (m < 0 || m > M_trunc || n < 0 || n > m) return 0.0;
    return coeffs[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)];
}

FrobeniusSeries build_frobenius(const StateSolution& sol, cplx beta, Equation eq, int M_trunc) {
    if (M_trunc < 2) throw Error(ErrorKind::Domain, "M_trunc must be at least 2");
    const PotentialPair pot = equation_potentials(sol, 0.0, eq);
    FrobeniusSeries s;
    s.beta = beta;
    s.M_trunc = M_trunc;
    s.equation = eq;
    s.khat = sol.params.khat();
    s.radius = pole_radius(pot.poles);
    const int J = 2 * M_trunc + 2;
    s.u = pot.w1.expand_at_zero(2, J);
    s.v = pot.w2.expand_at_zero(3, J);

    const cplx u0 = s.u[0], v0 = s.v[0];
    auto P = [&](cplx e) { return e * e * e - 3.0 * e * e + (2.0 - u0) * e + v0; };
    if (std::abs(P(beta)) > 1e-8 * (1.0 + std::pow(std::abs(beta), 3)))
        throw Error(ErrorKind::Domain, "beta is not a root of the indicial polynomial");

    s.coeffs.resize(static_cast<std::size_t>(M_trunc + 1));
    for (int m = 0; m <= M_trunc; ++m) s.coeffs[static_cast<std::size_t>(m)].assign(static_cast<std::size_t>(m + 1), 0.0);
    s.coeffs[0][0] = 1.0;
    for (int m = 1; m <= M_trunc; ++m) {
        for (int n = 0; n <= m; ++n) {
            const cplx e = beta + double(m) - n * s.khat;
            const cplx Pe = P(e);
            if (std::abs(Pe) < 1e-8) throw Error(ErrorKind::Resonance, "indicial polynomial vanishes at a shifted index");
            cplx acc = -s.coeff(m - 1, n - 1);
            for (int j = 1; j <= m - n; ++j)
                acc += (s.u[static_cast<std::size_t>(j)] * (e - double(j)) - s.v[static_cast<std::size_t>(j)]) * s.coeff(m - j, n);
            s.coeffs[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] = acc / Pe;
        }
    }
    return s;
}

std::array<cplx, 4> FrobeniusSeries::derivatives(const CoverPoint& z, cplx lambda) const {
    if (!(z.modulus > 0.0) || z.modulus >= radius)
        throw Error(ErrorKind::OutOfConvergenceRegion, "series evaluated outside its disc");
    const cplx zp = z.project();
    const cplx zeta = lambda * cover_pow(z, -khat);
    std::array<cplx, 4> acc{};
    cplx zm = 1.0;
    for (int m = 0; m <= M_trunc; ++m) {
        cplx term = zm;
        for (int n = 0; n <= m; ++n) {
            const cplx t = coeffs[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] * term;
            const cplx e = beta + double(m) - n * khat;
            acc[0] += t;
            acc[1] += e * t;
            acc[2] += e * (e - 1.0) * t;
            acc[3] += e * (e - 1.0) * (e - 2.0) * t;
            term *= zeta;
        }
        zm *= zp;
    }
    const cplx zb = cover_pow(z, beta);
    return {zb * acc[0], zb / zp * acc[1], zb / (zp * zp) * acc[2], zb / (zp * zp * zp) * acc[3]};
}

JetValue FrobeniusSeries::eval(const CoverPoint& z, cplx lambda) const {
    const auto d = derivatives(z, lambda);
    return {d[0], d[1], d[2]};
}

double FrobeniusSeries::truncation_estimate(double r, cplx lambda) const {
    const double az = std::abs(lambda) * std::pow(r, -khat);
    double biggest = 0.0, tail = 0.0;
    for (int m = 0; m <= M_trunc; ++m) {
        double shell = 0.0, zn = std::pow(r, m);
        for (int n = 0; n <= m; ++n) {
            shell += std::abs(coeffs[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)]) * zn * (m + 1.0) * (m + 1.0);
            zn *= az;
        }
        biggest = std::max(biggest, shell);
        if (m >= M_trunc - 2) tail = std::max(tail, shell);
    }
    return biggest > 0.0 ? tail / biggest : 0.0;
}

double FrobeniusSeries::residual(const CoverPoint& z, cplx lambda) const {
    const cplx zp = z.project();
    const cplx zeta = lambda * cover_pow(z, -khat);
    const int J = static_cast<int>(u.size()) - 1;
    cplx total = 0.0;
    cplx zm = std::pow(zp, M_trunc + 1);
    for (int m = M_trunc + 1; m <= M_trunc + J; ++m) {
        cplx term = zm;
        for (int n = 0; n <= m; ++n) {
            const cplx e = beta + double(m) - n * khat;
            cplx R = m - 1 <= M_trunc ? coeff(m - 1, n - 1) : cplx{};
            for (int j = std::max(1, m - M_trunc); j <= std::min(J, m - n); ++j)
                R += (-u[static_cast<std::size_t>(j)] * (e - double(j)) + v[static_cast<std::size_t>(j)]) * coeff(m - j, n);
            total += R * term;
            term *= zeta;
        }
        zm *= zp;
    }
    return std::abs(total);
}

double direct_residual(const FrobeniusSeries& s, const PotentialPair& pot, const CoverPoint& z) {
    const auto d = s.derivatives(z, pot.zk_coef);
    const PotentialValues pv = pot.eval(z);
    const cplx L = d[3] - pv.W1 * d[1] + pv.W2 * d[0];
    return std::abs(L / cover_pow(z, s.beta - 3.0));
}

cplx monodromy_eigencheck(const FrobeniusSeries& s, const CoverPoint& z, cplx lambda) {
    if (z.modulus > 0.5 * s.radius)
        throw Error(ErrorKind::OutOfConvergenceRegion, "eigencheck needs |z| <= 0.5 min|w|");
    const cplx lam1 = lambda * std::polar(1.0, kTwoPi * s.khat);
    return s.eval(rotate(z, 1.0), lam1).value / s.eval(z, lambda).value;
}

double choose_z_eval(const std::vector<const FrobeniusSeries*>& series, cplx lambda, double r_cap, double tol) {
    double r = r_cap;
    for (int i = 0; i < 80; ++i, r *= 0.5) {
        bool ok = true;
        for (const auto* s : series) ok = ok && s->truncation_estimate(r, lambda) < tol;
        if (ok) return r;
    }
    throw Error(ErrorKind::ToleranceFailure, "no evaluation radius meets the truncation tolerance");
}

// ---------------------------------------------------------------------------
// WKB primitive

cplx WKBPrimitive::q(const CoverPoint& z, cplx lambda) const {
    cplx sum = 0.0;
    for (std::size_t l = 0; l < c.size(); ++l)
        sum += c[l] * ipow(lambda, static_cast<int>(l)) * cover_pow(z, -double(l) * khat);
    return cover_pow(z, -2.0 / 3.0) * sum;
}

cplx WKBPrimitive::S(const CoverPoint& z, cplx lambda) const {
    cplx sum = 0.0;
    for (std::size_t l = 0; l < c.size(); ++l) {
        const double p = 1.0 / 3.0 - double(l) * khat;
        const cplx coef = c[l] * ipow(lambda, static_cast<int>(l));
        sum += std::abs(p) < 1e-8 ? coef * cover_log(z) : coef * cover_pow(z, p) / p;
    }
    return sum;
}

WKBPrimitive build_wkb(const OperParams& p, double resonance_tol) {
    p.validate();
    WKBPrimitive w;
    w.khat = p.khat();
    const int L = static_cast<int>(std::floor(1.0 / (3.0 * w.khat) + resonance_tol));
    double b = 1.0;
    for (int l = 0; l <= L; ++l) {
        w.c.push_back(b);
        if (std::abs(1.0 / 3.0 - l * w.khat) < resonance_tol) w.log_resonant = true;
        b *= (1.0 / 3.0 - l) / (l + 1.0);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Formal series at infinity

namespace {

struct MonomialPowers {
    std::vector<cplx> up, vp;  // u^a, (lambda z^{-khat})^b
    MonomialPowers(const CoverPoint& z, cplx lambda, double khat, int a_max, int b_max)
        : up(static_cast<std::size_t>(a_max + 1)), vp(static_cast<std::size_t>(b_max + 1)) {
        const cplx u = cover_pow(z, -1.0 / 3.0), v = lambda * cover_pow(z, -khat);
        up[0] = vp[0] = 1.0;
        for (int a = 1; a <= a_max; ++a) up[static_cast<std::size_t>(a)] = up[static_cast<std::size_t>(a - 1)] * u;
        for (int b = 1; b <= b_max; ++b) vp[static_cast<std::size_t>(b)] = vp[static_cast<std::size_t>(b - 1)] * v;
    }
    cplx operator()(int a, int b) const { return up[static_cast<std::size_t>(a)] * vp[static_cast<std::size_t>(b)]; }
};

}  // namespace

std::array<cplx, 2> AsymptoticSeries::y(const CoverPoint& z, cplx lambda) const {
    const MonomialPowers mp(z, lambda, khat, a_max, b_max);
    cplx y0 = 0.0, y1 = 0.0;
    for (int a = 2; a <= a_max; ++a)
        for (int b = 0; b <= b_max; ++b) {
            const cplx c = Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            if (c == cplx{}) continue;
            const cplx t = c * mp(a, b);
            y0 += t;
            y1 -= exponent(a, b) * t;
        }
    return {y0, y1 / z.project()};
}

cplx AsymptoticSeries::log_psi(const CoverPoint& z, cplx lambda) const {
    const MonomialPowers mp(z, lambda, khat, a_max, b_max);
    const cplx zp = z.project();
    cplx sum = 0.0;
    for (int a = 2; a <= a_max; ++a)
        for (int b = 0; b <= b_max; ++b) {
            const cplx c = Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            if (c == cplx{}) continue;
            const double p = 1.0 - exponent(a, b);
            if (std::abs(p) < 1e-12) {
                sum += c * ipow(lambda, b) * cover_log(z);
            } else {
                sum += c * zp * mp(a, b) / p;
            }
        }
    return sum;
}

cplx AsymptoticSeries::log_correction(const CoverPoint& z, cplx lambda) const {
    const MonomialPowers mp(z, lambda, khat, a_max, b_max);
    const cplx zp = z.project();
    cplx sum = 0.0;
    for (int a = 2; a <= a_max; ++a)
        for (int b = 0; b <= b_max; ++b) {
            const cplx c = Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            const double p = 1.0 - exponent(a, b);
            if (c != cplx{} && p < -1e-12) sum += c * zp * mp(a, b) / p;
        }
    return sum;
}

double AsymptoticSeries::tail_estimate(double r, cplx lambda) const {
    const double al = std::abs(lambda);
    double tail = 0.0;
    for (int a = 2; a <= a_max; ++a)
        for (int b = 0; b <= b_max; ++b) {
            const double s = exponent(a, b);
            const double c = std::abs(Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
            if (c == 0.0 || s <= weight - 1.0) continue;
            const double mag = c * std::pow(al, b) * std::pow(r, -s);
            tail += mag * std::max(r / std::abs(1.0 - s), std::pow(r, 2.0 / 3.0));
        }
    return tail;
}

AsymptoticSeries build_asymptotic(const PotentialPair& pot, double weight) {
    if (std::abs(pot.zk_coef - 1.0) > 1e-14)
        throw Error(ErrorKind::Domain, "asymptotic series expects unit spectral coefficient");
    AsymptoticSeries s;
    s.khat = -pot.k - 2.0;
    s.weight = weight;
    s.a_max = static_cast<int>(std::floor(3.0 * weight + 1e-9));
    s.b_max = static_cast<int>(std::floor((weight - 2.0 / 3.0) / s.khat + 1e-9));
    const int mw = static_cast<int>(std::ceil(weight)) + 4;
    const std::vector<cplx> o1 = pot.w1.expand_at_infinity(mw);
    const std::vector<cplx> o2 = pot.w2.expand_at_infinity(mw);
    if (std::abs(o1[0]) + std::abs(o1[1]) > 1e-12 || std::abs(o2[0]) + std::abs(o2[1]) > 1e-12 ||
        std::abs(o2[2] - 1.0) > 1e-12)
        throw Error(ErrorKind::Domain, "potentials do not have the expected decay at infinity");

    const auto A = static_cast<std::size_t>(s.a_max + 1), B = static_cast<std::size_t>(s.b_max + 1);
    s.Y.assign(A, std::vector<cplx>(B, 0.0));
    std::vector<std::vector<bool>> known(A, std::vector<bool>(B, false));
    auto in_range = [&](int a, int b) {
        return a >= 2 && a <= s.a_max && b >= 0 && b <= s.b_max && s.exponent(a, b) <= weight + 1e-12;
    };
    auto Yv = [&](int a, int b) -> cplx {
        if (a < 2 || a > s.a_max || b < 0 || b > s.b_max) return 0.0;
        return known[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]
                   ? s.Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]
                   : cplx{};
    };
    s.Y[2][0] = -1.0;
    known[2][0] = true;

    for (int a = 2; a <= s.a_max; ++a) {
        for (int b = 0; b <= s.b_max; ++b) {
            if ((a == 2 && b == 0) || !in_range(a, b)) continue;
            const int Am = a + 4, Bm = b;
            cplx F = 0.0;
            // y^3; the unknown enters only as 3 Y20^2 Y_{a,b} and is excluded by Yv.
            for (int a1 = 2; a1 <= Am - 4; ++a1)
                for (int a2 = 2; a2 <= Am - a1 - 2; ++a2) {
                    const int a3 = Am - a1 - a2;
                    for (int b1 = 0; b1 <= Bm; ++b1) {
                        const cplx y1 = Yv(a1, b1);
                        if (y1 == cplx{}) continue;
                        for (int b2 = 0; b2 <= Bm - b1; ++b2) {
                            const cplx y2 = Yv(a2, b2);
                            if (y2 == cplx{}) continue;
                            F += y1 * y2 * Yv(a3, Bm - b1 - b2);
                        }
                    }
                }
            // 3 y y'
            for (int a1 = 2; a1 <= Am - 5; ++a1) {
                const int a2 = Am - 3 - a1;
                for (int b1 = 0; b1 <= Bm; ++b1)
                    F -= 3.0 * Yv(a1, b1) * s.exponent(a2, Bm - b1) * Yv(a2, Bm - b1);
            }
            // y''
            {
                const double e = s.exponent(Am - 6, Bm);
                F += e * (e + 1.0) * Yv(Am - 6, Bm);
            }
            // -W1 y + W2
            for (int m = 2; 3 * m <= Am - 2 && m <= mw; ++m) F -= o1[static_cast<std::size_t>(m)] * Yv(Am - 3 * m, Bm);
            if (Bm == 0 && Am % 3 == 0 && Am / 3 <= mw) F += o2[static_cast<std::size_t>(Am / 3)];
            if (Am == 6 && Bm == 1) F += 1.0;
            s.Y[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = -F / 3.0;
            known[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Sibuya solutions

void SibuyaConfig::validate() const {
    arith.validate();
    if (z_max < 0.0 || !(asymptotic_tol > 0.0) || !(weight >= 2.0))
        throw Error(ErrorKind::Domain, "invalid Sibuya configuration");
}

bool SibuyaSolution::clear_radial(double r0, double r1, double arg) const {
    const cplx dir = std::polar(1.0, arg);
    const double lo = std::min(r0, r1), hi = std::max(r0, r1);
    for (std::size_t j = 0; j < pot.poles.size(); ++j) {
        const cplx w = pot.poles[j];
        const double t = std::clamp(std::real(w * std::conj(dir)), lo, hi);
        if (std::abs(w - t * dir) < margins[j]) return false;
    }
    return true;
}

bool SibuyaSolution::clear_arc(double r, double a0, double a1) const {
    const double lo = std::min(a0, a1), hi = std::max(a0, a1);
    for (std::size_t j = 0; j < pot.poles.size(); ++j) {
        const cplx w = pot.poles[j];
        if (std::abs(std::abs(w) - r) >= margins[j]) continue;
        const int n = std::max(2, static_cast<int>((hi - lo) / 0.005));
        for (int i = 0; i <= n; ++i)
            if (std::abs(w - std::polar(r, lo + (hi - lo) * i / n)) < margins[j]) return false;
    }
    return true;
}

ScaledJet SibuyaSolution::on_ray(double r) const {
    if (r > z_max * (1.0 + 1e-12)) throw Error(ErrorKind::OutOfDomain, "radius beyond z_max");
    const int i_star = std::max(0, static_cast<int>(std::floor(std::log2(z_max / r) + 1e-12)));
    const LinearRhs rhs = pot.rhs();
    while (static_cast<int>(cache_.size()) <= i_star) {
        const Checkpoint& last = cache_.back();
        const double next = last.r * 0.5;
        cache_.push_back({next, transport(rhs, last.jet, radial(pot, last.r, next, ray_arg), arith)});
    }
    const Checkpoint& cp = cache_[static_cast<std::size_t>(i_star)];
    if (cp.r == r) return cp.jet;
    return transport(rhs, cp.jet, radial(pot, cp.r, r, ray_arg), arith);
}

ScaledJet SibuyaSolution::eval_untwisted(const CoverPoint& z) const {
    const double r = z.modulus;
    if (!(r > 0.0)) throw Error(ErrorKind::OutOfDomain, "evaluation at the origin");
    if (z.arg == ray_arg) {
        if (!clear_radial(r, z_max, ray_arg)) throw Error(ErrorKind::SingularityOnPath, "point too close to a site");
        return on_ray(r);
    }
    static constexpr double kFactors[] = {1.0, 1.25, 0.8, 1.6, 0.625, 2.0, 0.5, 3.0, 1.0 / 3.0, 5.0, 0.2};
    for (double f : kFactors) {
        const double rho = r * f;
        if (rho > z_max) continue;
        if (!clear_arc(rho, ray_arg, z.arg) || !clear_radial(rho, r, z.arg)) continue;
        const LinearRhs rhs = pot.rhs();
        ScaledJet jet = transport(rhs, on_ray(rho), arc(pot, rho, ray_arg, z.arg), arith);
        if (rho != r) jet = transport(rhs, jet, radial(pot, rho, r, z.arg), arith);
        return jet;
    }
    throw Error(ErrorKind::SingularityOnPath, "no path clear of the sites reaches the point");
}

ScaledJet SibuyaSolution::eval_scaled(const CoverPoint& z) const {
    if (twist == 0.0) return eval_untwisted(z);
    const cplx omega = std::polar(1.0, kTwoPi * twist);
    ScaledJet s = eval_untwisted(rotate(z, twist));
    s.jet = {s.jet.value / omega, s.jet.d1, s.jet.d2 * omega};
    return s;
}

std::array<cplx, 2> SibuyaSolution::defining_ratios(const CoverPoint& z, const WKBPrimitive& wkb) const {
    const ScaledJet s = eval_untwisted(z);
    const cplx log_e = s.log_scale + wkb.S(z, lam);
    return {s.jet.value / cover_pow(z, 2.0 / 3.0) * std::exp(log_e), -s.jet.d1 * std::exp(log_e)};
}

SibuyaSolution build_sibuya(const StateSolution& sol, cplx lam, Equation eq, const SibuyaConfig& cfg, double twist,
                            const AsymptoticSeries* series) {
    cfg.validate();
    SibuyaSolution s;
    s.lam = lam;
    s.equation = eq;
    s.twist = twist;
    s.arith = cfg.arith;
    const double khat = sol.params.khat();
    const cplx lam_shift = lam * std::polar(1.0, kTwoPi * twist * khat);
    s.pot = equation_potentials(sol, lam_shift, eq);
    s.series = series ? *series : build_asymptotic(equation_potentials(sol, 1.0, eq), cfg.weight);

    double far = 0.0;
    for (std::size_t j = 0; j < s.pot.poles.size(); ++j) {
        const cplx w = s.pot.poles[j];
        double rho = std::abs(w);
        for (std::size_t i = 0; i < s.pot.poles.size(); ++i)
            if (i != j) rho = std::min(rho, std::abs(w - s.pot.poles[i]));
        s.margins.push_back(0.3 * rho);
        far = std::max(far, std::abs(w));
    }

    if (cfg.z_max > 0.0) {
        s.z_max = cfg.z_max;
    } else {
        s.z_max = std::max(256.0, 8.0 * far);
        while (s.series.tail_estimate(s.z_max, lam_shift) > cfg.asymptotic_tol) {
            s.z_max *= 2.0;
            if (s.z_max > 1e15) throw Error(ErrorKind::ToleranceFailure, "asymptotic series does not reach tolerance");
        }
    }

    if (std::isnan(cfg.ray_arg)) {
        static constexpr double kRays[] = {0.0, 0.15, -0.15, 0.3, -0.3, 0.45, -0.45, 0.6, -0.6};
        bool found = false;
        for (double a : kRays)
            if (s.clear_radial(0.0, s.z_max, a)) {
                s.ray_arg = a;
                found = true;
                break;
            }
        if (!found) throw Error(ErrorKind::SingularityOnPath, "no starting ray clear of the sites");
    } else {
        s.ray_arg = cfg.ray_arg;
        if (!s.clear_radial(0.0, s.z_max, s.ray_arg)) throw Error(ErrorKind::SingularityOnPath, "starting ray meets a site");
    }

    const CoverPoint zm{s.z_max, s.ray_arg};
    const auto yy = s.series.y(zm, lam_shift);
    s.initial = ScaledJet{JetValue{1.0, yy[0], yy[1] + yy[0] * yy[0]}, s.series.log_psi(zm, lam_shift)};
    s.cache_.push_back({s.z_max, s.initial});
    return s;
}

JetValue twisted_eval(const FrobeniusSeries& s, double t, const CoverPoint& z, cplx lambda) {
    const cplx omega = std::polar(1.0, kTwoPi * t);
    const JetValue j = s.eval(rotate(z, t), lambda * std::polar(1.0, kTwoPi * t * s.khat));
    return {j.value / omega, j.d1, j.d2 * omega};
}

JetValue twisted_eval(const SibuyaSolution& s, const CoverPoint& z) { return s.eval(z); }

JetValue wronskian2(const JetValue& f, const JetValue& g, cplx W1) {
    const cplx w = f.value * g.d1 - f.d1 * g.value;
    return {w, f.value * g.d2 - f.d2 * g.value, f.d1 * g.d2 - f.d2 * g.d1 + W1 * w};
}

// ---------------------------------------------------------------------------
// Connection coefficients

void QConfig::validate() const {
    sibuya.validate();
    if (M_trunc < 2 || !(z_match > 0.0) || z_eval < 0.0 || !(truncation_tol > 0.0) || !(cond_max > 1.0))
        throw Error(ErrorKind::Domain, "invalid Q configuration");
}

QEvaluator::QEvaluator(const StateSolution& sol, const QConfig& cfg) : sol_(sol), cfg_(cfg) {
    cfg_.validate();
    sol_.validate();
    idx_ = state_indices(sol_);
    const GenericityReport g = check_genericity(sol_.params, idx_, cfg_.M_trunc);
    if (!g.generic) throw Error(ErrorKind::Resonance, g.reason);
    for (int i = 0; i < 3; ++i) {
        primal_[static_cast<std::size_t>(i)] = build_frobenius(sol_, idx_.beta[static_cast<std::size_t>(i)], Equation::Primal, cfg_.M_trunc);
        dual_[static_cast<std::size_t>(i)] = build_frobenius(sol_, idx_.beta_star[static_cast<std::size_t>(i)], Equation::Dual, cfg_.M_trunc);
    }
    asym_primal_ = build_asymptotic(equation_potentials(sol_, 1.0, Equation::Primal), cfg_.sibuya.weight);
    asym_dual_ = build_asymptotic(equation_potentials(sol_, 1.0, Equation::Dual), cfg_.sibuya.weight);
}

const FrobeniusSeries& QEvaluator::basis(Equation eq, int i) const {
    if (i < 0 || i > 2) throw Error(ErrorKind::Index, "basis index out of range");
    return eq == Equation::Primal ? primal_[static_cast<std::size_t>(i)] : dual_[static_cast<std::size_t>(i)];
}

std::array<cplx, 3> QEvaluator::coefficients(cplx lambda, Equation eq, double* cond, double* z_eval_out) const {
    const auto& basis_set = eq == Equation::Primal ? primal_ : dual_;
    const SibuyaSolution sib =
        build_sibuya(sol_, lambda, eq, cfg_.sibuya, 0.0, eq == Equation::Primal ? &asym_primal_ : &asym_dual_);
    const double radius = basis_set[0].radius;

    double z_eval = cfg_.z_eval;
    if (z_eval == 0.0) {
        const double cap = std::min({0.5 * radius, 0.5 * cfg_.z_match, 0.5});
        z_eval = choose_z_eval({&basis_set[0], &basis_set[1], &basis_set[2]}, lambda, cap, cfg_.truncation_tol);
    } else {
        if (z_eval >= 0.5 * radius || z_eval > cfg_.z_match)
            throw Error(ErrorKind::OutOfConvergenceRegion, "z_eval outside the series disc");
        for (const auto& b : basis_set)
            if (b.truncation_estimate(z_eval, lambda) > 1e3 * cfg_.truncation_tol)
                throw Error(ErrorKind::OutOfConvergenceRegion, "series truncation too large at z_eval");
    }
    if (z_eval_out) *z_eval_out = z_eval;

    const double zm = cfg_.z_match;
    const LinearRhs rhs = sib.pot.rhs();
    Eigen::Matrix3cd A;
    std::array<cplx, 3> col_scale{};
    for (int j = 0; j < 3; ++j) {
        const JetValue phi = basis_set[static_cast<std::size_t>(j)].eval(CoverPoint{z_eval, sib.ray_arg}, lambda);
        const ScaledJet moved =
            transport(rhs, ScaledJet{phi, 0.0}, radial(sib.pot, z_eval, zm, sib.ray_arg), cfg_.sibuya.arith);
        Eigen::Vector3cd c(moved.jet.value, moved.jet.d1 * zm, moved.jet.d2 * zm * zm);
        const double n = c.norm();
        A.col(j) = c / n;
        col_scale[static_cast<std::size_t>(j)] = n * std::exp(moved.log_scale);
    }
    const ScaledJet psi = sib.eval_untwisted(CoverPoint{zm, sib.ray_arg});
    const Eigen::Vector3cd rhs_vec(psi.jet.value, psi.jet.d1 * zm, psi.jet.d2 * zm * zm);

    Eigen::JacobiSVD<Eigen::Matrix3cd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    const double c = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
    if (cond) *cond = c;
    if (!(c < cfg_.cond_max)) throw Error(ErrorKind::IllConditioned, "matching system is ill-conditioned");
    const Eigen::Vector3cd x = svd.solve(rhs_vec);
    const cplx scale = std::exp(psi.log_scale);
    std::array<cplx, 3> out{};
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(j)] = x(j) * scale / col_scale[static_cast<std::size_t>(j)];
    return out;
}

QPoint QEvaluator::at(cplx lambda) const {
    QPoint p;
    p.Q = coefficients(lambda, Equation::Primal, &p.cond_primal, &p.z_eval_primal);
    p.Qstar = coefficients(lambda, Equation::Dual, &p.cond_dual, &p.z_eval_dual);
    return p;
}

QTable extract_q(const StateSolution& sol, const std::vector<cplx>& lambda_grid, const QConfig& cfg) {
    const QEvaluator ev(sol, cfg);
    std::vector<QPoint> pts(lambda_grid.size());
    parallel_for(static_cast<int>(lambda_grid.size()), cfg.threads,
                 [&](int i) { pts[static_cast<std::size_t>(i)] = ev.at(lambda_grid[static_cast<std::size_t>(i)]); });
    QTable t;
    t.lambda_grid = lambda_grid;
    t.z_match = cfg.z_match;
    t.normalization_note =
        "Frobenius basis with c_{0,0} = 1; Sibuya solutions normalised by z^{2/3} e^{-S} as z -> +infinity";
    for (const QPoint& p : pts) {
        t.Q.push_back(p.Q);
        t.Qstar.push_back(p.Qstar);
        t.cond_primal.push_back(p.cond_primal);
        t.cond_dual.push_back(p.cond_dual);
    }
    return t;
}

}  // namespace qkdv
