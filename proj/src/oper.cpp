#include "qkdv/oper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qkdv/errors.hpp"

namespace qkdv {

namespace {

cplx ipow(cplx x, int e) {
    cplx out = 1.0;
    cplx base = e >= 0 ? x : 1.0 / x;
    for (int i = std::abs(e); i > 0; i >>= 1) {
        if (i & 1) out *= base;
        base *= base;
    }
    return out;
}

// Coefficients of (c + x)^{-e}, e >= 0, up to x^len-1.
std::vector<cplx> inv_power_series(cplx c, int e, int len) {
    std::vector<cplx> out(static_cast<std::size_t>(len));
    if (len == 0) return out;
    out[0] = ipow(c, -e);
    for (int i = 1; i < len; ++i)
        out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i - 1)] * (-(e + i - 1.0) / (static_cast<double>(i) * c));
    return out;
}

std::vector<cplx> mul_series(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> out(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; i + j < a.size() && j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

bool same_site(cplx a, cplx b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)); }

constexpr double kCollisionTol = 1e-12;

}  // namespace

cplx RationalPotential::eval(cplx z) const {
    cplx sum = 0.0;
    for (const auto& t : terms) {
        cplx v = t.coef * ipow(z, -t.p);
        if (t.n != 0) v *= ipow(z - t.w, -t.n);
        sum += v;
    }
    return sum;
}

RationalPotential RationalPotential::derivative() const {
    RationalPotential d;
    for (const auto& t : terms) {
        if (t.p != 0) d.terms.push_back({-static_cast<double>(t.p) * t.coef, t.p + 1, t.w, t.n});
        if (t.n != 0) d.terms.push_back({-static_cast<double>(t.n) * t.coef, t.p, t.w, t.n + 1});
    }
    return d;
}

RationalPotential RationalPotential::rescaled(cplx omega) const {
    RationalPotential out;
    for (const auto& t : terms)
        out.terms.push_back({t.coef * ipow(omega, -t.p - t.n), t.p, t.n ? t.w / omega : cplx{}, t.n});
    return out;
}

RationalPotential RationalPotential::scaled(cplx s) const {
    RationalPotential out = *this;
    for (auto& t : out.terms) t.coef *= s;
    return out;
}

RationalPotential RationalPotential::operator+(const RationalPotential& o) const {
    RationalPotential out = *this;
    out.terms.insert(out.terms.end(), o.terms.begin(), o.terms.end());
    return out;
}

std::vector<cplx> RationalPotential::expand_at(cplx site, int shift, int m_max) const {
    const int len = m_max + 1;
    std::vector<cplx> out(static_cast<std::size_t>(len), 0.0);
    const bool at_origin = std::abs(site) == 0.0;
    for (const auto& t : terms) {
        int order = 0;  // pole order of this term at the site
        std::vector<cplx> series(static_cast<std::size_t>(len + shift + 4), 0.0);
        series[0] = t.coef;
        const int slen = static_cast<int>(series.size());
        if (t.p != 0) {
            if (at_origin) order += t.p;
            else series = mul_series(series, inv_power_series(site, t.p, slen));
        }
        if (t.n != 0) {
            if (same_site(t.w, site)) order += t.n;
            else series = mul_series(series, inv_power_series(site - t.w, t.n, slen));
        }
        if (order > shift) throw Error(ErrorKind::Domain, "pole order exceeds requested Laurent shift");
        for (int i = 0; i < slen; ++i) {
            const int j = i - order + shift;
            if (j >= 0 && j < len) out[static_cast<std::size_t>(j)] += series[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

std::vector<cplx> RationalPotential::expand_at_zero(int shift, int m_max) const {
    return expand_at(0.0, shift, m_max);
}

std::vector<cplx> RationalPotential::expand_at_infinity(int m_max) const {
    std::vector<cplx> out(static_cast<std::size_t>(m_max + 1), 0.0);
    for (const auto& t : terms) {
        // z^{-p-n} (1 - w/z)^{-n} = sum_i C(n+i-1, i) w^i z^{-p-n-i}
        cplx c = t.coef;
        for (int i = 0; t.p + t.n + i <= m_max; ++i) {
            out[static_cast<std::size_t>(t.p + t.n + i)] += c;
            if (t.n == 0) break;
            c *= t.w * ((t.n + i) / static_cast<double>(i + 1));
        }
    }
    return out;
}

void StateSolution::validate() const {
    if (N < 0 || static_cast<int>(w.size()) != N || static_cast<int>(a.size()) != N)
        throw Error(ErrorKind::Domain, "state size mismatch");
    for (int i = 0; i < N; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (std::abs(w[ui]) < kCollisionTol) throw Error(ErrorKind::CollidedSites, "site at the origin");
        for (int j = i + 1; j < N; ++j)
            if (std::abs(w[ui] - w[static_cast<std::size_t>(j)]) < kCollisionTol)
                throw Error(ErrorKind::CollidedSites, "coincident sites");
    }
}

RationalPotential state_w1(const StateSolution& sol) {
    RationalPotential r;
    r.terms.push_back({sol.params.r1bar, 2, {}, 0});
    for (int j = 0; j < sol.N; ++j) {
        const cplx w = sol.w[static_cast<std::size_t>(j)];
        r.terms.push_back({3.0, 0, w, 2});
        r.terms.push_back({sol.params.k, 1, w, 1});
    }
    return r;
}

RationalPotential state_w2(const StateSolution& sol) {
    RationalPotential r;
    r.terms.push_back({sol.params.r2bar, 3, {}, 0});
    r.terms.push_back({1.0, 2, {}, 0});
    for (int j = 0; j < sol.N; ++j) {
        const cplx w = sol.w[static_cast<std::size_t>(j)];
        const cplx a = sol.a[static_cast<std::size_t>(j)];
        r.terms.push_back({3.0, 0, w, 3});
        r.terms.push_back({a, 1, w, 2});
        r.terms.push_back({a22_at(sol, j + 1), 2, w, 1});
    }
    return r;
}

double PotentialPair::distance_to_singularities(cplx z) const {
    double d = std::abs(z);
    for (const cplx& w : poles) d = std::min(d, std::abs(z - w));
    return d;
}

PotentialValues PotentialPair::eval(const CoverPoint& z) const {
    const cplx zp = z.project();
    if (!(z.modulus > 0.0)) throw Error(ErrorKind::NearSingularity, "evaluation at the origin");
    for (const cplx& w : poles)
        if (std::abs(zp - w) < guard) throw Error(ErrorKind::NearSingularity, "evaluation too close to a site");
    PotentialValues v;
    v.W1 = w1.eval(zp);
    v.dW1 = w1.derivative().eval(zp);
    v.W2 = w2.eval(zp);
    v.dW2 = w2.derivative().eval(zp);
    if (zk_coef != cplx{}) {
        const cplx zk = cover_pow(z, k);
        v.W2 += zk_coef * zk;
        v.dW2 += zk_coef * k * zk / zp;
    }
    return v;
}

ThirdOrderCoeffs PotentialPair::coeffs(const CoverPoint& z) const {
    const cplx zp = z.project();
    cplx c0 = -w2.eval(zp);
    if (zk_coef != cplx{}) c0 -= zk_coef * cover_pow(z, k);
    return {w1.eval(zp), c0};
}

LinearRhs PotentialPair::rhs() const {
    // Copy so the closure owns its data.
    return [self = *this](const CoverPoint& z) { return self.coeffs(z); };
}

PotentialPair make_potentials(const StateSolution& sol, cplx lambda) {
    sol.validate();
    sol.params.validate();
    PotentialPair pp;
    pp.w1 = state_w1(sol);
    pp.w2 = state_w2(sol);
    pp.zk_coef = lambda;
    pp.k = sol.params.k;
    pp.poles = sol.w;
    if (sol.N > 0) {
        double scale = std::numeric_limits<double>::infinity();
        for (int i = 0; i < sol.N; ++i) {
            scale = std::min(scale, std::abs(sol.w[static_cast<std::size_t>(i)]));
            for (int j = i + 1; j < sol.N; ++j)
                scale = std::min(scale, std::abs(sol.w[static_cast<std::size_t>(i)] - sol.w[static_cast<std::size_t>(j)]));
        }
        pp.guard = 1e-3 * scale;
    }
    return pp;
}

PotentialValues eval_potentials(const StateSolution& sol, cplx lambda, const CoverPoint& z) {
    return make_potentials(sol, lambda).eval(z);
}

PotentialPair adjoint(const PotentialPair& p) {
    PotentialPair out = p;
    out.w2 = (p.w2 + p.w1.derivative()).scaled(-1.0);
    out.zk_coef = -p.zk_coef;
    return out;
}

PotentialValues adjoint_potentials(const StateSolution& sol, cplx lambda, const CoverPoint& z) {
    return adjoint(make_potentials(sol, lambda)).eval(z);
}

PotentialPair dual_potentials(const StateSolution& sol, cplx lambda) {
    const PotentialPair p = make_potentials(sol, lambda);
    PotentialPair out = p;
    out.w1 = p.w1.rescaled(-1.0);
    out.w2 = p.w2.rescaled(-1.0) + p.w1.derivative().rescaled(-1.0);
    // lambda' (e^{i pi} z)^k with lambda' = e^{i pi khat} lambda is lambda z^k on the cover.
    out.zk_coef = lambda;
    for (auto& w : out.poles) w = -w;
    return out;
}

PotentialPair twist_potentials(const PotentialPair& p, double t) {
    const cplx omega = std::polar(1.0, kTwoPi * t);
    PotentialPair out = p;
    out.w1 = p.w1.rescaled(omega).scaled(omega * omega);
    out.w2 = p.w2.rescaled(omega).scaled(omega * omega * omega);
    // e^{6 pi i t} e^{2 pi i t khat} e^{2 pi i t k} = e^{2 pi i t}.
    out.zk_coef = p.zk_coef * omega;
    for (auto& w : out.poles) w /= omega;
    return out;
}

cplx a22_at(const StateSolution& sol, int ell) {
    const double k = sol.params.k;
    const double c = sol.system == MonodromySystem::Local ? 2.0 * k + 3.0 : 2.0 * k + 6.0;
    return (c * sol.a[static_cast<std::size_t>(ell - 1)] - k * k) / 3.0;
}

LaurentData laurent_at_w(const StateSolution& sol, int ell, int m_max) {
    sol.validate();
    if (ell < 1 || ell > sol.N) throw Error(ErrorKind::Index, "site index out of range");
    if (m_max < 4) throw Error(ErrorKind::Domain, "m_max must be at least 4");
    const cplx w = sol.w[static_cast<std::size_t>(ell - 1)];
    LaurentData d;
    d.site = ell;
    d.q1 = state_w1(sol).expand_at(w, 2, m_max);
    d.q2 = state_w2(sol).expand_at(w, 3, m_max);
    // lambda (w + x)^k = lambda sum_j binom(k, j) w^{k-j} x^j contributes to q2[3 + j].
    d.q2_lambda.assign(static_cast<std::size_t>(m_max + 1), 0.0);
    const CoverPoint wc = CoverPoint::principal(w);
    cplx binom = 1.0;
    for (int j = 0; 3 + j <= m_max; ++j) {
        d.q2_lambda[static_cast<std::size_t>(3 + j)] = binom * cover_pow(wc, sol.params.k - j);
        binom *= (sol.params.k - j) / (j + 1.0);
    }
    return d;
}

LaurentData laurent_at_zero(const StateSolution& sol, int m_max) {
    sol.validate();
    if (m_max < 0) throw Error(ErrorKind::Domain, "m_max must be non-negative");
    LaurentData d;
    d.site = 0;
    d.q1 = state_w1(sol).expand_at_zero(2, m_max);
    d.q2 = state_w2(sol).expand_at_zero(3, m_max);
    d.q2_lambda.assign(static_cast<std::size_t>(m_max + 1), 0.0);
    return d;
}

SingularityReport classify_singularity(const StateSolution& sol, SingularSite where, int ell) {
    sol.validate();
    const RationalPotential w1 = state_w1(sol);
    const RationalPotential w2 = state_w2(sol);
    constexpr double tiny = 1e-13;
    SingularityReport rep;
    // Leading exponent: the first nonzero coefficient in an expansion with given shift.
    const auto pole_order = [&](const std::vector<cplx>& c, int shift) {
        for (std::size_t j = 0; j < c.size(); ++j)
            if (std::abs(c[j]) > tiny) return static_cast<double>(shift - static_cast<int>(j));
        return -std::numeric_limits<double>::infinity();
    };
    switch (where) {
        case SingularSite::Zero: {
            rep.location = cplx{};
            rep.delta1 = pole_order(w1.expand_at_zero(2, 2), 2);
            // The branched term lambda z^k has pole order -k.
            rep.delta2 = std::max(pole_order(w2.expand_at_zero(3, 3), 3), -sol.params.k);
            rep.slope = std::max({1.0, rep.delta1 / 2.0, rep.delta2 / 3.0});
            break;
        }
        case SingularSite::Site: {
            if (ell < 1 || ell > sol.N) throw Error(ErrorKind::NotASingularity, "no such site");
            const cplx w = sol.w[static_cast<std::size_t>(ell - 1)];
            rep.location = w;
            rep.delta1 = pole_order(w1.expand_at(w, 2, 2), 2);
            rep.delta2 = pole_order(w2.expand_at(w, 3, 3), 3);
            rep.slope = std::max({1.0, rep.delta1 / 2.0, rep.delta2 / 3.0});
            break;
        }
        case SingularSite::Infinity: {
            // Growth exponents: W ~ z^{delta}. The branched term decays like z^k with k < -2.
            const auto growth = [&](const std::vector<cplx>& c) {
                for (std::size_t j = 0; j < c.size(); ++j)
                    if (std::abs(c[j]) > tiny) return -static_cast<double>(j);
                return -std::numeric_limits<double>::infinity();
            };
            rep.delta1 = growth(w1.expand_at_infinity(6));
            rep.delta2 = std::max(growth(w2.expand_at_infinity(6)), sol.params.k);
            rep.slope = std::max(1.0, std::max(rep.delta1 / 2.0, rep.delta2 / 3.0) + 2.0);
            break;
        }
    }
    rep.regular = rep.slope == 1.0;
    return rep;
}

}  // namespace qkdv
