#include "qkdv/covercx.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "qkdv/errors.hpp"

namespace qkdv {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "DomainError";
        case ErrorKind::SingularityOnPath: return "SingularityOnPath";
        case ErrorKind::ToleranceFailure: return "ToleranceFailure";
        case ErrorKind::NearSingularity: return "NearSingularity";
        case ErrorKind::Index: return "IndexError";
        case ErrorKind::NotASingularity: return "NotASingularity";
        case ErrorKind::CollidedSites: return "CollidedSites";
        case ErrorKind::DegenerateDiscriminant: return "DegenerateDiscriminant";
        case ErrorKind::Resonance: return "ResonanceError";
        case ErrorKind::OutOfConvergenceRegion: return "OutOfConvergenceRegion";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::IllConditioned: return "IllConditioned";
        case ErrorKind::InsufficientGrid: return "InsufficientGrid";
        case ErrorKind::VanishingQAtZero: return "VanishingQAtZero";
        case ErrorKind::Evaluation: return "EvaluationFailure";
        case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

void ArithConfig::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
        throw Error(ErrorKind::Domain, "tolerances must be positive");
}

CoverPoint::CoverPoint(double m, double a) : modulus(m), arg(a) {
    if (!(m >= 0.0)) throw Error(ErrorKind::Domain, "cover point modulus must be non-negative");
}

double CoverPoint::log_modulus() const { return std::log(modulus); }

CoverPoint CoverPoint::principal(cplx z) { return {std::abs(z), std::arg(z)}; }

cplx cover_pow(const CoverPoint& z, cplx alpha) {
    if (!(z.modulus > 0.0)) throw Error(ErrorKind::Domain, "power of the cover origin");
    return std::exp(alpha * cplx(z.log_modulus(), z.arg));
}

CoverPoint rotate(const CoverPoint& z, double t) { return {z.modulus, z.arg + kTwoPi * t}; }

CoverPoint offset_point(const CoverPoint& center, cplx u) {
    const cplx ratio = 1.0 + u / center.project();
    return {std::abs(center.project() + u), center.arg + std::arg(ratio)};
}

double JetValue::norm_inf() const {
    return std::max({std::abs(value), std::abs(d1), std::abs(d2)});
}

JetValue ScaledJet::resolve() const { return jet * std::exp(log_scale); }

void ODEPath::validate() const {
    if (kind == PathKind::CircularArc && std::abs(start.modulus - end.modulus) > 1e-12 * start.modulus)
        throw Error(ErrorKind::Domain, "circular arc requires equal start and end modulus");
    if (kind == PathKind::Radial && std::abs(start.arg - end.arg) > 1e-15)
        throw Error(ErrorKind::Domain, "radial path requires equal start and end argument");
    if (center && kind == PathKind::CircularArc && start.modulus >= center->modulus)
        throw Error(ErrorKind::Domain, "recentred arc must not enclose the origin");
    if (center && std::max(start.modulus, end.modulus) >= center->modulus)
        throw Error(ErrorKind::Domain, "recentred path must stay closer to its centre than the origin");
}

double ODEPath::s_begin() const { return kind == PathKind::Radial ? start.modulus : start.arg; }
double ODEPath::s_end() const { return kind == PathKind::Radial ? end.modulus : end.arg; }

CoverPoint ODEPath::point_at(double s) const {
    const CoverPoint local = kind == PathKind::Radial ? CoverPoint{s, start.arg}
                                                      : CoverPoint{start.modulus, s};
    if (!center) return local;
    return offset_point(*center, local.project());
}

cplx ODEPath::dz_ds(double s) const {
    if (kind == PathKind::Radial) return std::polar(1.0, start.arg);
    return kI * std::polar(start.modulus, s);
}

ODEPath radial_path(double from, double to, double arg, int steps_hint) {
    return ODEPath{{from, arg}, {to, arg}, PathKind::Radial, steps_hint, std::nullopt};
}

ODEPath arc_path(double radius, double from_arg, double to_arg, int steps_hint) {
    return ODEPath{{radius, from_arg}, {radius, to_arg}, PathKind::CircularArc, steps_hint, std::nullopt};
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

template <class Real>
struct Stepper {
    using C = std::complex<Real>;
    using State = std::array<C, 3>;

    const LinearRhs& rhs;
    const ODEPath& path;

    State f(double s, const State& y) const {
        const ThirdOrderCoeffs k = rhs(path.point_at(s));
        const C dz = C(path.dz_ds(s));
        return {dz * y[1], dz * y[2], dz * (C(k.c1) * y[1] + C(k.c0) * y[0])};
    }

    static State axpy(const State& y, Real h, std::initializer_list<std::pair<double, const State*>> terms) {
        State out = y;
        for (const auto& [coef, k] : terms) {
            if (coef == 0.0) continue;
            for (int i = 0; i < 3; ++i) out[i] += h * Real(coef) * (*k)[i];
        }
        return out;
    }

    static Real norm(const State& y) {
        Real m = 0;
        for (const auto& v : y) m = std::max(m, std::abs(v));
        return m;
    }
};

template <class Real>
ScaledJet transport_impl(const LinearRhs& rhs, const ScaledJet& init, const ODEPath& path,
                         const ArithConfig& cfg, IntegrationStats* stats) {
    using S = Stepper<Real>;
    using C = typename S::C;
    using State = typename S::State;

    const double s0 = path.s_begin();
    const double s1 = path.s_end();
    const double span = s1 - s0;
    if (span == 0.0) return init;

    const double init_norm = init.jet.norm_inf();
    if (init_norm == 0.0) return init;
    cplx log_scale = init.log_scale + std::log(init_norm);

    S stepper{rhs, path};
    State y{C(init.jet.value / init_norm), C(init.jet.d1 / init_norm), C(init.jet.d2 / init_norm)};

    const double dir = span > 0 ? 1.0 : -1.0;
    const double h_min = 1e-13 * std::abs(span);
    double h = span / std::max(1, path.steps_hint);
    double s = s0;
    State k1 = stepper.f(s, y);
    long accepted = 0, rejected = 0;
    constexpr long kMaxSteps = 2'000'000;

    while (dir * (s1 - s) > 0) {
        if (dir * (s + h - s1) > 0) h = s1 - s;
        const Real hr = Real(h);
        const State k2 = stepper.f(s + c2 * h, S::axpy(y, hr, {{a21, &k1}}));
        const State k3 = stepper.f(s + c3 * h, S::axpy(y, hr, {{a31, &k1}, {a32, &k2}}));
        const State k4 = stepper.f(s + c4 * h, S::axpy(y, hr, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State k5 =
            stepper.f(s + c5 * h, S::axpy(y, hr, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State k6 = stepper.f(
            s + h, S::axpy(y, hr, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State y_new =
            S::axpy(y, hr, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        const State k7 = stepper.f(s + h, y_new);

        State err;
        for (int i = 0; i < 3; ++i)
            err[i] = hr * (Real(e1) * k1[i] + Real(e3) * k3[i] + Real(e4) * k4[i] + Real(e5) * k5[i] +
                           Real(e6) * k6[i] + Real(e7) * k7[i]);
        const Real scale = Real(cfg.abs_tol) + Real(cfg.rel_tol) * std::max(S::norm(y), S::norm(y_new));
        const double err_ratio = static_cast<double>(S::norm(err) / scale);

        if (!std::isfinite(err_ratio))
            throw Error(ErrorKind::SingularityOnPath, "non-finite state during integration");

        if (err_ratio <= 1.0) {
            s += h;
            y = y_new;
            k1 = k7;
            ++accepted;
            const Real n = S::norm(y);
            if (n > Real(1e30) || n < Real(1e-30)) {
                for (auto& v : y) v /= n;
                for (auto& v : k1) v /= n;
                log_scale += std::log(static_cast<double>(n));
            }
        } else {
            ++rejected;
        }
        const double fac = err_ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_ratio, -0.2), 0.2, 5.0);
        h *= fac;
        if (dir * (s1 - s) > 0 && std::abs(h) < h_min)
            throw Error(ErrorKind::SingularityOnPath, "step size underflow");
        if (accepted + rejected > kMaxSteps)
            throw Error(ErrorKind::ToleranceFailure, "step budget exhausted");
    }
    if (stats) {
        stats->accepted += accepted;
        stats->rejected += rejected;
    }
    return ScaledJet{JetValue{cplx(y[0]), cplx(y[1]), cplx(y[2])}, log_scale};
}

}  // namespace

ScaledJet transport(const LinearRhs& rhs, const ScaledJet& init, const ODEPath& path,
                    const ArithConfig& cfg, IntegrationStats* stats) {
    cfg.validate();
    path.validate();
    if (cfg.precision_mode == PrecisionMode::Extended)
        return transport_impl<long double>(rhs, init, path, cfg, stats);
    return transport_impl<double>(rhs, init, path, cfg, stats);
}

JetValue integrate_ode(const LinearRhs& rhs, const JetValue& init, const ODEPath& path,
                       const ArithConfig& cfg, IntegrationStats* stats) {
    return transport(rhs, ScaledJet{init, 0.0}, path, cfg, stats).resolve();
}

}  // namespace qkdv
