#pragma once

// Complex arithmetic on the universal cover of C^x and transport of
// third-order linear ODE solutions along paths in the cover.

#include <complex>
#include <functional>
#include <numbers>
#include <optional>

namespace qkdv {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

enum class PrecisionMode { Double, Extended };

struct ArithConfig {
    PrecisionMode precision_mode = PrecisionMode::Double;
    double abs_tol = 1e-14;
    double rel_tol = 1e-12;

    void validate() const;
};

/// A point of the universal cover of C^x. The argument is never reduced, so
/// rotating by a full turn yields a different point. Modulus zero is only
/// accepted as a path endpoint in local coordinates; powers require modulus > 0.
struct CoverPoint {
    double modulus = 1.0;
    double arg = 0.0;

    CoverPoint() = default;
    CoverPoint(double m, double a);

    cplx project() const { return std::polar(modulus, arg); }
    double log_modulus() const;

    /// Lift of a complex number using the principal argument.
    static CoverPoint principal(cplx z);
};

/// exp(alpha * (ln|z| + i arg z)).
cplx cover_pow(const CoverPoint& z, cplx alpha);

/// Adds 2*pi*t to the argument.
CoverPoint rotate(const CoverPoint& z, double t);

/// Cover point of c + u where |u| < |c|, continuous in u.
CoverPoint offset_point(const CoverPoint& center, cplx u);

/// A solution of a third-order ODE and its first two derivatives.
struct JetValue {
    cplx value{};
    cplx d1{};
    cplx d2{};

    JetValue operator+(const JetValue& o) const { return {value + o.value, d1 + o.d1, d2 + o.d2}; }
    JetValue operator-(const JetValue& o) const { return {value - o.value, d1 - o.d1, d2 - o.d2}; }
    JetValue operator*(cplx s) const { return {value * s, d1 * s, d2 * s}; }
    double norm_inf() const;
};

/// Psi''' = c1 * Psi' + c0 * Psi at a point.
struct ThirdOrderCoeffs {
    cplx c1{};
    cplx c0{};
};

using LinearRhs = std::function<ThirdOrderCoeffs(const CoverPoint&)>;

enum class PathKind { Radial, CircularArc };

/// Path in local polar coordinates u = start..end around `center` (or around
/// the origin of the cover when no center is given). Radial paths keep the
/// argument fixed; arcs keep the modulus fixed and sweep the argument.
struct ODEPath {
    CoverPoint start;
    CoverPoint end;
    PathKind kind = PathKind::Radial;
    int steps_hint = 16;
    std::optional<CoverPoint> center;

    void validate() const;
    CoverPoint point_at(double s) const;
    cplx dz_ds(double s) const;
    double s_begin() const;
    double s_end() const;
};

ODEPath radial_path(double from, double to, double arg = 0.0, int steps_hint = 16);
ODEPath arc_path(double radius, double from_arg, double to_arg, int steps_hint = 16);

/// Jet stored as value * exp(log_scale); the exponent keeps subdominant
/// solutions representable over long paths.
struct ScaledJet {
    JetValue jet;
    cplx log_scale{};

    JetValue resolve() const;
};

struct IntegrationStats {
    long accepted = 0;
    long rejected = 0;
};

ScaledJet transport(const LinearRhs& rhs, const ScaledJet& init, const ODEPath& path,
                    const ArithConfig& cfg, IntegrationStats* stats = nullptr);

JetValue integrate_ode(const LinearRhs& rhs, const JetValue& init, const ODEPath& path,
                       const ArithConfig& cfg, IntegrationStats* stats = nullptr);

}  // namespace qkdv
