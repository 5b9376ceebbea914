#pragma once

// Coordinate systems on model space and the exact algebraic maps between them.

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include "qkdv/covercx.hpp"

namespace qkdv {

/// Oper coordinates. Requires -3 < k < -2; khat = -k - 2 lies in (0, 1).
struct OperParams {
    double k = -2.5;
    cplx r1bar{};
    cplx r2bar{};
    cplx lambda{};

    double khat() const { return -k - 2.0; }
    void validate() const;
};

struct CFTParams {
    cplx c{};
    cplx delta2{};
    cplx delta3{};
    cplx mu{};
};

struct RPair {
    cplx r1{};
    cplx r2{};
};

struct Indices {
    std::array<cplx, 3> beta{};
    std::array<cplx, 3> beta_star{};
};

enum class WeylGenerator { Sigma, Tau };

/// Element of S3 acting on labels {1,2,3}; perm[i] is the image of i+1 (1-based).
struct WeylElement {
    std::array<int, 3> perm{1, 2, 3};
    int parity = 1;

    static WeylElement identity();
    static WeylElement sigma();
    static WeylElement tau();
    static std::array<WeylElement, 6> all();

    int operator()(int i) const { return perm[static_cast<std::size_t>(i - 1)]; }
    WeylElement compose(const WeylElement& inner) const;  // (this o inner)
    bool operator==(const WeylElement& o) const { return perm == o.perm; }
};

const char* weyl_name(const WeylElement& s);
std::optional<WeylElement> weyl_from_name(const char* name);

struct BHKParams {
    double g = 0.0;
    cplx p1{};
    cplx p2{};
    cplx q_phase{};
    cplx c1{}, c2{}, c3{};
};

struct CubicCoeffs {
    // x^3 + a2 x^2 + a1 x + a0
    cplx a2{}, a1{}, a0{};
    cplx eval(cplx x) const { return ((x + a2) * x + a1) * x + a0; }
};

struct IndicialPolys {
    CubicCoeffs primal;
    CubicCoeffs dual;
};

struct LegacyParams {
    double M = 1.0;
    cplx E{};
    cplx ell1{}, ell2{};
};

struct LegacyConversion {
    OperParams oper;
    RPair r;
    std::array<cplx, 3> ell_tilde{};
};

CFTParams oper_to_cft(const OperParams& p);
OperParams cft_to_oper(const CFTParams& c, double k);
double k_from_central_charge(cplx c);

std::pair<cplx, cplx> r_to_rbar(const RPair& r);

/// An r-pair reproducing (r1bar, r2bar), chosen so that Re b1 >= Re b2 >= Re b3.
RPair rbar_to_r(cplx r1bar, cplx r2bar);

RPair dot_action(WeylGenerator g, const RPair& r);
RPair dot_action(const WeylElement& s, const RPair& r);

Indices indices_from_r(const RPair& r);
IndicialPolys indicial_polys(const OperParams& p);
std::array<cplx, 3> cubic_roots(const CubicCoeffs& c);

/// (s(gamma), s(gamma*)) = (b_{s(2)} - b_{s(1)}, b*_{s(2)} - b*_{s(3)}).
std::pair<cplx, cplx> sector_phases(const WeylElement& s, const Indices& idx);

LegacyConversion legacy_convert(const LegacyParams& legacy);
LegacyParams legacy_from_oper(const OperParams& p, const RPair& r);

BHKParams bhk_params(const OperParams& p, const RPair& r);
/// Central charge and conformal weights from (g, p1, p2).
CFTParams cft_from_bhk(const BHKParams& b);

/// Number of bicoloured partitions of n.
std::uint64_t p2_count(int n);

struct GenericityReport {
    bool generic = true;
    double min_distance = 0.0;
    const char* reason = "";
};

/// Flags index collisions b_i - b_j in Z and resonances b_i - b_j + m - n*khat = 0.
GenericityReport check_genericity(const OperParams& p, const Indices& idx, int max_order = 40,
                                  double tol = 1e-6);

}  // namespace qkdv
