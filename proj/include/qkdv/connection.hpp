#pragma once

// Local solutions of the primal and dual opers: generalised Frobenius series at z = 0,
// subdominant (Sibuya) solutions at z = +infinity, and the connection coefficients
// Q_i(lambda), Q*_i(lambda) between them.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qkdv/covercx.hpp"
#include "qkdv/oper.hpp"
#include "qkdv/params.hpp"

namespace qkdv {

enum class Equation { Primal, Dual };

const char* equation_name(Equation eq);

/// Potentials of the chosen equation. Both carry the spectral term lambda z^k.
PotentialPair equation_potentials(const StateSolution& sol, cplx lambda, Equation eq);

/// beta (primal) or beta* (dual), in the order fixed by rbar_to_r.
std::array<cplx, 3> equation_indices(const StateSolution& sol, Equation eq);
Indices state_indices(const StateSolution& sol);

/// Phi(z, lambda) = z^beta sum_{0 <= n <= m <= M} c_{m,n} z^m zeta^n, zeta = lambda z^{-khat}.
/// The coefficients do not depend on lambda.
struct FrobeniusSeries {
    cplx beta{};
    int M_trunc = 0;
    Equation equation = Equation::Primal;
    double khat = 0.5;
    std::vector<std::vector<cplx>> coeffs;  // coeffs[m][n], n <= m
    // Taylor data at 0: W1 = sum u_j z^{j-2}, rational W2 = sum v_j z^{j-3}.
    std::vector<cplx> u;
    std::vector<cplx> v;
    double radius = 0.0;  // distance from 0 to the nearest pole

    cplx coeff(int m, int n) const;
    /// Value and first three derivatives at z.
    std::array<cplx, 4> derivatives(const CoverPoint& z, cplx lambda) const;
    JetValue eval(const CoverPoint& z, cplx lambda) const;
    /// Largest of the last three shells sum_n (m+1)^2 |c_{m,n} z^m zeta^n| relative to the largest
    /// shell. The weight tracks the second derivative, which the matching also uses.
    double truncation_estimate(double r, cplx lambda) const;
    /// |L Phi_M| / |z^{beta-3}| computed exactly from the recursion: the truncated series
    /// leaves only the coefficients of orders m > M.
    double residual(const CoverPoint& z, cplx lambda) const;
};

FrobeniusSeries build_frobenius(const StateSolution& sol, cplx beta, Equation eq, int M_trunc = 40);

/// |L Phi_M| / |z^{beta-3}| with the operator applied in floating point to the evaluated jets.
double direct_residual(const FrobeniusSeries& s, const PotentialPair& pot, const CoverPoint& z);

/// e^{-2 pi i} Phi(rotate(z, 1), e^{2 pi i khat} lambda) / Phi(z, lambda); equals e^{2 pi i beta}.
cplx monodromy_eigencheck(const FrobeniusSeries& s, const CoverPoint& z, cplx lambda);

/// Largest r <= r_cap (halving) with truncation_estimate below tol for every series.
double choose_z_eval(const std::vector<const FrobeniusSeries*>& series, cplx lambda, double r_cap,
                     double tol = 1e-13);

/// q(z, lambda) = z^{-2/3} (1 + sum_{l=1}^{L} c_l lambda^l z^{-l khat}), L = floor(1/(3 khat)).
struct WKBPrimitive {
    double khat = 0.5;
    std::vector<double> c;  // c[l] = binom(1/3, l), c[0] = 1
    bool log_resonant = false;

    cplx q(const CoverPoint& z, cplx lambda) const;
    /// Term-by-term primitive; exponent zero integrates to log z.
    cplx S(const CoverPoint& z, cplx lambda) const;
};

WKBPrimitive build_wkb(const OperParams& p, double resonance_tol = 1e-8);

/// Formal solution y = Psi'/Psi = sum Y_{a,b} u^a v^b, u = z^{-1/3}, v = lambda z^{-khat}, of
/// y'' + 3 y y' + y^3 - W1 y + W2 = 0 at z = infinity. Truncated at weight a/3 + b khat <= weight.
struct AsymptoticSeries {
    double khat = 0.5;
    double weight = 8.0;
    int a_max = 0;
    int b_max = 0;
    std::vector<std::vector<cplx>> Y;  // Y[a][b], zero where out of range

    double exponent(int a, int b) const { return a / 3.0 + b * khat; }
    /// y and y' at z.
    std::array<cplx, 2> y(const CoverPoint& z, cplx lambda) const;
    /// log Psi with no constant of integration: sum Y z^{1-s}/(1-s), log z where s = 1.
    cplx log_psi(const CoverPoint& z, cplx lambda) const;
    /// The part of log_psi from exponents s > 1 (vanishes at infinity).
    cplx log_correction(const CoverPoint& z, cplx lambda) const;
    /// Size of the terms in the top unit of weight at radius r, relative to the leading term.
    double tail_estimate(double r, cplx lambda) const;
};

/// Requires the rational W2 to decay as z^{-2} with unit coefficient.
AsymptoticSeries build_asymptotic(const PotentialPair& unit_lambda_pot, double weight = 8.0);

struct SibuyaConfig {
    double z_max = 0.0;  // 0: smallest power-of-two multiple of 256 meeting asymptotic_tol
    double asymptotic_tol = 1e-13;
    double weight = 8.0;
    double ray_arg = std::numeric_limits<double>::quiet_NaN();  // NaN: choose a ray clear of sites
    ArithConfig arith{};

    void validate() const;
};

/// Psi_t(z, lambda) = e^{-2 pi i t} Psi(e^{2 pi i t} z, e^{2 pi i t khat} lambda). The stored
/// potentials are those at the shifted spectral parameter.
class SibuyaSolution {
public:
    cplx lam{};
    double z_max = 0.0;
    Equation equation = Equation::Primal;
    double twist = 0.0;
    double ray_arg = 0.0;
    PotentialPair pot;
    AsymptoticSeries series;
    ScaledJet initial;

    /// Jets of Psi_t at z, with the exponential scale kept separate.
    ScaledJet eval_scaled(const CoverPoint& z) const;
    JetValue eval(const CoverPoint& z) const { return eval_scaled(z).resolve(); }
    /// Untwisted Psi at the shifted spectral parameter.
    ScaledJet eval_untwisted(const CoverPoint& z) const;
    /// The asymptotic form z^{2/3} e^{-S} and its derivative, for normalisation checks.
    std::array<cplx, 2> defining_ratios(const CoverPoint& z, const WKBPrimitive& wkb) const;

    ArithConfig arith{};
    std::vector<double> margins;  // exclusion radius around each pole

private:
    struct Checkpoint {
        double r;
        ScaledJet jet;
    };
    mutable std::vector<Checkpoint> cache_;  // radii z_max 2^{-i}; not thread safe

    ScaledJet on_ray(double r) const;
    bool clear_radial(double r0, double r1, double arg) const;
    bool clear_arc(double r, double a0, double a1) const;
    friend SibuyaSolution build_sibuya(const StateSolution&, cplx, Equation, const SibuyaConfig&,
                                       double, const AsymptoticSeries*);
};

/// The series argument lets callers reuse a unit-lambda asymptotic series across lambda values.
SibuyaSolution build_sibuya(const StateSolution& sol, cplx lam, Equation eq, const SibuyaConfig& cfg = {},
                            double twist = 0.0, const AsymptoticSeries* series = nullptr);

/// e^{-2 pi i t} times the series jets at (rotate(z, t), e^{2 pi i t khat} lambda).
JetValue twisted_eval(const FrobeniusSeries& s, double t, const CoverPoint& z, cplx lambda);
JetValue twisted_eval(const SibuyaSolution& s, const CoverPoint& z);

/// Jet of Wr[f, g] = f g' - f' g for solutions f, g of an equation with first coefficient W1:
/// (f g' - f' g, f g'' - f'' g, f' g'' - f'' g' + W1 (f g' - f' g)).
JetValue wronskian2(const JetValue& f, const JetValue& g, cplx W1 = 0.0);

struct QConfig {
    int M_trunc = 40;
    double z_match = 1.0;
    double z_eval = 0.0;  // 0: adaptive
    // The matching mixes basis columns of very different size, so the per-series tolerance is tight.
    double truncation_tol = 1e-13;
    double cond_max = 1e8;
    SibuyaConfig sibuya{};
    int threads = 0;

    void validate() const;
};

struct QPoint {
    std::array<cplx, 3> Q{};
    std::array<cplx, 3> Qstar{};
    double cond_primal = 0.0;
    double cond_dual = 0.0;
    double z_eval_primal = 0.0;
    double z_eval_dual = 0.0;
};

struct QTable {
    std::vector<cplx> lambda_grid;
    std::vector<std::array<cplx, 3>> Q;
    std::vector<std::array<cplx, 3>> Qstar;
    std::vector<double> cond_primal;
    std::vector<double> cond_dual;
    double z_match = 0.0;
    std::string normalization_note;
};

/// Evaluates Q_i and Q*_i at arbitrary lambda; the Frobenius bases are built once.
class QEvaluator {
public:
    QEvaluator(const StateSolution& sol, const QConfig& cfg = {});

    QPoint at(cplx lambda) const;
    /// Connection coefficients of one equation only.
    std::array<cplx, 3> coefficients(cplx lambda, Equation eq, double* cond = nullptr,
                                     double* z_eval = nullptr) const;

    const StateSolution& solution() const { return sol_; }
    const Indices& indices() const { return idx_; }
    const FrobeniusSeries& basis(Equation eq, int i) const;
    const QConfig& config() const { return cfg_; }

private:
    StateSolution sol_;
    QConfig cfg_;
    Indices idx_;
    std::array<FrobeniusSeries, 3> primal_;
    std::array<FrobeniusSeries, 3> dual_;
    AsymptoticSeries asym_primal_;
    AsymptoticSeries asym_dual_;
};

QTable extract_q(const StateSolution& sol, const std::vector<cplx>& lambda_grid, const QConfig& cfg = {});

}  // namespace qkdv
