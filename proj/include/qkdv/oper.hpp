#pragma once

// Scalar third-order opers  Psi''' - W1 Psi' + W2 Psi = 0  with rational W1, W2
// and a branched spectral term lambda z^k in W2.

#include <optional>
#include <vector>

#include "qkdv/covercx.hpp"
#include "qkdv/params.hpp"

namespace qkdv {

/// coef * z^{-p} * (z - w)^{-n}. Terms with n = 0 ignore w.
struct RationalTerm {
    cplx coef{};
    int p = 0;
    cplx w{};
    int n = 0;
};

class RationalPotential {
public:
    std::vector<RationalTerm> terms;

    cplx eval(cplx z) const;
    RationalPotential derivative() const;
    /// f(z) -> f(omega z).
    RationalPotential rescaled(cplx omega) const;
    RationalPotential scaled(cplx s) const;
    RationalPotential operator+(const RationalPotential& o) const;

    /// Coefficients c_j of z^{j - shift}, j = 0..m_max, around z = 0.
    std::vector<cplx> expand_at_zero(int shift, int m_max) const;
    /// Coefficients c_j of (z - site)^{j - shift}, j = 0..m_max.
    std::vector<cplx> expand_at(cplx site, int shift, int m_max) const;
    /// Coefficients c_j of z^{-j}, j = 0..m_max, around z = infinity.
    std::vector<cplx> expand_at_infinity(int m_max) const;
};

/// A level-N state: sites w_j and residues a_j of the trivial-monodromy system.
/// Which elimination of the site residues defines the oper and the algebraic system.
/// Local: a22 = ((2k+3)a - k^2)/3 and the cubic equations re-derived from the local
/// constraints; these have trivial monodromy. Printed: a22 = (2(k+3)a - k^2)/3 and the
/// commonly quoted cubic equations, kept for comparison only.
enum class MonodromySystem { Local, Printed };

struct StateSolution {
    int N = 0;
    std::vector<cplx> w;
    std::vector<cplx> a;
    OperParams params;  // lambda is ignored
    double residual_norm = 0.0;
    MonodromySystem system = MonodromySystem::Local;

    void validate() const;
};

struct PotentialValues {
    cplx W1{}, dW1{}, W2{}, dW2{};
};

/// Psi''' - W1 Psi' + (W2rat + zk_coef * z^k) Psi = 0, with z^k taken on the cover.
struct PotentialPair {
    RationalPotential w1;
    RationalPotential w2;
    cplx zk_coef{};
    double k = -2.5;
    std::vector<cplx> poles;  // finite nonzero singular points
    double guard = 0.0;       // evaluations closer than this to 0 or a pole are refused

    PotentialValues eval(const CoverPoint& z) const;
    ThirdOrderCoeffs coeffs(const CoverPoint& z) const;
    LinearRhs rhs() const;
    /// Distance from z to the nearest finite singular point, including 0.
    double distance_to_singularities(cplx z) const;
};

PotentialPair make_potentials(const StateSolution& sol, cplx lambda);
PotentialValues eval_potentials(const StateSolution& sol, cplx lambda, const CoverPoint& z);

/// The formal adjoint  Psi''' - W1 Psi' - (W2 + W1') Psi = 0.
PotentialPair adjoint(const PotentialPair& p);
PotentialValues adjoint_potentials(const StateSolution& sol, cplx lambda, const CoverPoint& z);

/// The adjoint equation pulled back by z -> e^{i pi} z, evaluated at twisted lambda so that
/// the spectral term is again lambda z^k. Its subdominant solution is Psi*.
PotentialPair dual_potentials(const StateSolution& sol, cplx lambda);

/// W1^t(z) = e^{4 pi i t} W1(e^{2 pi i t} z), W2^t(z) = e^{6 pi i t} W2(e^{2 pi i t} z, e^{2 pi i t khat} lambda).
PotentialPair twist_potentials(const PotentialPair& p, double t);

/// Laurent data of W1, W2 at a site or at 0. At a site l, q1[m] multiplies
/// (z - w)^{m-2} in W1 and q2[m] multiplies (z - w)^{m-3} in the rational part of W2;
/// q2_lambda[m] is the coefficient of lambda in q2[m]. At 0 the powers are z^{m-2} and
/// z^{m-3} and the branched term is not included.
struct LaurentData {
    int site = 0;  // 1-based site index, 0 for z = 0
    std::vector<cplx> q1;
    std::vector<cplx> q2;
    std::vector<cplx> q2_lambda;
};

LaurentData laurent_at_w(const StateSolution& sol, int ell, int m_max);
LaurentData laurent_at_zero(const StateSolution& sol, int m_max);

/// The eliminated residue a22 at site l, so that q22 = (a22 - a_l) / w_l^2.
cplx a22_at(const StateSolution& sol, int ell);

struct SingularityReport {
    std::optional<cplx> location;  // empty for infinity
    double slope = 1.0;
    bool regular = true;
    double delta1 = 0.0;
    double delta2 = 0.0;
};

enum class SingularSite { Zero, Infinity, Site };

SingularityReport classify_singularity(const StateSolution& sol, SingularSite where, int ell = 0);

/// Rational parts of W1 and W2 for a state (without the spectral term).
RationalPotential state_w1(const StateSolution& sol);
RationalPotential state_w2(const StateSolution& sol);

}  // namespace qkdv
