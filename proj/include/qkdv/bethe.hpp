#pragma once

// Functional relations among the connection coefficients: the QQ-tilde system, zeros of Q
// and the Bethe Ansatz equations they satisfy, and the eigenvalue normalisation P_i(t).

#include <array>
#include <functional>
#include <vector>

#include "qkdv/connection.hpp"
#include "qkdv/params.hpp"

namespace qkdv {

/// Wr[Psi_{-1/2}, Psi_{1/2}] = kappa Psi* (and the dual line) for Sibuya solutions normalised by
/// z^{2/3} e^{-S}: the twisted asymptotic forms give kappa = -2i sin(pi/3) = -i sqrt(3).
cplx psi_system_constant();

/// Grid of triples: entries 3j, 3j+1, 3j+2 are lambda_j, e^{-i pi khat} lambda_j, e^{i pi khat} lambda_j.
std::vector<cplx> qq_grid(const std::vector<cplx>& base, double khat);

/// n_radii x n_phases base points: radii r_max j / n_radii, phases phase0 + 2 pi m / n_phases.
std::vector<cplx> phase_lattice(int n_radii, int n_phases, double r_max, double phase0 = 0.4);

/// Relation lines of one sector:
///   line 1: Q*_{s3}(l) = C1 [e^{i pi g} Q_{s1}(e^{-i pi khat} l) Q_{s2}(e^{i pi khat} l) - (e^{i pi khat} <-> e^{-i pi khat}, g -> -g)]
///   line 2: Q_{s1}(l)  = C2 [e^{i pi g*} Q*_{s3}(e^{-i pi khat} l) Q*_{s2}(e^{i pi khat} l) - (...)]
/// with g = b_{s2} - b_{s1}, g* = b*_{s2} - b*_{s3}. In the c_{0,0} = 1 normalisation the constants
/// are C1 = (b_{s2} - b_{s1}) / kappa and C2 = (b*_{s2} - b*_{s3}) / kappa.
struct QQReport {
    WeylElement sector;
    std::vector<cplx> lambdas;  // base points of the complete triples
    std::array<std::vector<double>, 2> raw_residuals;  // against the predicted constants
    std::array<std::vector<double>, 2> residuals;      // after calibration
    std::array<cplx, 2> predicted_constants{};
    std::array<cplx, 2> calibration_constants{};

    double max_residual() const;
    double max_raw_residual() const;
};

/// Values of one relation at a triple: {lhs, bracket} so that lhs = C * bracket.
std::array<cplx, 2> qq_line(int line, const WeylElement& s, const Indices& idx, double khat,
                            const std::array<cplx, 3>& Q0, const std::array<cplx, 3>& Qm,
                            const std::array<cplx, 3>& Qp, const std::array<cplx, 3>& S0,
                            const std::array<cplx, 3>& Sm, const std::array<cplx, 3>& Sp);

/// Minimises sum |1 - C b_i / a_i|^2 over C for pairs (a_i, b_i); returns C.
cplx calibrate(const std::vector<std::array<cplx, 2>>& pairs);

QQReport qq_residuals(const QTable& qt, const Indices& idx, const WeylElement& sector, double khat);

enum class RootKind { ZeroOfQ, ZeroOfQstar };

struct BetheRoot {
    WeylElement sector;
    RootKind which = RootKind::ZeroOfQ;
    cplx lambda_root{};
    double refine_residual = 0.0;  // |Q(lambda_root)| / max |Q| on the ray
    double ba_residual = 0.0;
    std::vector<double> secant_history;  // |Q| after each secant step
};

struct RaySpec {
    double phase = kPi;
    double r_min = 0.05;
    double r_max = 3.5;
    int n_samples = 64;

    void validate() const;
};

/// C in E = -C lambda, C = ((k + 3) / 3)^{3 (k + 2)} > 0.
double energy_scale(double k);

/// Arg of lambda on which E is real and positive.
inline double real_e_phase() { return kPi; }

using ScalarFunction = std::function<cplx(cplx)>;

/// Local minima of |f| on the ray, refined by complex secant iteration until
/// |f| < root_tol * max |f| on the ray. Roots that fail to converge are dropped.
std::vector<BetheRoot> find_q_zeros(const ScalarFunction& f, const RaySpec& ray, const WeylElement& sector,
                                    RootKind which, double root_tol = 1e-8);

using QFunction = std::function<std::array<cplx, 3>(cplx)>;

enum class BethePhase { Derived, Printed };

/// |lhs / rhs - 1| for the Bethe equation at a zero of Q_{s1} (or Q*_{s3}):
///   Q*_{s3}(e^{i pi khat} l) / Q*_{s3}(e^{-i pi khat} l) = -e^{-2 i pi g} Q_{s1}(e^{2 i pi khat} l) / Q_{s1}(e^{-2 i pi khat} l).
/// Printed uses e^{+2 i pi g} instead. The dual equation swaps the roles of Q and Q* with g*.
double bethe_residual(const BetheRoot& root, const QFunction& Q, const QFunction& Qstar, const Indices& idx,
                      double khat, BethePhase phase = BethePhase::Derived);

/// P_i(t) = t^{(b_i - 1)/g} Q_i(t^{khat/g}) / Q_i(0) and Pbar_i with b*_i, g = 1 - khat. These satisfy
///   c_i Pbar_i(t) = P_j(qt) P_l(t/q) - P_l(qt) P_j(t/q),  c_i P_i(t) = Pbar_l(qt) Pbar_j(t/q) - Pbar_j(qt) Pbar_l(t/q)
/// for cyclic (i, j, l), q = e^{i pi g}. With labels ordered by rbar_to_r, c_i is the BHK constant
/// c_{4-i}: the two labelings run in opposite directions.
struct SpectralEigenvalue {
    std::vector<double> t_grid;
    std::vector<std::array<cplx, 3>> P;
    std::vector<std::array<cplx, 3>> Pbar;
    std::array<std::vector<double>, 6> residuals;      // calibrated, relation lines in the order above
    std::array<std::vector<double>, 6> raw_residuals;  // with c_i taken from bhk_params
    std::array<cplx, 6> calibration{};                 // C in lhs = C * bracket, so c_i = 1 / C
    std::array<cplx, 3> c_bhk{};                       // c_1..c_3 from bhk_params, BHK labels
    std::array<bool, 3> degenerate{};                  // |c_i| < 1e-12 (our labels): flagged, not asserted

    double max_residual() const;
    double max_raw_residual() const;
};

SpectralEigenvalue bhk_eigenvalues(const QEvaluator& ev, const std::vector<double>& t_grid);

}  // namespace qkdv
