#pragma once

// The trivial-monodromy algebraic system for the sites {a_l, w_l}: residuals,
// Jacobian, Newton enumeration, and the local and global monodromy checks.

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qkdv/covercx.hpp"
#include "qkdv/oper.hpp"

namespace qkdv {

struct ResidualVector {
    std::vector<cplx> F;  // F[0..N-1] from the quadratic equations, F[N..2N-1] from the cubic ones
    cplx A{};
    cplx B{};

    double norm_inf() const;
};

// The cubic equations read A a_l + B - 9(k+2) w_l = sum_j (pair terms in w_l/(w_l - w_j)).
cplx residual_A(const OperParams& p, MonodromySystem sys = MonodromySystem::Local);
cplx residual_B(const OperParams& p, MonodromySystem sys = MonodromySystem::Local);

ResidualVector residuals(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p,
                         MonodromySystem sys = MonodromySystem::Local);

/// Columns ordered (a_1..a_N, w_1..w_N).
Eigen::MatrixXcd jacobian(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p,
                          MonodromySystem sys = MonodromySystem::Local);

/// The two N = 1 solutions, ordered (a+, a-).
std::array<StateSolution, 2> solve_n1_closed_form(const OperParams& p, MonodromySystem sys = MonodromySystem::Local);

struct SolverConfig {
    int n_seeds = 200;
    double seed_box = 0.0;  // radius of the w disc; 0 selects max(10, 2|w(N=1)|)
    double damping = 1.0;
    double newton_tol = 1e-11;
    double dedup_tol = 1e-6;
    int max_iter = 100;
    std::uint64_t rng_seed = 12345;
    int threads = 0;  // 0: hardware concurrency
    bool conjugate_completion = true;
    MonodromySystem system = MonodromySystem::Local;

    void validate() const;
};

struct NewtonStats {
    int converged_runs = 0;
    int iterations = 0;  // iterations of the last converged run
};

/// A single damped Newton run from (a, w); returns true on convergence.
bool newton_refine(std::vector<cplx>& a, std::vector<cplx>& w, const OperParams& p, const SolverConfig& cfg,
                   int* iterations = nullptr);

std::vector<StateSolution> newton_solve(int N, const OperParams& p, const SolverConfig& cfg,
                                        NewtonStats* stats = nullptr);

/// min over simultaneous site permutations of max_j(|da_j| + |dw_j|).
double solution_distance(const StateSolution& x, const StateSolution& y);

struct FrobeniusCertificate {
    int site = 0;
    // Dimensionless residuals of the three local constraints; the last one is split
    // into its lambda-constant and lambda-linear parts.
    double finda21 = 0.0;
    double finda22 = 0.0;
    double constraint3_const = 0.0;
    double constraint3_lambda = 0.0;
    std::array<int, 3> indices{3, 1, -1};
    std::array<bool, 3> recursion_ok{};
    std::array<double, 3> recursion_residual{};
    double tol = 1e-9;

    bool passed() const;
    double max_constraint() const;
};

FrobeniusCertificate frobenius_certificate(const StateSolution& sol, int ell, cplx lambda, int r_max = 6,
                                           double tol = 1e-9);

struct MonodromyMatrix {
    Eigen::Matrix3cd entries;
    double deviation = 0.0;
    cplx determinant{};
};

MonodromyMatrix numeric_monodromy(const StateSolution& sol, int ell, cplx lambda, int steps = 64,
                                  const ArithConfig& cfg = {});

}  // namespace qkdv
