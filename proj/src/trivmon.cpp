#include "qkdv/trivmon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "qkdv/errors.hpp"
#include "qkdv/parallel.hpp"

namespace qkdv {

namespace {

constexpr double kCollisionTol = 1e-12;

void check_sites(const std::vector<cplx>& a, const std::vector<cplx>& w) {
    if (a.size() != w.size()) throw Error(ErrorKind::Domain, "a and w must have equal length");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::abs(w[i]) < kCollisionTol) throw Error(ErrorKind::CollidedSites, "site at the origin");
        for (std::size_t j = i + 1; j < w.size(); ++j)
            if (std::abs(w[i] - w[j]) < kCollisionTol) throw Error(ErrorKind::CollidedSites, "coincident sites");
    }
}

bool is_real(cplx x) { return x.imag() == 0.0; }

StateSolution make_state(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p,
                         MonodromySystem sys) {
    StateSolution s;
    s.N = static_cast<int>(a.size());
    s.a = a;
    s.w = w;
    s.params = p;
    s.params.lambda = 0.0;
    s.system = sys;
    s.residual_norm = residuals(a, w, p, sys).norm_inf();
    return s;
}

// Sites ordered by (Re w, Im w) so that equal solutions have equal layouts.
void canonicalize(StateSolution& s) {
    std::vector<std::size_t> order(static_cast<std::size_t>(s.N));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (s.w[i].real() != s.w[j].real()) return s.w[i].real() < s.w[j].real();
        return s.w[i].imag() < s.w[j].imag();
    });
    std::vector<cplx> a, w;
    for (std::size_t i : order) a.push_back(s.a[i]), w.push_back(s.w[i]);
    s.a = std::move(a);
    s.w = std::move(w);
}

bool lex_less(const StateSolution& x, const StateSolution& y) {
    for (std::size_t j = 0; j < x.w.size(); ++j) {
        if (x.w[j].real() != y.w[j].real()) return x.w[j].real() < y.w[j].real();
        if (x.w[j].imag() != y.w[j].imag()) return x.w[j].imag() < y.w[j].imag();
    }
    return false;
}

}  // namespace

double ResidualVector::norm_inf() const {
    double m = 0.0;
    for (const cplx& f : F) m = std::max(m, std::abs(f));
    return m;
}

namespace {

// Pair term of the cubic equation for site l against site j, as a polynomial in
// x = w_l / (w_l - w_j): sum_n (c[n][0] + c[n][1] a_l + c[n][2] a_j) x^n, n = 1..3.
struct PairCoefficients {
    std::array<std::array<double, 3>, 4> c{};

    cplx value(cplx x, cplx al, cplx aj) const {
        cplx v = 0.0, xn = 1.0;
        for (std::size_t n = 1; n <= 3; ++n) {
            xn *= x;
            v += (c[n][0] + c[n][1] * al + c[n][2] * aj) * xn;
        }
        return v;
    }
    cplx d_dx(cplx x, cplx al, cplx aj) const {
        cplx v = 0.0, xn = 1.0;
        for (std::size_t n = 1; n <= 3; ++n) {
            v += static_cast<double>(n) * (c[n][0] + c[n][1] * al + c[n][2] * aj) * xn;
            xn *= x;
        }
        return v;
    }
    cplx d_dal(cplx x) const { return ((c[3][1] * x + c[2][1]) * x + c[1][1]) * x; }
    cplx d_daj(cplx x) const { return ((c[3][2] * x + c[2][2]) * x + c[1][2]) * x; }
};

PairCoefficients pair_coefficients(double k, MonodromySystem sys) {
    PairCoefficients p;
    if (sys == MonodromySystem::Local) {
        p.c[3] = {-18.0 * k, 18.0, 18.0};
        p.c[2] = {-(12.0 * k * k + 9.0 * k), 9.0 * k, 15.0 * k + 18.0};
        p.c[1] = {-(4.0 * k * k * k + 12.0 * k * k + 9.0 * k), 2.0 * k * k + 3.0 * k, 6.0 * k * k + 21.0 * k + 18.0};
    } else {
        p.c[3] = {18.0 * k, -18.0, -18.0};
        p.c[2] = {12.0 * k + 9.0 * k * k, -9.0 * k, -(63.0 + 6.0 * k)};
        p.c[1] = {9.0 * k + 16.0 * k * k, -5.0 * k, 6.0 * (k * k + 10.0 * k + 6.0)};
    }
    return p;
}

}  // namespace

cplx residual_A(const OperParams& p, MonodromySystem sys) {
    const double k = p.k;
    if (sys == MonodromySystem::Printed) return 14.0 * k * k + 50.0 * k - 8.0 * p.r1bar + 45.0;
    return 2.0 * k * k * k + 14.0 * k * k + 30.0 * k + 18.0 - (2.0 * k + 6.0) * p.r1bar;
}

cplx residual_B(const OperParams& p, MonodromySystem sys) {
    const double k = p.k;
    const cplx r1 = p.r1bar, r2 = p.r2bar;
    if (sys == MonodromySystem::Printed)
        return 27.0 * (r1 - r2) - k * (7.0 * k * k + 7.0 * k + 9.0 * r2 - 13.0 * r1 + 9.0);
    return 27.0 * (r1 - r2) - k * (k * k * k + 7.0 * k * k + 15.0 * k + 9.0 + 9.0 * r2 - (k + 12.0) * r1);
}

ResidualVector residuals(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p,
                         MonodromySystem sys) {
    check_sites(a, w);
    const std::size_t N = a.size();
    const double k = p.k;
    const PairCoefficients pc = pair_coefficients(k, sys);
    ResidualVector r;
    r.A = residual_A(p, sys);
    r.B = residual_B(p, sys);
    r.F.assign(2 * N, 0.0);
    for (std::size_t l = 0; l < N; ++l) {
        const cplx al = a[l], wl = w[l];
        cplx f = al * al - k * al + k * k + 3.0 * k - 3.0 * p.r1bar;
        cplx g = r.A * al + r.B - 9.0 * (k + 2.0) * wl;
        for (std::size_t j = 0; j < N; ++j) {
            if (j == l) continue;
            const cplx x = wl / (wl - w[j]);
            f -= 9.0 * x * x + 3.0 * k * x;
            g -= pc.value(x, al, a[j]);
        }
        r.F[l] = f;
        r.F[N + l] = g;
    }
    return r;
}

Eigen::MatrixXcd jacobian(const std::vector<cplx>& a, const std::vector<cplx>& w, const OperParams& p,
                          MonodromySystem sys) {
    check_sites(a, w);
    const auto N = static_cast<Eigen::Index>(a.size());
    const double k = p.k;
    const PairCoefficients pc = pair_coefficients(k, sys);
    Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
    for (Eigen::Index l = 0; l < N; ++l) {
        const cplx al = a[static_cast<std::size_t>(l)], wl = w[static_cast<std::size_t>(l)];
        J(l, l) = 2.0 * al - k;
        J(N + l, l) = residual_A(p, sys);
        J(N + l, N + l) = -9.0 * (k + 2.0);
        for (Eigen::Index j = 0; j < N; ++j) {
            if (j == l) continue;
            const cplx aj = a[static_cast<std::size_t>(j)], wj = w[static_cast<std::size_t>(j)];
            const cplx d = wl - wj;
            const cplx x = wl / d;
            const cplx dx_dwl = -wj / (d * d), dx_dwj = wl / (d * d);
            const cplx df_dx = -(18.0 * x + 3.0 * k);
            const cplx dg_dx = -pc.d_dx(x, al, aj);
            J(l, N + l) += df_dx * dx_dwl;
            J(l, N + j) += df_dx * dx_dwj;
            J(N + l, l) -= pc.d_dal(x);
            J(N + l, j) -= pc.d_daj(x);
            J(N + l, N + l) += dg_dx * dx_dwl;
            J(N + l, N + j) += dg_dx * dx_dwj;
        }
    }
    return J;
}

std::array<StateSolution, 2> solve_n1_closed_form(const OperParams& p, MonodromySystem sys) {
    p.validate();
    const double k = p.k;
    const cplx disc = 12.0 * p.r1bar - 3.0 * k * k - 12.0 * k;
    if (std::abs(disc) < 1e-14) throw Error(ErrorKind::DegenerateDiscriminant, "N=1 roots coincide");
    const cplx root = std::sqrt(disc);
    const cplx A = residual_A(p, sys), B = residual_B(p, sys);
    std::array<StateSolution, 2> out;
    for (int s = 0; s < 2; ++s) {
        const cplx a = (k + (s == 0 ? 1.0 : -1.0) * root) / 2.0;
        const cplx w = (A * a + B) / (9.0 * (k + 2.0));
        if (std::abs(w) < kCollisionTol) throw Error(ErrorKind::CollidedSites, "N=1 site at the origin");
        out[static_cast<std::size_t>(s)] = make_state({a}, {w}, p, sys);
    }
    return out;
}

void SolverConfig::validate() const {
    if (n_seeds <= 0 || !(damping > 0.0 && damping <= 1.0) || !(newton_tol > 0.0) || !(dedup_tol > newton_tol) ||
        max_iter <= 0 || seed_box < 0.0 || threads < 0)
        throw Error(ErrorKind::Domain, "invalid solver configuration");
}

bool newton_refine(std::vector<cplx>& a, std::vector<cplx>& w, const OperParams& p, const SolverConfig& cfg,
                   int* iterations) {
    const std::size_t N = a.size();
    const auto unpack = [&](const Eigen::VectorXcd& x, std::vector<cplx>& aa, std::vector<cplx>& ww) {
        for (std::size_t i = 0; i < N; ++i) {
            aa[i] = x(static_cast<Eigen::Index>(i));
            ww[i] = x(static_cast<Eigen::Index>(N + i));
        }
    };
    Eigen::VectorXcd x(static_cast<Eigen::Index>(2 * N));
    for (std::size_t i = 0; i < N; ++i) {
        x(static_cast<Eigen::Index>(i)) = a[i];
        x(static_cast<Eigen::Index>(N + i)) = w[i];
    }
    const auto eval = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd* F) -> double {
        std::vector<cplx> aa(N), ww(N);
        unpack(v, aa, ww);
        try {
            const ResidualVector r = residuals(aa, ww, p, cfg.system);
            if (F) *F = Eigen::Map<const Eigen::VectorXcd>(r.F.data(), static_cast<Eigen::Index>(r.F.size()));
            const double n = r.norm_inf();
            return std::isfinite(n) ? n : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    Eigen::VectorXcd F;
    double fn = eval(x, &F);
    int polish = 0;
    for (int it = 0; it < cfg.max_iter; ++it) {
        if (!std::isfinite(fn)) return false;
        if (fn < cfg.newton_tol) {
            // Two extra full steps push the residual to roundoff.
            if (++polish > 2) {
                unpack(x, a, w);
                if (iterations) *iterations = it;
                return true;
            }
        }
        std::vector<cplx> aa(N), ww(N);
        unpack(x, aa, ww);
        const Eigen::MatrixXcd J = jacobian(aa, ww, p, cfg.system);
        const Eigen::VectorXcd dx = J.partialPivLu().solve(F);
        if (!dx.allFinite()) return false;
        double step = cfg.damping;
        bool accepted = false;
        for (int back = 0; back < 12; ++back) {
            Eigen::VectorXcd Fn;
            const Eigen::VectorXcd xn = x - step * dx;
            const double nn = eval(xn, &Fn);
            if (nn < fn || (polish > 0 && nn <= 2.0 * fn)) {
                x = xn;
                F = Fn;
                fn = nn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (fn < cfg.newton_tol) {
                unpack(x, a, w);
                if (iterations) *iterations = it;
                return true;
            }
            return false;
        }
    }
    if (fn < cfg.newton_tol) {
        unpack(x, a, w);
        if (iterations) *iterations = cfg.max_iter;
        return true;
    }
    return false;
}

double solution_distance(const StateSolution& x, const StateSolution& y) {
    if (x.N != y.N) return std::numeric_limits<double>::infinity();
    std::vector<std::size_t> perm(static_cast<std::size_t>(x.N));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (std::size_t j = 0; j < perm.size(); ++j)
            worst = std::max(worst, std::abs(x.a[j] - y.a[perm[j]]) + std::abs(x.w[j] - y.w[perm[j]]));
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return x.N == 0 ? 0.0 : best;
}

std::vector<StateSolution> newton_solve(int N, const OperParams& p, const SolverConfig& cfg, NewtonStats* stats) {
    p.validate();
    cfg.validate();
    if (N < 1) throw Error(ErrorKind::Domain, "newton_solve requires N >= 1");

    const auto n1 = solve_n1_closed_form(p, cfg.system);
    const double radius = cfg.seed_box > 0.0 ? cfg.seed_box : std::max(10.0, 2.0 * std::abs(n1[0].w[0]));
    const double a_noise = std::max(2.0, std::abs(n1[0].a[0] - n1[1].a[0]));

    struct Run {
        bool ok = false;
        std::vector<cplx> a, w;
        int iterations = 0;
    };
    std::vector<Run> runs(static_cast<std::size_t>(cfg.n_seeds));

    parallel_for(cfg.n_seeds, cfg.threads, [&](int i) {
        std::seed_seq seq{cfg.rng_seed, static_cast<std::uint64_t>(i)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Run run;
        run.a.resize(static_cast<std::size_t>(N));
        run.w.resize(static_cast<std::size_t>(N));
        for (int j = 0; j < N; ++j) {
            // Uniform in the annulus 0.5 < |w| < radius.
            const double r = std::sqrt(0.25 + unit(rng) * (radius * radius - 0.25));
            run.w[static_cast<std::size_t>(j)] = std::polar(r, kTwoPi * unit(rng));
            const cplx centre = n1[unit(rng) < 0.5 ? 0 : 1].a[0];
            run.a[static_cast<std::size_t>(j)] = centre + std::polar(a_noise * std::sqrt(unit(rng)), kTwoPi * unit(rng));
        }
        run.ok = newton_refine(run.a, run.w, p, cfg, &run.iterations);
        runs[static_cast<std::size_t>(i)] = std::move(run);
    });

    std::vector<StateSolution> found;
    const auto add = [&](StateSolution s) {
        canonicalize(s);
        for (const auto& f : found)
            if (solution_distance(f, s) < cfg.dedup_tol) return;
        found.push_back(std::move(s));
    };
    int converged = 0, last_iter = 0;
    for (const Run& run : runs) {
        if (!run.ok) continue;
        StateSolution s;
        try {
            s = make_state(run.a, run.w, p, cfg.system);
        } catch (const Error&) {
            continue;
        }
        if (!(s.residual_norm < cfg.newton_tol)) continue;
        ++converged;
        last_iter = run.iterations;
        add(std::move(s));
    }
    const bool real_params = is_real(p.r1bar) && is_real(p.r2bar);
    if (cfg.conjugate_completion && real_params) {
        const std::size_t n_found = found.size();
        for (std::size_t i = 0; i < n_found; ++i) {
            std::vector<cplx> a = found[i].a, w = found[i].w;
            for (auto& v : a) v = std::conj(v);
            for (auto& v : w) v = std::conj(v);
            if (!newton_refine(a, w, p, cfg)) continue;
            add(make_state(a, w, p, cfg.system));
        }
    }
    std::sort(found.begin(), found.end(), lex_less);
    if (stats) {
        stats->converged_runs = converged;
        stats->iterations = last_iter;
    }
    return found;
}

bool FrobeniusCertificate::passed() const {
    return max_constraint() < tol && recursion_ok[0] && recursion_ok[1] && recursion_ok[2];
}

double FrobeniusCertificate::max_constraint() const {
    return std::max({finda21, finda22, constraint3_const, constraint3_lambda});
}

FrobeniusCertificate frobenius_certificate(const StateSolution& sol, int ell, cplx lambda, int r_max, double tol) {
    const int m_max = std::max(r_max, 4);
    const LaurentData L = laurent_at_w(sol, ell, m_max);
    const cplx w = sol.w[static_cast<std::size_t>(ell - 1)];
    // Rescale by powers of w so that all quantities are dimensionless.
    std::vector<cplx> q1(L.q1.size()), q2(L.q2.size()), q2c(L.q2.size()), q2l(L.q2.size());
    cplx wm = 1.0;
    for (std::size_t m = 0; m < q1.size(); ++m, wm *= w) {
        q1[m] = L.q1[m] * wm;
        q2c[m] = L.q2[m] * wm;
        q2l[m] = L.q2_lambda[m] * wm;
        q2[m] = q2c[m] + lambda * q2l[m];
    }
    FrobeniusCertificate c;
    c.site = ell;
    c.tol = tol;
    c.finda21 = std::abs(q1[2] - (q1[1] * q1[1] - q1[1] * q2c[1] + q2c[1] * q2c[1]) / 3.0);
    c.finda22 = std::abs(q2c[2] - q1[1] * (2.0 * q2c[1] - q1[1]) / 3.0);
    const auto constraint3 = [&](const std::vector<cplx>& Q2) {
        const cplx q11 = q1[1], q21 = Q2[1];
        return q1[4] + Q2[4] -
               (q1[3] * (2.0 * q11 - q21) / 3.0 + q11 * Q2[3] +
                q11 * (2.0 * q11 - q21) * (q11 - 2.0 * q21) * (q11 + q21) / 27.0);
    };
    c.constraint3_const = std::abs(constraint3(q2c));
    // The lambda-linear part: q24' - q11 q23', normalized by |w^k|.
    const double wk = std::abs(cover_pow(CoverPoint::principal(w), sol.params.k));
    c.constraint3_lambda = std::abs(q2l[4] - q1[1] * q2l[3]) / wk;

    for (std::size_t b = 0; b < 3; ++b) {
        const double beta = c.indices[b];
        const auto P = [](double x) { return (x - 3.0) * (x - 1.0) * (x + 1.0); };
        std::vector<cplx> phi(static_cast<std::size_t>(r_max + 1), 0.0);
        phi[0] = 1.0;
        double worst = 0.0;
        for (int r = 1; r <= r_max; ++r) {
            cplx rhs = 0.0;
            double scale = 0.0;
            for (int m = 1; m <= r; ++m) {
                const auto M = static_cast<std::size_t>(m);
                const cplx term = (q1[M] * (beta + r - m) - q2[M]) * phi[static_cast<std::size_t>(r - m)];
                rhs += term;
                scale += std::abs(term);
            }
            const double Pr = P(beta + r);
            if (std::abs(Pr) < 1e-12) {
                worst = std::max(worst, std::abs(rhs) / std::max(1.0, scale));
                phi[static_cast<std::size_t>(r)] = 0.0;
            } else {
                phi[static_cast<std::size_t>(r)] = rhs / Pr;
            }
        }
        c.recursion_residual[b] = worst;
        c.recursion_ok[b] = worst < tol;
    }
    return c;
}

MonodromyMatrix numeric_monodromy(const StateSolution& sol, int ell, cplx lambda, int steps, const ArithConfig& cfg) {
    sol.validate();
    if (ell < 1 || ell > sol.N) throw Error(ErrorKind::Index, "site index out of range");
    const cplx w = sol.w[static_cast<std::size_t>(ell - 1)];
    double rho = std::abs(w);
    for (int j = 0; j < sol.N; ++j)
        if (j != ell - 1) rho = std::min(rho, std::abs(w - sol.w[static_cast<std::size_t>(j)]));
    rho *= 0.5;
    PotentialPair pp = make_potentials(sol, lambda);
    const LinearRhs rhs = pp.rhs();
    ODEPath loop = arc_path(rho, 0.0, kTwoPi, steps);
    loop.center = CoverPoint::principal(w);
    MonodromyMatrix M;
    const std::array<JetValue, 3> basis{JetValue{1, 0, 0}, JetValue{0, 1, 0}, JetValue{0, 0, 1}};
    for (int c = 0; c < 3; ++c) {
        const JetValue out = integrate_ode(rhs, basis[static_cast<std::size_t>(c)], loop, cfg);
        M.entries(0, c) = out.value;
        M.entries(1, c) = out.d1;
        M.entries(2, c) = out.d2;
    }
    M.deviation = (M.entries - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff();
    M.determinant = M.entries.determinant();
    return M;
}

}  // namespace qkdv
