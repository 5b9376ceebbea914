#include "qkdv/bethe.hpp"

#include <algorithm>

#include "qkdv/errors.hpp"
#include "qkdv/parallel.hpp"

namespace qkdv {

namespace {

std::size_t at(const WeylElement& s, int i) { return static_cast<std::size_t>(s(i) - 1); }

double rel_gap(cplx a, cplx b) {
    const double d = std::max(std::abs(a), std::abs(b));
    return d > 0.0 ? std::abs(a - b) / d : 0.0;
}

int find_point(const std::vector<cplx>& grid, cplx x) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i] - x) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<int>(i);
    return -1;
}

}  // namespace

double energy_scale(double k) { return std::pow((k + 3.0) / 3.0, 3.0 * (k + 2.0)); }

cplx psi_system_constant() { return cplx(0.0, -std::sqrt(3.0)); }

std::vector<cplx> qq_grid(const std::vector<cplx>& base, double khat) {
    std::vector<cplx> out;
    out.reserve(3 * base.size());
    const cplx r = std::polar(1.0, kPi * khat);
    for (const cplx& l : base) {
        out.push_back(l);
        out.push_back(l / r);
        out.push_back(l * r);
    }
    return out;
}

std::vector<cplx> phase_lattice(int n_radii, int n_phases, double r_max, double phase0) {
    if (n_radii < 1 || n_phases < 1 || !(r_max > 0.0)) throw Error(ErrorKind::Domain, "invalid lattice");
    std::vector<cplx> out;
    for (int j = 1; j <= n_radii; ++j)
        for (int m = 0; m < n_phases; ++m) out.push_back(std::polar(r_max * j / n_radii, phase0 + kTwoPi * m / n_phases));
    return out;
}

double QQReport::max_residual() const {
    double m = 0.0;
    for (const auto& v : residuals)
        for (double x : v) m = std::max(m, x);
    return m;
}

double QQReport::max_raw_residual() const {
    double m = 0.0;
    for (const auto& v : raw_residuals)
        for (double x : v) m = std::max(m, x);
    return m;
}

std::array<cplx, 2> qq_line(int line, const WeylElement& s, const Indices& idx, double,
                            const std::array<cplx, 3>& Q0, const std::array<cplx, 3>& Qm,
                            const std::array<cplx, 3>& Qp, const std::array<cplx, 3>& S0,
                            const std::array<cplx, 3>& Sm, const std::array<cplx, 3>& Sp) {
    const std::size_t s1 = at(s, 1), s2 = at(s, 2), s3 = at(s, 3);
    if (line == 1) {
        const cplx g = sector_phases(s, idx).first;
        const cplx e = std::exp(kI * kPi * g);
        return {S0[s3], e * Qm[s1] * Qp[s2] - Qp[s1] * Qm[s2] / e};
    }
    const cplx g = sector_phases(s, idx).second;
    const cplx e = std::exp(kI * kPi * g);
    return {Q0[s1], e * Sm[s3] * Sp[s2] - Sp[s3] * Sm[s2] / e};
}

cplx calibrate(const std::vector<std::array<cplx, 2>>& pairs) {
    cplx num = 0.0;
    double den = 0.0;
    for (const auto& p : pairs) {
        if (p[0] == cplx{}) continue;
        const cplx r = p[1] / p[0];
        num += std::conj(r);
        den += std::norm(r);
    }
    if (!(den > 0.0)) throw Error(ErrorKind::Evaluation, "calibration with vanishing data");
    return num / den;
}

QQReport qq_residuals(const QTable& qt, const Indices& idx, const WeylElement& sector, double khat) {
    QQReport rep;
    rep.sector = sector;
    const cplx r = std::polar(1.0, kPi * khat);
    std::vector<std::array<int, 3>> triples;
    for (std::size_t i = 0; i < qt.lambda_grid.size(); ++i) {
        const cplx l = qt.lambda_grid[i];
        const int m = find_point(qt.lambda_grid, l / r), p = find_point(qt.lambda_grid, l * r);
        if (m < 0 || p < 0) continue;
        triples.push_back({static_cast<int>(i), m, p});
        rep.lambdas.push_back(l);
    }
    if (triples.empty()) throw Error(ErrorKind::InsufficientGrid, "no complete lambda triples in the grid");

    const cplx kappa = psi_system_constant();
    const auto [g, gs] = sector_phases(sector, idx);
    rep.predicted_constants = {g / kappa, gs / kappa};
    for (int line = 1; line <= 2; ++line) {
        std::vector<std::array<cplx, 2>> pairs;
        for (const auto& t : triples) {
            const auto i0 = static_cast<std::size_t>(t[0]), im = static_cast<std::size_t>(t[1]),
                       ip = static_cast<std::size_t>(t[2]);
            pairs.push_back(qq_line(line, sector, idx, khat, qt.Q[i0], qt.Q[im], qt.Q[ip], qt.Qstar[i0],
                                    qt.Qstar[im], qt.Qstar[ip]));
        }
        const auto li = static_cast<std::size_t>(line - 1);
        const cplx C = calibrate(pairs);
        rep.calibration_constants[li] = C;
        for (const auto& p : pairs) {
            rep.residuals[li].push_back(rel_gap(p[0], C * p[1]));
            rep.raw_residuals[li].push_back(rel_gap(p[0], rep.predicted_constants[li] * p[1]));
        }
    }
    return rep;
}

void RaySpec::validate() const {
    if (!(r_min >= 0.0) || !(r_max > r_min) || n_samples < 3) throw Error(ErrorKind::Domain, "invalid ray specification");
}

std::vector<BetheRoot> find_q_zeros(const ScalarFunction& f, const RaySpec& ray, const WeylElement& sector,
                                    RootKind which, double root_tol) {
    ray.validate();
    const int n = ray.n_samples;
    const cplx dir = std::polar(1.0, ray.phase);
    const double h = (ray.r_max - ray.r_min) / (n - 1);
    std::vector<cplx> pts(static_cast<std::size_t>(n)), vals(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = (ray.r_min + h * i) * dir;
    parallel_for(n, 0, [&](int i) { vals[static_cast<std::size_t>(i)] = f(pts[static_cast<std::size_t>(i)]); });
    double vmax = 0.0;
    for (const cplx& v : vals) vmax = std::max(vmax, std::abs(v));

    std::vector<BetheRoot> roots;
    for (int i = 1; i + 1 < n; ++i) {
        const double a = std::abs(vals[static_cast<std::size_t>(i - 1)]), b = std::abs(vals[static_cast<std::size_t>(i)]),
                     c = std::abs(vals[static_cast<std::size_t>(i + 1)]);
        if (!(b <= a && b <= c && b < 0.5 * std::max(a, c))) continue;
        BetheRoot root;
        root.sector = sector;
        root.which = which;
        cplx x0 = pts[static_cast<std::size_t>(i)], f0 = vals[static_cast<std::size_t>(i)];
        cplx x1 = x0 + 0.25 * h * dir, f1 = f(x1);
        bool ok = false;
        for (int it = 0; it < 60; ++it) {
            if (f1 == f0) break;
            const cplx x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = f(x1);
            root.secant_history.push_back(std::abs(f1));
            if (std::abs(f1) < root_tol * vmax) {
                ok = true;
                break;
            }
        }
        if (!ok) continue;
        root.lambda_root = x1;
        root.refine_residual = std::abs(f1) / vmax;
        const bool dup = std::any_of(roots.begin(), roots.end(), [&](const BetheRoot& o) {
            return std::abs(o.lambda_root - x1) < 1e-8 * std::max(1.0, std::abs(x1));
        });
        if (!dup) roots.push_back(root);
    }
    return roots;
}

double bethe_residual(const BetheRoot& root, const QFunction& Q, const QFunction& Qstar, const Indices& idx,
                      double khat, BethePhase phase) {
    const WeylElement& s = root.sector;
    const std::size_t s1 = at(s, 1), s3 = at(s, 3);
    const cplx l = root.lambda_root;
    const cplx r1 = std::polar(1.0, kPi * khat), r2 = r1 * r1;
    const double sign = phase == BethePhase::Derived ? -1.0 : 1.0;
    cplx lhs, rhs;
    if (root.which == RootKind::ZeroOfQ) {
        const cplx g = sector_phases(s, idx).first;
        lhs = Qstar(l * r1)[s3] / Qstar(l / r1)[s3];
        rhs = -std::exp(sign * 2.0 * kI * kPi * g) * Q(l * r2)[s1] / Q(l / r2)[s1];
    } else {
        const cplx g = sector_phases(s, idx).second;
        lhs = Q(l * r1)[s1] / Q(l / r1)[s1];
        rhs = -std::exp(sign * 2.0 * kI * kPi * g) * Qstar(l * r2)[s3] / Qstar(l / r2)[s3];
    }
    if (!std::isfinite(std::abs(lhs)) || !std::isfinite(std::abs(rhs)) || rhs == cplx{})
        throw Error(ErrorKind::Evaluation, "non-finite Bethe ratio");
    return std::abs(lhs / rhs - 1.0);
}

double SpectralEigenvalue::max_raw_residual() const {
    double m = 0.0;
    for (std::size_t r = 0; r < 6; ++r) {
        if (degenerate[r / 2]) continue;
        for (double x : raw_residuals[r]) m = std::max(m, x);
    }
    return m;
}

double SpectralEigenvalue::max_residual() const {
    double m = 0.0;
    for (std::size_t r = 0; r < 6; ++r) {
        if (degenerate[r / 2]) continue;
        for (double x : residuals[r]) m = std::max(m, x);
    }
    return m;
}

SpectralEigenvalue bhk_eigenvalues(const QEvaluator& ev, const std::vector<double>& t_grid) {
    const StateSolution& sol = ev.solution();
    const Indices& idx = ev.indices();
    const double khat = sol.params.khat(), g = 1.0 - khat;
    for (double t : t_grid)
        if (!(t > 0.0)) throw Error(ErrorKind::Domain, "t grid must be positive");

    const QPoint zero = ev.at(0.0);
    for (int i = 0; i < 3; ++i)
        if (std::abs(zero.Q[static_cast<std::size_t>(i)]) < 1e-10 || std::abs(zero.Qstar[static_cast<std::size_t>(i)]) < 1e-10)
            throw Error(ErrorKind::VanishingQAtZero, "Q_i(0) vanishes");

    SpectralEigenvalue out;
    out.t_grid = t_grid;
    const BHKParams bp = bhk_params(sol.params, rbar_to_r(sol.params.r1bar, sol.params.r2bar));
    out.c_bhk = {bp.c1, bp.c2, bp.c3};
    for (std::size_t i = 0; i < 3; ++i) out.degenerate[i] = std::abs(out.c_bhk[2 - i]) < 1e-12;

    const std::size_t n = t_grid.size();
    const cplx rot = std::polar(1.0, kPi * khat);
    // Per t: P and Pbar at t, q t and t / q.
    std::vector<std::array<std::array<cplx, 3>, 3>> P(n), Pb(n);
    parallel_for(static_cast<int>(n), ev.config().threads, [&](int k) {
        const auto kk = static_cast<std::size_t>(k);
        const double t = t_grid[kk];
        const double lam = std::pow(t, khat / g);
        const std::array<cplx, 3> lams{cplx(lam), lam * rot, lam / rot};
        const std::array<double, 3> phases{0.0, kPi * g, -kPi * g};
        for (int v = 0; v < 3; ++v) {
            const auto vv = static_cast<std::size_t>(v);
            const QPoint p = ev.at(lams[vv]);
            const cplx logt(std::log(t), phases[vv]);
            for (std::size_t i = 0; i < 3; ++i) {
                P[kk][vv][i] = std::exp((idx.beta[i] - 1.0) / g * logt) * p.Q[i] / zero.Q[i];
                Pb[kk][vv][i] = std::exp((idx.beta_star[i] - 1.0) / g * logt) * p.Qstar[i] / zero.Qstar[i];
            }
        }
    });
    for (std::size_t k = 0; k < n; ++k) {
        out.P.push_back(P[k][0]);
        out.Pbar.push_back(Pb[k][0]);
    }
    // Cyclic (i, j, l); variants 1 = qt, 2 = t/q.
    static constexpr std::array<std::array<std::size_t, 3>, 3> kCyc{{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
    for (std::size_t c = 0; c < 3; ++c) {
        const auto [i, j, l] = kCyc[c];
        std::vector<std::array<cplx, 2>> a, b;
        for (std::size_t k = 0; k < n; ++k) {
            a.push_back({Pb[k][0][i], P[k][1][j] * P[k][2][l] - P[k][1][l] * P[k][2][j]});
            b.push_back({P[k][0][i], Pb[k][1][l] * Pb[k][2][j] - Pb[k][1][j] * Pb[k][2][l]});
        }
        for (int line = 0; line < 2; ++line) {
            const auto& pairs = line == 0 ? a : b;
            const std::size_t slot = 2 * c + static_cast<std::size_t>(line);
            const cplx cc = out.c_bhk[2 - c];
            for (const auto& p : pairs) out.raw_residuals[slot].push_back(rel_gap(cc * p[0], p[1]));
            if (out.degenerate[c]) {
                // The bracket vanishes identically; record its size relative to the lhs.
                for (const auto& p : pairs) out.residuals[slot].push_back(std::abs(p[1]) / std::abs(p[0]));
                continue;
            }
            const cplx C = calibrate(pairs);
            out.calibration[slot] = C;
            for (const auto& p : pairs) out.residuals[slot].push_back(rel_gap(p[0], C * p[1]));
        }
    }
    return out;
}

}  // namespace qkdv
