// Command-line driver. Exit codes: 0 pass, 1 computation-level failure, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "qkdv/bethe.hpp"
#include "qkdv/errors.hpp"
#include "qkdv/io.hpp"
#include "qkdv/parallel.hpp"
#include "qkdv/params.hpp"
#include "qkdv/trivmon.hpp"

using namespace qkdv;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

cplx parse_complex(const std::string& s) {
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos) return std::stod(s);
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw UsageError("cannot parse complex value '" + s + "' (expected re or re,im)");
    }
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text(path, text);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// State selection shared by qtable, qq and bethe.
struct StateArgs {
    std::string in;
    int index = 0;
    double k = -2.5;
    std::string r1bar = "1";
    std::string r2bar = "0";

    void add(CLI::App* c) {
        c->add_option("--in", in, "solution file; without it the ground state of --k/--r1bar/--r2bar is used");
        c->add_option("--index", index, "solution index within the file");
        c->add_option("--k", k, "level, -3 < k < -2");
        c->add_option("--r1bar", r1bar, "re or re,im");
        c->add_option("--r2bar", r2bar, "re or re,im");
    }

    StateSolution load() const {
        if (in.empty()) {
            StateSolution s;
            s.params.k = k;
            s.params.r1bar = parse_complex(r1bar);
            s.params.r2bar = parse_complex(r2bar);
            s.validate();
            return s;
        }
        const SolutionFile f = solution_file_from_json(json::parse(read_text(in)));
        if (index < 0 || index >= static_cast<int>(f.solutions.size())) throw UsageError("--index out of range");
        return f.solutions[static_cast<std::size_t>(index)];
    }
};

struct QArgs {
    int m_trunc = 40;
    double z_match = 1.0;
    double z_eval = 0.0;
    double cond_max = 1e8;

    void add(CLI::App* c) {
        c->add_option("--m-trunc", m_trunc, "Frobenius truncation order");
        c->add_option("--z-match", z_match, "matching radius");
        c->add_option("--z-eval", z_eval, "series evaluation radius (0: adaptive)");
        c->add_option("--cond-max", cond_max, "largest accepted condition number");
    }

    QConfig config() const {
        QConfig q;
        q.M_trunc = m_trunc;
        q.z_match = z_match;
        q.z_eval = z_eval;
        q.cond_max = cond_max;
        q.validate();
        return q;
    }
};

WeylElement sector_from(const std::string& name) {
    const auto s = weyl_from_name(name.c_str());
    if (!s) throw UsageError("unknown sector '" + name + "' (id, sigma, tau, tau2, sigma_tau, sigma_tau2)");
    return *s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qkdv: trivial-monodromy opers, connection coefficients and functional relations"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
    int threads = 0;
    app.add_option("--threads", threads, "worker cap (0: hardware concurrency)")->envname("QKDV_THREADS");

    // solve
    auto* solve = app.add_subcommand("solve", "enumerate level-N trivial-monodromy solutions");
    int N = 1;
    double k = -2.5;
    std::string r1bar = "1", r2bar = "0", system = "local", solve_out;
    SolverConfig scfg;
    bool no_conj = false;
    solve->add_option("--N", N, "level")->required();
    solve->add_option("--k", k, "level, -3 < k < -2");
    solve->add_option("--r1bar", r1bar, "re or re,im");
    solve->add_option("--r2bar", r2bar, "re or re,im");
    solve->add_option("--seeds", scfg.n_seeds, "Newton seeds");
    solve->add_option("--seed-box", scfg.seed_box, "seed disc radius (0: automatic)");
    solve->add_option("--damping", scfg.damping, "Newton damping");
    solve->add_option("--newton-tol", scfg.newton_tol, "residual tolerance");
    solve->add_option("--max-iter", scfg.max_iter, "Newton iterations per seed");
    solve->add_option("--dedup-tol", scfg.dedup_tol, "deduplication distance");
    solve->add_option("--rng-seed", scfg.rng_seed, "seed of the seed generator");
    solve->add_option("--system", system, "local (derived) or printed cubic equations")->check(CLI::IsMember({"local", "printed"}));
    solve->add_flag("--no-conjugate", no_conj, "disable complex-conjugate completion");
    solve->add_option("-o,--out", solve_out, "output JSON (default stdout)");

    // verify
    auto* verify = app.add_subcommand("verify", "re-certify a solution file");
    std::string verify_in, verify_out;
    std::vector<std::string> verify_lams;
    verify->add_option("--in", verify_in, "solution file")->required();
    verify->add_option("--lambda", verify_lams, "lambda samples, re or re,im");
    verify->add_option("-o,--out", verify_out, "report JSON (default stdout)");

    // qtable
    auto* qtable = app.add_subcommand("qtable", "tabulate Q_i and Q*_i");
    StateArgs qt_state;
    QArgs qt_q;
    std::string grid = "ray", qt_out, qt_abs;
    double qt_phase = 0.0, qt_rmin = 0.0, qt_rmax = 1.0;
    int qt_n = 16;
    qt_state.add(qtable);
    qt_q.add(qtable);
    qtable->add_option("--grid", grid, "ray or qq")->check(CLI::IsMember({"ray", "qq"}));
    qtable->add_option("--phase", qt_phase, "ray phase (radians)");
    qtable->add_option("--r-min", qt_rmin, "ray start");
    qtable->add_option("--r-max", qt_rmax, "ray end or lattice radius");
    qtable->add_option("--n", qt_n, "ray points, or qq base points (multiple of 4)");
    qtable->add_option("-o,--out", qt_out, "output CSV (default stdout)");
    qtable->add_option("--abs-out", qt_abs, "plot CSV of |Q| along the grid");

    // qq
    auto* qq = app.add_subcommand("qq", "QQ-tilde residuals on a lattice of lambda triples");
    StateArgs qq_state;
    QArgs qq_q;
    std::string qq_sector = "id", qq_out;
    int qq_radii = 4, qq_phases = 4;
    double qq_rmax = 1.0, qq_tol = 1e-4;
    qq_state.add(qq);
    qq_q.add(qq);
    qq->add_option("--sector", qq_sector, "Weyl sector");
    qq->add_option("--radii", qq_radii, "lattice radii");
    qq->add_option("--phases", qq_phases, "lattice phases");
    qq->add_option("--r-max", qq_rmax, "largest |lambda| of the base points");
    qq->add_option("--tol", qq_tol, "pass threshold on the calibrated residual");
    qq->add_option("-o,--out", qq_out, "report JSON (default stdout)");

    // bethe
    auto* bethe = app.add_subcommand("bethe", "zeros of Q on a ray and Bethe residuals");
    StateArgs be_state;
    QArgs be_q;
    std::string ray = "real-E", be_sector = "id", which = "Q", convention = "derived", be_out;
    std::vector<double> window{0.0, 50.0};
    int n_samples = 64;
    double root_tol = 1e-8, be_tol = 1e-4;
    be_state.add(bethe);
    be_q.add(bethe);
    bethe->add_option("--ray", ray, "real-E, or a phase of lambda in radians");
    bethe->add_option("--window", window, "range: E for real-E, |lambda| otherwise")->expected(2);
    bethe->add_option("--n-samples", n_samples, "scan resolution");
    bethe->add_option("--sector", be_sector, "Weyl sector");
    bethe->add_option("--which", which, "Q (zeros of Q_s(1)) or Qstar (zeros of Q*_s(3))")->check(CLI::IsMember({"Q", "Qstar"}));
    bethe->add_option("--convention", convention, "derived or printed phase")->check(CLI::IsMember({"derived", "printed"}));
    bethe->add_option("--root-tol", root_tol, "secant stop, relative to max |Q| on the ray");
    bethe->add_option("--tol", be_tol, "pass threshold on the Bethe residual");
    bethe->add_option("-o,--out", be_out, "report JSON (default stdout)");

    // params
    auto* params = app.add_subcommand("params", "convert between parameter systems");
    double pk = -2.5;
    std::string p_r1bar, p_r2bar, p_r1, p_r2, p_c, p_d2, p_d3;
    double p_M = 0.0;
    std::string p_E = "0", p_ell1, p_ell2;
    params->add_option("--k", pk, "level");
    params->add_option("--r1bar", p_r1bar, "oper coordinate");
    params->add_option("--r2bar", p_r2bar, "oper coordinate");
    params->add_option("--r1", p_r1, "r-pair coordinate");
    params->add_option("--r2", p_r2, "r-pair coordinate");
    params->add_option("--c", p_c, "central charge (selects k)");
    params->add_option("--delta2", p_d2, "conformal weight");
    params->add_option("--delta3", p_d3, "W3 weight");
    params->add_option("--M", p_M, "legacy exponent");
    params->add_option("--E", p_E, "legacy energy");
    params->add_option("--ell1", p_ell1, "legacy index");
    params->add_option("--ell2", p_ell2, "legacy index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (threads < 0) {
        std::cerr << "usage: --threads must be >= 0\n";
        return kUsage;
    }
    if (threads > 0) set_default_threads(threads);

    // Validation failures before any computation are usage errors.
    int stage = kUsage;
    try {
        if (*solve) {
            OperParams p;
            p.k = k;
            p.r1bar = parse_complex(r1bar);
            p.r2bar = parse_complex(r2bar);
            p.validate();
            if (N < 0) throw UsageError("--N must be >= 0");
            scfg.system = system == "local" ? MonodromySystem::Local : MonodromySystem::Printed;
            scfg.conjugate_completion = !no_conj;
            scfg.threads = threads;
            scfg.validate();
            stage = kFail;

            SolutionFile f;
            f.params = p;
            f.N = N;
            f.solver = scfg;
            if (N == 0) {
                StateSolution s;
                s.params = p;
                s.system = scfg.system;
                f.solutions.push_back(s);
            } else {
                f.solutions = newton_solve(N, p, scfg);
            }
            bool all = true;
            for (const StateSolution& s : f.solutions) {
                f.certificates.push_back(certify(s, default_certificate_lambdas()));
                all = all && f.certificates.back().passed();
            }
            emit(solve_out, dump(to_json(f)));
            std::cerr << "found " << (N == 0 ? 1 : f.solutions.size()) << " / expected " << p2_count(N)
                      << (all ? "; all certificates pass" : "; certificate failure") << "\n";
            return !f.solutions.empty() && all ? kPass : kFail;
        }

        if (*verify) {
            std::vector<cplx> lams;
            for (const auto& s : verify_lams) lams.push_back(parse_complex(s));
            if (lams.empty()) lams = default_certificate_lambdas();
            SolutionFile f;
            try {
                f = solution_file_from_json(json::parse(read_text(verify_in)));
            } catch (const json::exception& e) {
                throw UsageError(std::string("cannot parse solution file: ") + e.what());
            }
            f.params.validate();
            stage = kFail;

            json rep;
            json sols = json::array();
            bool all = true;
            for (std::size_t i = 0; i < f.solutions.size(); ++i) {
                const StateSolution& s = f.solutions[i];
                const double r = s.N == 0 ? 0.0 : residuals(s.a, s.w, s.params, s.system).norm_inf();
                const Certificates c = certify(s, lams);
                const double drift = std::abs(r - s.residual_norm);
                const bool ok = c.passed() && drift < 1e-12;
                all = all && ok;
                sols.push_back({{"index", i},
                                {"residual_norm", r},
                                {"stored_residual_norm", s.residual_norm},
                                {"residual_roundtrip", drift},
                                {"frobenius", c.frobenius},
                                {"frobenius_max", c.frobenius_max},
                                {"monodromy_deviation", c.monodromy_deviation},
                                {"pass", ok}});
            }
            json lj = json::array();
            for (const cplx l : lams) lj.push_back(complex_to_json(l));
            rep["lambdas"] = lj;
            rep["solutions"] = sols;
            rep["pass"] = all;
            emit(verify_out, dump(rep));
            return all ? kPass : kFail;
        }

        if (*qtable) {
            const StateSolution s = qt_state.load();
            const QConfig qc = qt_q.config();
            std::vector<cplx> g;
            if (grid == "ray") {
                if (qt_n < 2 || !(qt_rmax > qt_rmin) || qt_rmin < 0.0) throw UsageError("invalid ray grid");
                for (int j = 0; j < qt_n; ++j)
                    g.push_back(std::polar(qt_rmin + (qt_rmax - qt_rmin) * j / (qt_n - 1), qt_phase));
            } else {
                if (qt_n < 4 || qt_n % 4) throw UsageError("--n must be a positive multiple of 4 for the qq grid");
                g = qq_grid(phase_lattice(qt_n / 4, 4, qt_rmax), s.params.khat());
            }
            stage = kFail;
            const QTable t = extract_q(s, g, qc);
            std::ostringstream os;
            write_qtable_csv(os, t);
            emit(qt_out, os.str());
            if (!qt_abs.empty()) {
                std::ostringstream a;
                write_abs_csv(a, t);
                write_text(qt_abs, a.str());
            }
            return kPass;
        }

        if (*qq) {
            const StateSolution s = qq_state.load();
            const QConfig qc = qq_q.config();
            const WeylElement sec = sector_from(qq_sector);
            const auto base = phase_lattice(qq_radii, qq_phases, qq_rmax);
            stage = kFail;
            const QTable t = extract_q(s, qq_grid(base, s.params.khat()), qc);
            const QQReport r = qq_residuals(t, state_indices(s), sec, s.params.khat());
            json j = qq_report_json(r);
            j["pass"] = r.max_residual() < qq_tol;
            emit(qq_out, dump(j));
            std::cerr << "sector " << qq_sector << ": max calibrated residual " << format_double(r.max_residual())
                      << ", raw " << format_double(r.max_raw_residual()) << "\n";
            return r.max_residual() < qq_tol ? kPass : kFail;
        }

        if (*bethe) {
            const StateSolution s = be_state.load();
            const QConfig qc = be_q.config();
            const WeylElement sec = sector_from(be_sector);
            if (window.size() != 2 || !(window[1] > window[0]) || window[0] < 0.0) throw UsageError("invalid --window");
            RaySpec rs;
            double scale = 1.0;
            if (ray == "real-E") {
                rs.phase = real_e_phase();
                scale = 1.0 / energy_scale(s.params.k);
            } else {
                try {
                    rs.phase = std::stod(ray);
                } catch (const std::exception&) {
                    throw UsageError("--ray must be real-E or a number");
                }
            }
            rs.r_min = window[0] * scale;
            rs.r_max = window[1] * scale;
            rs.n_samples = n_samples;
            rs.validate();
            stage = kFail;

            const QEvaluator ev(s, qc);
            const QFunction Q = [&ev](cplx l) { return ev.coefficients(l, Equation::Primal); };
            const QFunction Qs = [&ev](cplx l) { return ev.coefficients(l, Equation::Dual); };
            const bool dual = which == "Qstar";
            const auto comp = static_cast<std::size_t>(dual ? sec(3) - 1 : sec(1) - 1);
            const ScalarFunction f = [&](cplx l) { return (dual ? Qs(l) : Q(l))[comp]; };
            auto roots = find_q_zeros(f, rs, sec, dual ? RootKind::ZeroOfQstar : RootKind::ZeroOfQ, root_tol);
            const BethePhase ph = convention == "derived" ? BethePhase::Derived : BethePhase::Printed;
            std::vector<ReportRoot> out;
            std::vector<double> res;
            bool ok = !roots.empty();
            for (BetheRoot& r : roots) {
                r.ba_residual = bethe_residual(r, Q, Qs, ev.indices(), s.params.khat(), ph);
                out.push_back({r.lambda_root, r.ba_residual});
                res.push_back(r.ba_residual);
                ok = ok && r.ba_residual < be_tol;
            }
            json j = relation_report(sec, {}, res, out);
            j["which"] = which;
            j["convention"] = convention;
            j["ray_phase"] = rs.phase;
            j["lambda_window"] = {rs.r_min, rs.r_max};
            if (ray == "real-E") {
                json e = json::array();
                for (const BetheRoot& r : roots) e.push_back(-energy_scale(s.params.k) * r.lambda_root.real());
                j["energies"] = e;
            }
            j["pass"] = ok;
            emit(be_out, dump(j));
            std::cerr << roots.size() << " root(s) in window\n";
            return ok ? kPass : kFail;
        }

        if (*params) {
            OperParams p;
            p.k = pk;
            RPair r;
            bool have_r = false;
            if (p_M > 0.0) {
                LegacyParams lp;
                lp.M = p_M;
                lp.E = parse_complex(p_E);
                lp.ell1 = p_ell1.empty() ? 1.0 : parse_complex(p_ell1);
                lp.ell2 = p_ell2.empty() ? 1.0 : parse_complex(p_ell2);
                const LegacyConversion lc = legacy_convert(lp);
                p = lc.oper;
                r = lc.r;
                have_r = true;
            } else if (!p_c.empty()) {
                CFTParams c;
                c.c = parse_complex(p_c);
                c.delta2 = p_d2.empty() ? 0.0 : parse_complex(p_d2);
                c.delta3 = p_d3.empty() ? 0.0 : parse_complex(p_d3);
                p = cft_to_oper(c, k_from_central_charge(c.c));
            } else if (!p_r1.empty() || !p_r2.empty()) {
                r.r1 = p_r1.empty() ? 0.0 : parse_complex(p_r1);
                r.r2 = p_r2.empty() ? 0.0 : parse_complex(p_r2);
                std::tie(p.r1bar, p.r2bar) = r_to_rbar(r);
                have_r = true;
            } else {
                p.r1bar = p_r1bar.empty() ? 0.0 : parse_complex(p_r1bar);
                p.r2bar = p_r2bar.empty() ? 0.0 : parse_complex(p_r2bar);
            }
            p.validate();
            if (!have_r) r = rbar_to_r(p.r1bar, p.r2bar);
            const CFTParams c = oper_to_cft(p);
            const Indices idx = indices_from_r(r);
            const BHKParams b = bhk_params(p, r);
            const LegacyParams lg = legacy_from_oper(p, r);
            json j;
            j["oper"] = {{"k", p.k}, {"khat", p.khat()}, {"r1bar", complex_to_json(p.r1bar)}, {"r2bar", complex_to_json(p.r2bar)}};
            j["cft"] = {{"c", complex_to_json(c.c)}, {"delta2", complex_to_json(c.delta2)}, {"delta3", complex_to_json(c.delta3)}, {"mu", complex_to_json(c.mu)}};
            j["r_pair"] = {{"r1", complex_to_json(r.r1)}, {"r2", complex_to_json(r.r2)}};
            json beta = json::array(), beta_star = json::array();
            for (std::size_t i = 0; i < 3; ++i) {
                beta.push_back(complex_to_json(idx.beta[i]));
                beta_star.push_back(complex_to_json(idx.beta_star[i]));
            }
            j["indices"] = {{"beta", beta}, {"beta_star", beta_star}};
            j["bhk"] = {{"g", b.g}, {"p1", complex_to_json(b.p1)}, {"p2", complex_to_json(b.p2)},
                        {"c1", complex_to_json(b.c1)}, {"c2", complex_to_json(b.c2)}, {"c3", complex_to_json(b.c3)}};
            j["legacy"] = {{"M", lg.M}, {"ell1", complex_to_json(lg.ell1)}, {"ell2", complex_to_json(lg.ell2)}};
            j["energy_scale"] = energy_scale(p.k);
            std::cout << dump(j);
            return kPass;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << (stage == kUsage ? "usage: " : "error: ") << e.what() << "\n";
        return stage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
    return kUsage;
}
