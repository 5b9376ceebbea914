#include "qkdv/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qkdv/errors.hpp"

namespace qkdv {

Certificates certify(const StateSolution& sol, const std::vector<cplx>& lambdas) {
    Certificates c;
    for (const cplx lam : lambdas) {
        for (int ell = 1; ell <= sol.N; ++ell) {
            const FrobeniusCertificate f = frobenius_certificate(sol, ell, lam);
            c.frobenius = c.frobenius && f.passed();
            c.frobenius_max = std::max(c.frobenius_max, f.max_constraint());
            c.monodromy_deviation = std::max(c.monodromy_deviation, numeric_monodromy(sol, ell, lam).deviation);
        }
    }
    return c;
}

std::vector<cplx> default_certificate_lambdas() { return {cplx(0.3, 0.2), cplx(-0.7, 0.1)}; }

json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::Io, "complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << text;
}

namespace {

json complex_list(const std::vector<cplx>& v) {
    json a = json::array();
    for (const cplx z : v) a.push_back(complex_to_json(z));
    return a;
}

std::vector<cplx> complex_list_from(const json& j) {
    std::vector<cplx> v;
    for (const auto& e : j) v.push_back(complex_from_json(e));
    return v;
}

const char* system_name(MonodromySystem s) { return s == MonodromySystem::Local ? "local" : "printed"; }

MonodromySystem system_from(const std::string& s) {
    if (s == "local") return MonodromySystem::Local;
    if (s == "printed") return MonodromySystem::Printed;
    throw Error(ErrorKind::Io, "unknown monodromy system " + s);
}

}  // namespace

json to_json(const SolutionFile& f) {
    json j;
    j["k"] = f.params.k;
    j["r1bar"] = complex_to_json(f.params.r1bar);
    j["r2bar"] = complex_to_json(f.params.r2bar);
    j["N"] = f.N;
    json sols = json::array();
    for (std::size_t i = 0; i < f.solutions.size(); ++i) {
        const StateSolution& s = f.solutions[i];
        json e;
        e["a"] = complex_list(s.a);
        e["w"] = complex_list(s.w);
        e["residual_norm"] = s.residual_norm;
        if (i < f.certificates.size()) {
            const Certificates& c = f.certificates[i];
            e["certificates"] = {{"frobenius", c.frobenius},
                                 {"frobenius_max", c.frobenius_max},
                                 {"monodromy_deviation", c.monodromy_deviation}};
        }
        sols.push_back(e);
    }
    j["solutions"] = sols;
    const SolverConfig& c = f.solver;
    j["solver"] = {{"n_seeds", c.n_seeds},       {"seed_box", c.seed_box},     {"damping", c.damping},
                   {"newton_tol", c.newton_tol}, {"dedup_tol", c.dedup_tol},   {"max_iter", c.max_iter},
                   {"rng_seed", c.rng_seed},     {"system", system_name(c.system)},
                   {"conjugate_completion", c.conjugate_completion}};
    return j;
}

SolutionFile solution_file_from_json(const json& j) {
    try {
        SolutionFile f;
        f.params.k = j.at("k").get<double>();
        f.params.r1bar = complex_from_json(j.at("r1bar"));
        f.params.r2bar = complex_from_json(j.at("r2bar"));
        f.N = j.at("N").get<int>();
        if (j.contains("solver")) {
            const json& c = j["solver"];
            f.solver.n_seeds = c.value("n_seeds", f.solver.n_seeds);
            f.solver.seed_box = c.value("seed_box", f.solver.seed_box);
            f.solver.damping = c.value("damping", f.solver.damping);
            f.solver.newton_tol = c.value("newton_tol", f.solver.newton_tol);
            f.solver.dedup_tol = c.value("dedup_tol", f.solver.dedup_tol);
            f.solver.max_iter = c.value("max_iter", f.solver.max_iter);
            f.solver.rng_seed = c.value("rng_seed", f.solver.rng_seed);
            f.solver.conjugate_completion = c.value("conjugate_completion", f.solver.conjugate_completion);
            f.solver.system = system_from(c.value("system", std::string("local")));
        }
        for (const json& e : j.at("solutions")) {
            StateSolution s;
            s.N = f.N;
            s.params = f.params;
            s.system = f.solver.system;
            s.a = complex_list_from(e.at("a"));
            s.w = complex_list_from(e.at("w"));
            s.residual_norm = e.value("residual_norm", 0.0);
            if (s.a.size() != static_cast<std::size_t>(f.N) || s.w.size() != static_cast<std::size_t>(f.N))
                throw Error(ErrorKind::Io, "site count does not match N");
            f.solutions.push_back(s);
            if (e.contains("certificates")) {
                const json& c = e["certificates"];
                f.certificates.push_back({c.value("frobenius", false), c.value("frobenius_max", 0.0),
                                          c.value("monodromy_deviation", 0.0)});
            }
        }
        return f;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, std::string("malformed solution file: ") + e.what());
    }
}

void write_qtable_csv(std::ostream& os, const QTable& t) {
    os << "lambda_re,lambda_im";
    for (const char* name : {"Q", "Qstar"})
        for (int i = 1; i <= 3; ++i) os << ',' << name << i << "_re," << name << i << "_im";
    os << ",cond_primal,cond_dual\n";
    for (std::size_t j = 0; j < t.lambda_grid.size(); ++j) {
        os << format_double(t.lambda_grid[j].real()) << ',' << format_double(t.lambda_grid[j].imag());
        for (const auto* row : {&t.Q[j], &t.Qstar[j]})
            for (const cplx q : *row) os << ',' << format_double(q.real()) << ',' << format_double(q.imag());
        os << ',' << format_double(t.cond_primal[j]) << ',' << format_double(t.cond_dual[j]) << '\n';
    }
}

QTable read_qtable_csv(std::istream& is) {
    QTable t;
    std::string line;
    if (!std::getline(is, line) || line.rfind("lambda_re,", 0) != 0) throw Error(ErrorKind::Io, "missing QTable header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 16) throw Error(ErrorKind::Io, "QTable row must have 16 fields");
        t.lambda_grid.emplace_back(v[0], v[1]);
        std::array<cplx, 3> q{}, s{};
        for (std::size_t i = 0; i < 3; ++i) {
            q[i] = {v[2 + 2 * i], v[3 + 2 * i]};
            s[i] = {v[8 + 2 * i], v[9 + 2 * i]};
        }
        t.Q.push_back(q);
        t.Qstar.push_back(s);
        t.cond_primal.push_back(v[14]);
        t.cond_dual.push_back(v[15]);
    }
    return t;
}

void write_abs_csv(std::ostream& os, const QTable& t) {
    os << "lambda_abs,lambda_arg,absQ1,absQ2,absQ3,absQstar1,absQstar2,absQstar3\n";
    for (std::size_t j = 0; j < t.lambda_grid.size(); ++j) {
        os << format_double(std::abs(t.lambda_grid[j])) << ',' << format_double(std::arg(t.lambda_grid[j]));
        for (const auto* row : {&t.Q[j], &t.Qstar[j]})
            for (const cplx q : *row) os << ',' << format_double(std::abs(q));
        os << '\n';
    }
}

json relation_report(const WeylElement& sector, const std::vector<cplx>& calibration,
                     const std::vector<double>& residuals, const std::vector<ReportRoot>& roots) {
    json j;
    j["sector"] = weyl_name(sector);
    j["calibration"] = complex_list(calibration);
    std::vector<double> r = residuals;
    double mx = 0.0, med = 0.0;
    if (!r.empty()) {
        mx = *std::max_element(r.begin(), r.end());
        std::sort(r.begin(), r.end());
        const std::size_t n = r.size();
        med = n % 2 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
    }
    j["residual_stats"] = {{"max", mx}, {"median", med}};
    json rs = json::array();
    for (const ReportRoot& x : roots) rs.push_back({{"lambda", complex_to_json(x.lambda)}, {"ba_residual", x.ba_residual}});
    j["roots"] = rs;
    return j;
}

json qq_report_json(const QQReport& r) {
    std::vector<double> all;
    for (const auto& v : r.residuals) all.insert(all.end(), v.begin(), v.end());
    json j = relation_report(r.sector, {r.calibration_constants[0], r.calibration_constants[1]}, all, {});
    j["predicted_constants"] = complex_list({r.predicted_constants[0], r.predicted_constants[1]});
    j["raw_residual_max"] = r.max_raw_residual();
    j["triples"] = r.lambdas.size();
    return j;
}

}  // namespace qkdv
