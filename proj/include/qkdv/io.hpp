#pragma once

// Solution files (JSON), Q tables (CSV) and relation reports, plus the certification
// bundle written next to each solution.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "qkdv/bethe.hpp"
#include "qkdv/connection.hpp"
#include "qkdv/trivmon.hpp"

namespace qkdv {

using json = nlohmann::json;

struct Certificates {
    bool frobenius = true;  // every site and lambda sample
    double frobenius_max = 0.0;
    double monodromy_deviation = 0.0;  // max over sites and lambda samples

    bool passed(double monodromy_tol = 1e-6) const { return frobenius && monodromy_deviation < monodromy_tol; }
};

/// Frobenius certificates and numeric monodromy at every site for each lambda. N = 0 passes vacuously.
Certificates certify(const StateSolution& sol, const std::vector<cplx>& lambdas);

std::vector<cplx> default_certificate_lambdas();

struct SolutionFile {
    OperParams params;
    int N = 0;
    std::vector<StateSolution> solutions;
    std::vector<Certificates> certificates;  // empty or one per solution
    SolverConfig solver;
};

json to_json(const SolutionFile& f);
SolutionFile solution_file_from_json(const json& j);

json complex_to_json(cplx z);
cplx complex_from_json(const json& j);

/// 17 significant digits.
std::string format_double(double x);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Columns lambda_re, lambda_im, Q1_re, Q1_im, ..., Qstar3_im, cond_primal, cond_dual.
void write_qtable_csv(std::ostream& os, const QTable& t);
QTable read_qtable_csv(std::istream& is);
/// |lambda|, arg lambda and |Q_i|, |Q*_i| for plotting along a ray.
void write_abs_csv(std::ostream& os, const QTable& t);

struct ReportRoot {
    cplx lambda{};
    double ba_residual = 0.0;
};

/// {sector, calibration, residual_stats: {max, median}, roots: [{lambda, ba_residual}]}.
json relation_report(const WeylElement& sector, const std::vector<cplx>& calibration,
                     const std::vector<double>& residuals, const std::vector<ReportRoot>& roots);
json qq_report_json(const QQReport& r);

}  // namespace qkdv
