#include <sstream>

#include "doctest.h"
#include "qkdv/errors.hpp"
#include "qkdv/io.hpp"

using namespace qkdv;

namespace {

OperParams desk() {
    OperParams p;
    p.k = -2.5;
    p.r1bar = 1.0;
    p.r2bar = 0.0;
    return p;
}

}  // namespace

TEST_CASE("solution file round trip is lossless") {
    SolutionFile f;
    f.params = desk();
    f.N = 1;
    for (const StateSolution& s : solve_n1_closed_form(f.params)) {
        f.solutions.push_back(s);
        f.certificates.push_back(certify(s, default_certificate_lambdas()));
    }
    f.solver.rng_seed = 99;
    const SolutionFile g = solution_file_from_json(json::parse(to_json(f).dump()));
    REQUIRE(g.solutions.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(g.solutions[i].a[0] == f.solutions[i].a[0]);
        CHECK(g.solutions[i].w[0] == f.solutions[i].w[0]);
        CHECK(g.solutions[i].residual_norm == f.solutions[i].residual_norm);
        CHECK(g.certificates[i].passed());
        const double r = residuals(g.solutions[i].a, g.solutions[i].w, g.params).norm_inf();
        CHECK(std::abs(r - g.solutions[i].residual_norm) < 1e-12);
    }
    CHECK(g.solver.rng_seed == 99u);
    CHECK(g.params.r1bar == f.params.r1bar);

    json bad = to_json(f);
    bad["solutions"][0]["w"].push_back(json::array({1.0, 0.0}));
    CHECK_THROWS_AS(solution_file_from_json(bad), Error);
    CHECK_THROWS_AS(solution_file_from_json(json::object()), Error);
}

TEST_CASE("ground-state record certifies vacuously") {
    StateSolution s;
    s.params = desk();
    const Certificates c = certify(s, default_certificate_lambdas());
    CHECK(c.passed());
    CHECK(c.monodromy_deviation == 0.0);
}

TEST_CASE("corrupted solution fails certification") {
    StateSolution s = solve_n1_closed_form(desk())[0];
    s.a[0] += 1e-2;
    const Certificates c = certify(s, default_certificate_lambdas());
    CHECK(c.monodromy_deviation > 1e-3);
    CHECK_FALSE(c.passed());
}

TEST_CASE("qtable csv schema and round trip") {
    StateSolution s;
    s.params = desk();
    std::vector<cplx> grid;
    for (int j = 0; j < 16; ++j) grid.push_back(j / 15.0);
    const QTable t = extract_q(s, grid);
    std::stringstream ss;
    write_qtable_csv(ss, t);
    std::string header;
    std::getline(ss, header);
    CHECK(header ==
          "lambda_re,lambda_im,Q1_re,Q1_im,Q2_re,Q2_im,Q3_re,Q3_im,Qstar1_re,Qstar1_im,Qstar2_re,Qstar2_im,"
          "Qstar3_re,Qstar3_im,cond_primal,cond_dual");
    int rows = 0;
    std::string line;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 16);

    std::stringstream again;
    write_qtable_csv(again, t);
    const QTable u = read_qtable_csv(again);
    REQUIRE(u.Q.size() == 16);
    for (std::size_t j = 0; j < 16; ++j)
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(u.Q[j][i] == t.Q[j][i]);
            CHECK(u.Qstar[j][i] == t.Qstar[j][i]);
        }
    std::stringstream junk("nope\n");
    CHECK_THROWS_AS(read_qtable_csv(junk), Error);
}

TEST_CASE("format and reports") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    const json j = relation_report(WeylElement::sigma(), {cplx(1.0, 2.0)}, {3.0, 1.0, 2.0, 10.0}, {{cplx(-1.0, 0.0), 1e-9}});
    CHECK(j["sector"] == "sigma");
    CHECK(j["residual_stats"]["max"] == 10.0);
    CHECK(j["residual_stats"]["median"] == 2.5);
    CHECK(j["roots"].size() == 1);
    CHECK(complex_from_json(j["calibration"][0]) == cplx(1.0, 2.0));
}
