#include "helpers.hpp"

#include "vts/model.hpp"
#include "vts/report.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace vts;

namespace {

bool same(double a, double b)
{
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

SolveReport sample_report(std::mt19937_64& rng)
{
    SolveReport r;
    r.problem = "CANT-2-1-1-2";
    r.method = Method::ip;
    r.tolerance = 1e-5;
    r.lower_bound = 1e-7;
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int i = 1; i <= 7; ++i) {
        IterationRecord row;
        row.iteration = i;
        row.newton_steps = 1;
        row.minres_steps = 3 * i;
        row.objective = 1.0 / 3.0 + d(rng);
        row.dual_objective = std::exp(d(rng) * 40.0);
        row.scaled_gap = d(rng) * 1e-9;
        row.residual = std::ldexp(d(rng), -300);
        row.volume = 2.8 + d(rng) * 1e-12;
        row.barrier_r = d(rng);
        row.barrier_s = d(rng);
        row.min_slack = i % 2 == 0 ? not_available : d(rng);
        row.tol_mr = 1e-2;
        r.rows.push_back(row);
    }
    r.tally();
    r.objective = 12.345678901234567;
    r.dual_objective = -12.345678901234;
    r.gap = 1e-300;
    r.scaled_gap = 5e-6;
    r.residual = not_available;
    r.volume = 2.8;
    r.target_volume = 2.8;
    r.message = "quoted \"text\", with commas";
    r.wall_seconds = 0.125;
    return r;
}

} // namespace

TEST_CASE("iteration CSV round-trips exactly")
{
    std::mt19937_64 rng(81);
    const SolveReport r = sample_report(rng);
    std::stringstream ss;
    write_iteration_csv(ss, r);
    std::string header;
    std::getline(ss, header);
    CHECK(header == iteration_csv_header);
    ss.seekg(0);
    const auto rows = read_iteration_csv(ss);
    REQUIRE(rows.size() == r.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const IterationRecord& a = rows[i];
        const IterationRecord& b = r.rows[i];
        CHECK(a.iteration == b.iteration);
        CHECK(a.newton_steps == b.newton_steps);
        CHECK(a.minres_steps == b.minres_steps);
        for (auto field : {&IterationRecord::objective, &IterationRecord::dual_objective, &IterationRecord::scaled_gap,
                           &IterationRecord::residual, &IterationRecord::volume, &IterationRecord::step_inf,
                           &IterationRecord::barrier_r, &IterationRecord::barrier_s, &IterationRecord::min_slack,
                           &IterationRecord::tol_mr})
            CHECK(same(a.*field, b.*field));
    }
    std::stringstream bad("iteration,minres_steps\n1,2\n");
    CHECK_THROWS(read_iteration_csv(bad));
}

TEST_CASE("totals equal the sum of rows")
{
    std::mt19937_64 rng(82);
    const SolveReport r = sample_report(rng);
    CHECK(r.outer_iterations == 7);
    CHECK(r.newton_iterations == 7);
    CHECK(r.minres_iterations == 3 * 28);
}

TEST_CASE("summary JSON round-trips the scalar fields")
{
    std::mt19937_64 rng(83);
    const SolveReport r = sample_report(rng);
    std::stringstream ss;
    write_summary_json(ss, r);
    const SolveReport back = read_summary_json(ss);
    CHECK(back.problem == r.problem);
    CHECK(back.method == r.method);
    CHECK(back.tolerance == r.tolerance);
    CHECK(back.lower_bound == r.lower_bound);
    CHECK(back.status == r.status);
    CHECK(back.message == r.message);
    CHECK(back.outer_iterations == r.outer_iterations);
    CHECK(back.minres_iterations == r.minres_iterations);
    CHECK(back.objective == r.objective);
    CHECK(back.dual_objective == r.dual_objective);
    CHECK(back.gap == r.gap);
    CHECK(back.scaled_gap == r.scaled_gap);
    CHECK(std::isnan(back.residual));
    CHECK(back.wall_seconds == r.wall_seconds);
}

TEST_CASE("density VTK round-trips exactly")
{
    const Problem p(parse_problem_name("BRIDGE-2-1-1-3"));
    std::mt19937_64 rng(84);
    auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.0, 1.0);
    rho[0] = 1e-7;
    rho[1] = 0.1;
    rho[2] = std::nextafter(1.0, 0.0);
    std::stringstream ss;
    write_density_vtk(ss, p.mesh().finest(), rho);
    const std::string text = ss.str();
    CHECK(text.rfind("# vtk DataFile Version", 0) == 0);
    CHECK(text.find("SCALARS rho double") != std::string::npos);
    CHECK(text.find("CELL_DATA " + std::to_string(p.elements())) != std::string::npos);
    const auto back = read_density_vtk(ss);
    CHECK(back == rho);
    CHECK_THROWS(write_density_vtk(ss, p.mesh().finest(), std::vector<double>(3, 0.0)));
}

TEST_CASE("cut-off selection")
{
    const Problem p(parse_problem_name("CANT-2-2-2-2"));
    std::mt19937_64 rng(85);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.0, 1.0);
        const double vmax = *std::max_element(rho.begin(), rho.end());
        const CutoffSelection sel = cutoff_selection(rho, p.volume(), 0.8);
        double sum = 0.0, smallest_kept = 2.0;
        for (int e : sel.elements) {
            sum += rho[static_cast<std::size_t>(e)];
            smallest_kept = std::min(smallest_kept, rho[static_cast<std::size_t>(e)]);
        }
        CHECK(sum == doctest::Approx(sel.total).epsilon(1e-14));
        CHECK(sum <= 0.8 * p.volume());
        CHECK(sum >= 0.8 * p.volume() - vmax);
        // kept elements are the densest ones
        int denser_dropped = 0;
        for (std::size_t i = 0; i < rho.size(); ++i)
            if (rho[i] > smallest_kept && std::find(sel.elements.begin(), sel.elements.end(), static_cast<int>(i)) ==
                                              sel.elements.end())
                ++denser_dropped;
        CHECK(denser_dropped == 0);
    }
    const std::vector<double> rho{0.9, 0.1, 0.5, 0.7};
    const CutoffSelection sel = cutoff_selection(rho, 2.0, 0.8);
    CHECK(sel.elements == std::vector<int>{0, 3});
    std::stringstream ss;
    write_cutoff(ss, p.mesh().finest(), std::vector<double>(static_cast<std::size_t>(p.elements()), 0.5),
                 CutoffSelection{{0, 5}, 1.0});
    CHECK(ss.str() == "element,i,j,k,rho\n0,0,0,0,0.5\n5,1,1,0,0.5\n");
}

TEST_CASE("comparison table")
{
    std::mt19937_64 rng(86);
    SolveReport a = sample_report(rng);
    SolveReport b = a;
    b.method = Method::pbm;
    b.objective = a.objective * (1.0 + 3e-7);
    SolveReport c = a;
    c.lower_bound = 1e-3;
    c.objective = 13.0;
    std::stringstream ss;
    write_comparison(ss, {a, b, c});
    const std::string table = ss.str();
    CHECK(table.find("problem CANT-2-1-1-2") == 0);
    CHECK(table.find("n/c") != std::string::npos);
    CHECK(!c.objective_comparable());
    CHECK(a.objective_comparable());
    CHECK(agreement_digits(a.objective, b.objective) == 6);
    CHECK(agreement_digits(1.0, 1.0) == 17);
    CHECK(agreement_digits(1.0, 2.0) == 0);

    SolveReport other = a;
    other.problem = "CANT-2-2-2-3";
    CHECK_THROWS_AS(write_comparison(ss, {a, other}), std::invalid_argument);
    CHECK_THROWS_AS(write_comparison(ss, {a}), std::invalid_argument);
}

TEST_CASE("names")
{
    for (Method m : {Method::pbm, Method::ip, Method::doc})
        CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS(parse_method("mma"));
    CHECK(termination_name(Termination::converged) == "converged");
}
