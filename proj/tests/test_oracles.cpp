#include "helpers.hpp"

#include "vts/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace vts;

TEST_CASE("golden section")
{
    CHECK(oracles::golden_section([](double t) { return (t - 0.3) * (t - 0.3); }, 0.0, 1.0, 1e-12) ==
          doctest::Approx(0.3).epsilon(1e-9));
    CHECK(oracles::golden_section([](double t) { return t; }, 0.0, 1.0, 1e-12) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(oracles::golden_section([](double t) { return -t; }, 0.0, 2.0, 1e-12) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("projection onto the feasible set")
{
    const Problem p(parse_problem_name("CANT-3-2-1-1"));
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, -2.0, 3.0);
        const auto y = oracles::project_feasible(p, x);
        CHECK(std::accumulate(y.begin(), y.end(), 0.0) == doctest::Approx(p.volume()).epsilon(1e-12));
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(y[i] >= p.lower()[i]);
            CHECK(y[i] <= p.upper()[i]);
        }
        // idempotent, and no feasible point is closer
        const auto z = oracles::project_feasible(p, y);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(z[i] == doctest::Approx(y[i]).epsilon(1e-12));
        const auto other = oracles::project_feasible(p, testing::random_vector(x.size(), rng, 0.0, 1.0));
        double dy = 0.0, dother = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            dy += (x[i] - y[i]) * (x[i] - y[i]);
            dother += (x[i] - other[i]) * (x[i] - other[i]);
        }
        CHECK(dy <= dother + 1e-12);
    }
}

TEST_CASE("primal minimum beats feasible points and meets the optimality conditions")
{
    const Problem p(parse_problem_name("CANT-2-1-1-1"));
    const auto sol = oracles::primal_minimum(p);
    CHECK(std::accumulate(sol.rho.begin(), sol.rho.end(), 0.0) == doctest::Approx(p.volume()).epsilon(1e-12));
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rho = oracles::project_feasible(p, testing::random_vector(sol.rho.size(), rng, 0.0, 1.0));
        CHECK(sol.compliance <= oracles::compliance_dense(p, rho) * (1.0 + 1e-12));
    }
    // free elements share the same energy density
    const Eigen::MatrixXd k = oracles::stiffness_dense(p, sol.rho);
    const Eigen::VectorXd u = k.llt().solve(Eigen::Map<const Eigen::VectorXd>(p.load().data(), p.dofs()));
    std::vector<double> q;
    for (int e = 0; e < p.elements(); ++e)
        if (sol.rho[static_cast<std::size_t>(e)] > 1e-8 && sol.rho[static_cast<std::size_t>(e)] < 1.0 - 1e-8)
            q.push_back(0.5 * u.dot(oracles::element_matrix_global(p, e) * u));
    REQUIRE(!q.empty());
    for (double x : q)
        CHECK(x == doctest::Approx(q.front()).epsilon(1e-6));
}
