#include "helpers.hpp"

#include "vts/model.hpp"
#include "vts/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace vts;

namespace {

std::vector<double> solve_dense(const Problem& p, std::span<const double> rho)
{
    const Eigen::VectorXd u = oracles::stiffness_dense(p, rho).llt().solve(
        Eigen::Map<const Eigen::VectorXd>(p.load().data(), p.dofs()));
    return {u.data(), u.data() + u.size()};
}

} // namespace

TEST_CASE("objectives at trivial points")
{
    const Problem p(parse_problem_name("CANT-2-1-1-2"));
    const std::vector<double> u(static_cast<std::size_t>(p.dofs()), 0.0);
    const std::vector<double> zero(static_cast<std::size_t>(p.elements()), 0.0);
    CHECK(primal_objective(p, u) == 0.0);
    CHECK(dual_objective(p, u, 2.0, zero, zero) == doctest::Approx(2.0 * p.volume()));
    CHECK(duality_gap(p, u, 0.0) == 0.0);
    CHECK(p.volume() == doctest::Approx(0.35 * p.elements()));
}

TEST_CASE("single element optimum has zero duality gap")
{
    const Problem p(parse_problem_name("CANT-1-1-1-1"));
    const std::vector<double> rho{p.volume()};
    const auto u = solve_dense(p, rho);
    const double q = p.assembler().energies(u)[0];
    CHECK(duality_gap(p, u, q) == doctest::Approx(0.0).scale(q));
    CHECK(primal_objective(p, u) == doctest::Approx(q * p.volume()).epsilon(1e-12));
    const DualPoint d = complete_dual_point(p, u, q);
    CHECK(d.nu_lower[0] == 0.0);
    CHECK(d.nu_upper[0] == 0.0);
    const GapReport g = gap_report(p, u, q, d.nu_lower, d.nu_upper, GapScaling::primal);
    CHECK(std::abs(g.scaled_gap) < 1e-12);
    // any other alpha leaves a positive gap
    CHECK(duality_gap(p, u, 1.1 * q) > 0.0);
    CHECK(duality_gap(p, u, 0.9 * q) > 0.0);
}

TEST_CASE("dual completion")
{
    const Problem p(parse_problem_name("BRIDGE-2-1-1-2"));
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = testing::random_vector(static_cast<std::size_t>(p.dofs()), rng);
        const auto q = p.assembler().energies(u);
        const double alpha = q[rng() % q.size()];
        const DualPoint d = complete_dual_point(p, u, alpha);
        CHECK(dual_infeasibility(p, d) <= 1e-14 * (1.0 + alpha));
        const double dual = dual_objective(p, d.u, d.alpha, d.nu_lower, d.nu_upper);
        const double ns = nonsmooth_objective(p, u, alpha);
        CHECK(dual == doctest::Approx(-ns).epsilon(1e-12));
        double fu = 0.0;
        for (int i = 0; i < p.dofs(); ++i)
            fu += p.load()[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
        CHECK(duality_gap(p, fu, alpha, q) == doctest::Approx(duality_gap(p, u, alpha)).epsilon(1e-12));
    }
}

TEST_CASE("weak duality")
{
    const Problem p(parse_problem_name("CANT-2-2-1-1"));
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        const auto rho = oracles::project_feasible(p, testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.0, 1.0));
        const double c = oracles::compliance_dense(p, rho);
        // a perturbed equilibrium keeps the bound meaningful
        auto u = solve_dense(p, rho);
        for (double& x : u)
            x *= 1.0 + 0.2 * (std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
        const auto q = p.assembler().energies(u);
        const double alpha = *std::max_element(q.begin(), q.end()) * std::uniform_real_distribution<double>(0.0, 1.2)(rng);
        CHECK(nonsmooth_objective(p, u, alpha) <= c * (1.0 + 1e-12));
    }
}

TEST_CASE("four-element optimum agrees with a grid search")
{
    const Problem p(parse_problem_name("CANT-2-2-1-1"));
    const auto sol = oracles::primal_minimum(p);
    // exhaustive grid on the feasible slice with step 0.02
    double best = std::numeric_limits<double>::infinity();
    const int steps = 50;
    for (int a = 0; a <= steps; ++a)
        for (int b = 0; b <= steps; ++b)
            for (int c = 0; c <= steps; ++c) {
                const double r3 = p.volume() - (a + b + c) / static_cast<double>(steps);
                if (r3 < 0.0 || r3 > 1.0)
                    continue;
                const std::vector<double> rho{a / double(steps), b / double(steps), c / double(steps), r3};
                best = std::min(best, oracles::compliance_dense(p, rho));
            }
    CHECK(sol.compliance <= best * (1.0 + 1e-12));
    CHECK(best <= sol.compliance * 1.01);
    // dual side: the completed dual point at the optimum closes the gap
    const auto u = solve_dense(p, sol.rho);
    const auto q = p.assembler().energies(u);
    double alpha = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (sol.rho[i] > 1e-6 && sol.rho[i] < 1.0 - 1e-6)
            alpha = q[i];
    REQUIRE(alpha > 0.0);
    CHECK(nonsmooth_objective(p, u, alpha) == doctest::Approx(sol.compliance).epsilon(1e-6));
}

TEST_CASE("mirror-symmetric two-element problem")
{
    const Problem p(parse_problem_name("CANT-1-2-1-1"));
    const auto sol = oracles::primal_minimum(p);
    CHECK(sol.rho[0] == doctest::Approx(sol.rho[1]).epsilon(1e-8));
    CHECK(sol.rho[0] == doctest::Approx(0.5 * p.volume()).epsilon(1e-8));
}

TEST_CASE("state solver and compliance")
{
    const Problem p(parse_problem_name("BRIDGE-2-1-1-3"));
    std::mt19937_64 rng(43);
    const auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.05, 1.0);
    StateSolver solver(p);
    std::vector<double> u(static_cast<std::size_t>(p.dofs()), 0.0);
    const MinresResult r = solver.solve(rho, u, 1e-10);
    CHECK(r.converged);
    std::vector<double> ku(u.size());
    p.assembler().apply_stiffness(rho, u, ku);
    double res = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        res += std::pow(p.load()[i] - ku[i], 2);
        fn += std::pow(p.load()[i], 2);
    }
    CHECK(std::sqrt(res) <= 1e-10 * std::sqrt(fn));
    CHECK(compliance(p, rho) == doctest::Approx(primal_objective(p, u)).epsilon(1e-8));
    // warm start from the solution costs no iterations
    CHECK(solver.solve(rho, u, 1e-8).iterations == 0);
}

TEST_CASE("bounds")
{
    Problem p(parse_problem_name("CANT-2-1-1-1"));
    p.set_bounds(1e-3, 1.0);
    CHECK(p.lower()[0] == 1e-3);
    CHECK_THROWS_AS(p.set_bounds(0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(p.set_bounds(0.0, 0.3), std::invalid_argument);
}
