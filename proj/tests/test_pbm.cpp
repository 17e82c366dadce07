#include "helpers.hpp"

#include "vts/oracles.hpp"
#include "vts/pbm.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace vts;

namespace {

PbmState random_state(const Problem& p, std::mt19937_64& rng)
{
    const auto n = static_cast<std::size_t>(p.dofs());
    const auto m = static_cast<std::size_t>(p.elements());
    PbmState s;
    s.u = testing::random_vector(n, rng);
    s.alpha = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    s.nu_lower = testing::random_vector(m, rng, 0.05, 1.0);
    s.nu_upper = testing::random_vector(m, rng, 0.05, 1.0);
    s.rho = testing::random_vector(m, rng, 0.1, 1.0);
    s.mu_lower = testing::random_vector(m, rng, 0.1, 1.0);
    s.mu_upper = testing::random_vector(m, rng, 0.1, 1.0);
    s.p = testing::random_vector(m, rng, 0.1, 1.0);
    s.q_lower = testing::random_vector(m, rng, 0.1, 1.0);
    s.q_upper = testing::random_vector(m, rng, 0.1, 1.0);
    return s;
}

Eigen::VectorXd stack_gradient(const PbmEvaluation& e)
{
    const auto n = static_cast<Eigen::Index>(e.grad_u.size());
    const auto m = static_cast<Eigen::Index>(e.grad_nu_lower.size());
    Eigen::VectorXd g(n + 1 + 2 * m);
    g << Eigen::Map<const Eigen::VectorXd>(e.grad_u.data(), n), e.grad_alpha,
        Eigen::Map<const Eigen::VectorXd>(e.grad_nu_lower.data(), m),
        Eigen::Map<const Eigen::VectorXd>(e.grad_nu_upper.data(), m);
    return g;
}

} // namespace

TEST_CASE("initial state")
{
    const Problem p(parse_problem_name("CANT-2-1-1-2"));
    const PbmState s = PbmState::initial(p);
    CHECK(s.alpha == 1.0);
    CHECK(norm_inf(s.u) == 0.0);
    for (std::size_t i = 0; i < s.rho.size(); ++i) {
        CHECK(s.rho[i] == doctest::Approx(p.volume() / p.elements()));
        CHECK(s.nu_lower[i] == 1.0);
        CHECK(s.mu_upper[i] == 1.0);
        CHECK(s.p[i] == 1.0);
    }
}

TEST_CASE("gradient matches the dense oracle and finite differences")
{
    std::mt19937_64 rng(51);
    for (const char* name : {"CANT-1-1-1-2", "BRIDGE-2-1-1-2"}) {
        CAPTURE(name);
        const Problem p(parse_problem_name(name));
        for (int trial = 0; trial < 3; ++trial) {
            const PbmState s = random_state(p, rng);
            const PbmEvaluation e = pbm_evaluate(p, s);
            const Eigen::VectorXd g = stack_gradient(e);
            const Eigen::VectorXd ref = oracles::pbm_gradient(p, s);
            CHECK((g - ref).norm() <= 1e-12 * ref.norm());
            CHECK(e.value == doctest::Approx(pbm_lagrangian(p, s)).epsilon(1e-14));
        }
    }
    const Problem p(parse_problem_name("CANT-1-1-1-1"));
    const PbmState s = random_state(p, rng);
    const Eigen::VectorXd fd = oracles::pbm_gradient_fd(p, s, 1e-6);
    const Eigen::VectorXd g = stack_gradient(pbm_evaluate(p, s));
    CHECK((g - fd).lpNorm<Eigen::Infinity>() <= 1e-6 * g.lpNorm<Eigen::Infinity>());
}

TEST_CASE("zero displacement gradient is minus the load")
{
    const Problem p(parse_problem_name("CANT-2-1-1-2"));
    PbmState s = PbmState::initial(p);
    s.alpha = 50.0;
    const PbmEvaluation e = pbm_evaluate(p, s);
    for (std::size_t j = 0; j < e.grad_u.size(); ++j)
        CHECK(e.grad_u[j] == doctest::Approx(-p.load()[j]).scale(1.0));
    for (double q : e.q)
        CHECK(q == 0.0);
}

TEST_CASE("Schur matrix")
{
    std::mt19937_64 rng(52);
    const Problem p(parse_problem_name("CANT-1-2-1-2"));
    for (int trial = 0; trial < 3; ++trial) {
        const PbmState s = random_state(p, rng);
        const PbmEvaluation e = pbm_evaluate(p, s);
        const BorderedMatrix schur = pbm_schur(p, s, e);
        CHECK(schur.block.nnz() == p.assembler().pattern().nnz());
        const Eigen::MatrixXd d = oracles::to_dense(schur);
        CHECK((d - d.transpose()).norm() <= 1e-13 * d.norm());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().maxCoeff());
    }
}

TEST_CASE("Newton direction solves the full Hessian system and descends")
{
    std::mt19937_64 rng(53);
    const Problem p(parse_problem_name("CANT-1-1-1-2"));
    PbmSolver solver(p);
    for (int trial = 0; trial < 3; ++trial) {
        const PbmState s = random_state(p, rng);
        solver.state() = s;
        const PbmEvaluation e = pbm_evaluate(p, s);
        const PbmStep step = solver.direction(e, 1e-13);
        const Eigen::VectorXd ref = oracles::pbm_newton_system(p, s).solve();
        CHECK((oracles::stack(step) - ref).norm() <= 1e-8 * ref.norm());
        CHECK(pbm_slope(e, step) < 0.0);
        // Armijo holds for a small enough step
        const double slope = pbm_slope(e, step);
        double kappa = 1.0;
        while (pbm_lagrangian(p, pbm_advance(s, step, kappa)) > e.value + 1e-4 * kappa * slope && kappa > 1e-12)
            kappa *= 0.5;
        CHECK(kappa > 1e-12);
    }
}

TEST_CASE("inner Newton loop")
{
    const Problem p(parse_problem_name("CANT-1-1-1-2"));
    PbmSolver solver(p);
    const double before = pbm_lagrangian(p, solver.state());
    const NewtonOutcome first = solver.minimize(1.0);
    CHECK(first.steps <= 10);
    CHECK(first.residual < 1.0);
    CHECK(pbm_lagrangian(p, solver.state()) <= before);
    CHECK(static_cast<int>(solver.minres_history().size()) == first.steps);

    const NewtonOutcome tight = solver.minimize(1e-9);
    CHECK(!tight.stalled);
    CHECK(tight.residual < 1e-9);
    // at the minimizer no further step is taken
    const NewtonOutcome again = solver.minimize(1e-9);
    CHECK(again.steps == 0);
    CHECK(again.minres_steps == 0);
}

TEST_CASE("multiplier update safeguard")
{
    const Problem p(parse_problem_name("CANT-1-1-1-1"));
    PbmSolver solver(p);
    PbmState& s = solver.state();
    s.u.assign(s.u.size(), 0.0); // q = 0
    s.alpha = 0.0;
    s.rho = {1.0};
    s.mu_lower = {1.0};
    s.mu_upper = {1.0};
    s.p = {1.0};
    s.q_lower = {1.0};
    s.q_upper = {1.0};

    SUBCASE("large factor is capped at 1/beta")
    {
        s.nu_lower = {4.0}; // phi'(4) = 5
        s.nu_upper = {0.0};
        solver.update_multipliers(pbm_evaluate(p, s));
        CHECK(s.rho[0] == doctest::Approx(1.0 / 0.3));
        CHECK(s.mu_lower[0] == doctest::Approx(0.3)); // phi'(-4) = 1/16
        CHECK(s.mu_upper[0] == 1.0);                  // phi'(0) = 1
    }
    SUBCASE("small factor is capped at beta")
    {
        s.nu_lower = {0.0};
        s.nu_upper = {0.9}; // phi'(-0.9) = 0.278
        solver.update_multipliers(pbm_evaluate(p, s));
        CHECK(s.rho[0] == doctest::Approx(0.3));
        CHECK(s.mu_lower[0] == 1.0);
        CHECK(s.mu_upper[0] == doctest::Approx(0.3)); // phi'(-0.9) again
    }
    SUBCASE("within the safeguard the factor is applied")
    {
        s.nu_lower = {0.5}; // phi'(0.5) = 1.5
        s.nu_upper = {0.0};
        solver.update_multipliers(pbm_evaluate(p, s), true);
        CHECK(s.rho[0] == doctest::Approx(1.5));
        CHECK(s.mu_lower[0] == 1.0); // only rho in the final update
    }
}

TEST_CASE("penalty parameters shrink monotonically to their floors")
{
    const Problem p(parse_problem_name("CANT-1-1-1-1"));
    PbmSolver solver(p);
    double previous = solver.state().p[0];
    for (int k = 0; k < 30; ++k) {
        solver.update_penalties();
        const double now = solver.state().p[0];
        CHECK(now <= previous);
        CHECK(now >= solver.config().p_min);
        CHECK(solver.state().q_lower[0] >= solver.config().q_lower_min);
        CHECK(solver.state().q_upper[0] >= solver.config().q_upper_min);
        previous = now;
    }
    CHECK(previous == solver.config().p_min);
    solver.update_penalties();
    CHECK(solver.state().p[0] == solver.config().p_min);
}

TEST_CASE("full solve reaches the primal minimum")
{
    const Problem p(parse_problem_name("CANT-2-1-1-1"));
    PbmConfig config;
    config.tolerance = 1e-7;
    PbmSolver solver(p, config);
    const SolveReport report = solver.run();
    REQUIRE(report.converged());
    CHECK(std::abs(report.scaled_gap) < 1e-7);
    const auto ref = oracles::primal_minimum(p);
    CHECK(report.objective == doctest::Approx(ref.compliance).epsilon(1e-6));
    CHECK(report.volume == doctest::Approx(p.volume()).epsilon(1e-6));
    int newton = 0, minres = 0;
    for (const IterationRecord& row : report.rows) {
        newton += row.newton_steps;
        minres += row.minres_steps;
    }
    CHECK(report.newton_iterations == newton);
    CHECK(report.minres_iterations == minres);
    CHECK(report.outer_iterations == static_cast<int>(report.rows.size()));
}
