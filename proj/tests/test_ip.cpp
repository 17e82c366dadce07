#include "helpers.hpp"

#include "vts/ip.hpp"
#include "vts/oracles.hpp"
#include "vts/pbm.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace vts;

namespace {

ProblemSettings ip_settings()
{
    ProblemSettings s;
    s.lower = 1e-7;
    return s;
}

IpState random_state(const Problem& p, std::mt19937_64& rng)
{
    const auto n = static_cast<std::size_t>(p.dofs());
    const auto m = static_cast<std::size_t>(p.elements());
    IpState s;
    s.u = testing::random_vector(n, rng);
    s.alpha = std::uniform_real_distribution<double>(-2.0, -0.5)(rng);
    s.rho = testing::random_vector(m, rng, 0.05, 0.95);
    s.nu_lower = testing::random_vector(m, rng, 0.05, 1.0);
    s.nu_upper = testing::random_vector(m, rng, 0.05, 1.0);
    s.r = std::uniform_real_distribution<double>(1e-3, 1e-1)(rng);
    s.s = std::uniform_real_distribution<double>(1e-3, 1e-1)(rng);
    return s;
}

IpStep random_step(const Problem& p, std::mt19937_64& rng)
{
    const auto m = static_cast<std::size_t>(p.elements());
    IpStep d;
    d.du = testing::random_vector(static_cast<std::size_t>(p.dofs()), rng);
    d.dalpha = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    d.drho = testing::random_vector(m, rng);
    d.dnu_lower = testing::random_vector(m, rng);
    d.dnu_upper = testing::random_vector(m, rng);
    return d;
}

IpState moved(const IpState& s, const IpStep& d, double h)
{
    IpState t = s;
    axpy(h, d.du, t.u);
    t.alpha += h * d.dalpha;
    axpy(h, d.drho, t.rho);
    axpy(h, d.dnu_lower, t.nu_lower);
    axpy(h, d.dnu_upper, t.nu_upper);
    return t;
}

Eigen::VectorXd stack(const IpResidual& r)
{
    std::vector<double> v(r.res1);
    v.push_back(r.res2);
    v.insert(v.end(), r.res3.begin(), r.res3.end());
    v.insert(v.end(), r.res4.begin(), r.res4.end());
    v.insert(v.end(), r.res5.begin(), r.res5.end());
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

TEST_CASE("residual at the initial point")
{
    const Problem p(parse_problem_name("CANT-1-1-1-1"), ip_settings());
    const IpState s = IpState::initial(p);
    const IpResidual r = ip_residual(p, s);
    for (std::size_t j = 0; j < r.res1.size(); ++j)
        CHECK(r.res1[j] == -p.load()[j]);
    CHECK(r.res2 == doctest::Approx(0.0).scale(1.0));
    CHECK(r.res3[0] == 1.0);
    CHECK(r.res4[0] == doctest::Approx(0.35 - 1e-7 - 1e-2).epsilon(1e-14));
    CHECK(r.res5[0] == doctest::Approx(0.65 - 1e-2).epsilon(1e-14));
    CHECK(s.r_next == doctest::Approx(0.2 * (0.35 - 1e-7)));
    CHECK(s.s_next == doctest::Approx(0.2 * 0.65));
    const auto [a, b] = duality_measures(p, s);
    CHECK(a == doctest::Approx(0.35 - 1e-7));
    CHECK(b == doctest::Approx(0.65));
}

TEST_CASE("Jacobian: dense oracle and Taylor remainder")
{
    std::mt19937_64 rng(61);
    const Problem p(parse_problem_name("CANT-1-2-1-2"), ip_settings());
    for (int trial = 0; trial < 3; ++trial) {
        const IpState s = random_state(p, rng);
        const IpStep d = random_step(p, rng);
        const Eigen::VectorXd jd = stack(ip_jacobian_apply(p, s, d));
        const auto sys = oracles::ip_newton_system(p, s);
        CHECK((sys.matrix * oracles::stack(d) - jd).norm() <= 1e-12 * jd.norm());
        CHECK((sys.rhs + stack(ip_residual(p, s))).norm() <= 1e-14 * sys.rhs.norm());

        const Eigen::VectorXd r0 = stack(ip_residual(p, s));
        double previous = 0.0;
        for (double h : {1e-1, 5e-2, 2.5e-2}) {
            const double remainder = (stack(ip_residual(p, moved(s, d, h))) - r0 - h * jd).norm();
            if (previous > 0.0)
                CHECK(std::log2(previous / remainder) >= 1.9);
            previous = remainder;
        }
    }
}

TEST_CASE("Schur matrix and middle factor")
{
    std::mt19937_64 rng(62);
    const Problem p(parse_problem_name("BRIDGE-2-1-1-2"), ip_settings());
    for (int trial = 0; trial < 3; ++trial) {
        const IpState s = random_state(p, rng);
        const auto d = ip_middle_factor(p, s);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double ref = 1.0 / (s.nu_lower[i] / (s.rho[i] - 1e-7) + s.nu_upper[i] / (1.0 - s.rho[i]));
            CHECK(d[i] == doctest::Approx(ref).epsilon(1e-14));
            CHECK(d[i] > 0.0);
        }
        const BorderedMatrix schur = ip_schur(p, s);
        CHECK(schur.block.nnz() == p.assembler().pattern().nnz());
        PbmSolver pbm(p);
        CHECK(pbm_schur(p, pbm.state(), pbm_evaluate(p, pbm.state())).block.nnz() == schur.block.nnz());
        const Eigen::MatrixXd m = oracles::to_dense(schur);
        CHECK((m - m.transpose()).norm() <= 1e-13 * m.norm());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
    IpState bad = random_state(p, rng);
    bad.rho[0] = 1.0;
    CHECK_THROWS(ip_middle_factor(p, bad));
}

TEST_CASE("eliminated system is consistent with the full Newton system")
{
    std::mt19937_64 rng(63);
    const Problem p(parse_problem_name("CANT-1-1-1-2"), ip_settings());
    IpSolver solver(p);
    for (int trial = 0; trial < 3; ++trial) {
        solver.state() = random_state(p, rng);
        const IpResidual res = ip_residual(p, solver.state());
        const IpStep step = solver.direction(res, 1e-13);
        const Eigen::VectorXd jd = stack(ip_jacobian_apply(p, solver.state(), step));
        const Eigen::VectorXd r = stack(res);
        CHECK((jd + r).norm() <= 1e-9 * r.norm());
    }
}

TEST_CASE("zero residual gives a zero step")
{
    std::mt19937_64 rng(64);
    const Problem p(parse_problem_name("CANT-1-1-1-2"), ip_settings());
    const IpState s = random_state(p, rng);
    IpResidual zero;
    zero.res1.assign(s.u.size(), 0.0);
    zero.res3.assign(s.rho.size(), 0.0);
    zero.res4.assign(s.rho.size(), 0.0);
    zero.res5.assign(s.rho.size(), 0.0);
    CHECK(norm_inf(ip_schur_rhs(p, s, zero)) == 0.0);
    IpStep step;
    step.du.assign(s.u.size(), 0.0);
    ip_reconstruct(p, s, zero, step);
    CHECK(norm_inf(step.drho) == 0.0);
    CHECK(norm_inf(step.dnu_lower) == 0.0);
    CHECK(norm_inf(step.dnu_upper) == 0.0);
}

TEST_CASE("step lengths")
{
    const Problem p(parse_problem_name("CANT-1-1-1-1"), ip_settings());
    IpState s = IpState::initial(p);
    s.rho = {0.5};
    s.nu_lower = {2.0};
    s.nu_upper = {1.0};
    IpStep d;
    d.du.assign(s.u.size(), 0.0);
    d.drho = {-1.0};
    d.dnu_lower = {-4.0};
    d.dnu_upper = {0.5};
    StepLengths k = ip_step_lengths(p, s, d, 0.9);
    CHECK(k.primal == doctest::Approx(0.9 * (0.5 - 1e-7)));
    CHECK(k.nu_lower == doctest::Approx(0.45));
    CHECK(k.nu_upper == 1.0);
    CHECK(k.alpha == 1.0);
    d.drho = {0.1};
    d.dnu_lower = {0.0};
    k = ip_step_lengths(p, s, d, 0.9);
    CHECK(k.primal == 1.0);
    CHECK(k.nu_lower == 1.0);
    d.drho = {2.0};
    k = ip_step_lengths(p, s, d, 0.9);
    CHECK(k.primal == doctest::Approx(0.225));
}

TEST_CASE("updates stay strictly interior")
{
    std::mt19937_64 rng(65);
    const Problem p(parse_problem_name("CANT-2-1-1-1"), ip_settings());
    for (int trial = 0; trial < 100; ++trial) {
        IpState s = random_state(p, rng);
        IpStep d = random_step(p, rng);
        const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-2.0, 3.0)(rng));
        for (auto* v : {&d.drho, &d.dnu_lower, &d.dnu_upper})
            for (double& x : *v)
                x *= scale;
        ip_advance(s, d, ip_step_lengths(p, s, d, 0.9));
        CHECK(min_slack(p, s) > 0.0);
        for (std::size_t i = 0; i < s.rho.size(); ++i) {
            CHECK(s.nu_lower[i] > 0.0);
            CHECK(s.nu_upper[i] > 0.0);
        }
    }
}

TEST_CASE("run decreases the barrier parameters and converges")
{
    const Problem p(parse_problem_name("CANT-1-1-1-2"), ip_settings());
    IpSolver solver(p);
    const SolveReport report = solver.run();
    REQUIRE(report.converged());
    const auto& rows = report.rows;
    for (std::size_t i = 0; i + 5 < rows.size(); ++i) {
        CHECK(rows[i + 5].barrier_r < rows[i].barrier_r);
        CHECK(rows[i + 5].barrier_s < rows[i].barrier_s);
    }
    for (const IterationRecord& row : rows) {
        CHECK(row.newton_steps == 1);
        CHECK(row.min_slack > 0.0);
    }
    CHECK(report.scaled_gap < 1e-5);
    CHECK(report.scaled_gap > -1e-6);
    CHECK(std::abs(report.volume - p.volume()) / p.volume() < 10.0 * 1e-5);
}
