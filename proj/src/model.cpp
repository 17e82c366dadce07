#include "vts/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vts {

Problem::Problem(const ProblemName& name, const ProblemSettings& settings)
    : name_(name), settings_(settings), mesh_(build_hierarchy(name.spec, BoundarySpec{name.family, settings.load}))
{
    if (!(settings.volume_fraction > 0.0))
        throw std::invalid_argument("problem: volume fraction must be positive");
    assembler_ = std::make_unique<Assembler>(mesh_.finest(), element_stiffness(settings.material, mesh_.finest().edge));
    volume_ = settings.volume_fraction * elements();
    set_bounds(settings.lower, settings.upper);
}

void Problem::set_bounds(double lower, double upper)
{
    if (!(lower >= 0.0) || !(upper > lower))
        throw std::invalid_argument("problem: density bounds must satisfy 0 <= lower < upper");
    const double m = elements();
    if (!(lower * m < volume_ && volume_ < upper * m))
        throw std::invalid_argument("problem: volume budget is not strictly feasible for the density bounds");
    settings_.lower = lower;
    settings_.upper = upper;
    lower_.assign(static_cast<std::size_t>(elements()), lower);
    upper_.assign(static_cast<std::size_t>(elements()), upper);
}

double primal_objective(const Problem& problem, std::span<const double> u)
{
    return 0.5 * dot(problem.load(), u);
}

double dual_objective(const Problem& problem, std::span<const double> u, double alpha,
                      std::span<const double> nu_lower, std::span<const double> nu_upper)
{
    return alpha * problem.volume() - dot(problem.load(), u) - dot(problem.lower(), nu_lower) +
           dot(problem.upper(), nu_upper);
}

namespace {

double min_terms(const Problem& problem, double alpha, std::span<const double> q)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double slack = alpha - q[i];
        sum += std::min(lo[i] * slack, up[i] * slack);
    }
    return sum;
}

} // namespace

double duality_gap(const Problem& problem, double f_dot_u, double alpha, std::span<const double> q)
{
    if (q.size() != static_cast<std::size_t>(problem.elements()))
        throw std::invalid_argument("duality_gap: energy vector length does not match element count");
    return -0.5 * f_dot_u + alpha * problem.volume() - min_terms(problem, alpha, q);
}

double duality_gap(const Problem& problem, std::span<const double> u, double alpha)
{
    const auto q = problem.assembler().energies(u);
    return duality_gap(problem, dot(problem.load(), u), alpha, q);
}

double nonsmooth_objective(const Problem& problem, std::span<const double> u, double alpha)
{
    const auto q = problem.assembler().energies(u);
    return -alpha * problem.volume() + dot(problem.load(), u) + min_terms(problem, alpha, q);
}

DualPoint complete_dual_point(const Problem& problem, std::span<const double> u, double alpha)
{
    DualPoint point;
    point.u.assign(u.begin(), u.end());
    point.alpha = alpha;
    const auto q = problem.assembler().energies(u);
    point.nu_lower.resize(q.size());
    point.nu_upper.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        point.nu_lower[i] = std::max(alpha - q[i], 0.0);
        point.nu_upper[i] = std::max(q[i] - alpha, 0.0);
    }
    return point;
}

double dual_infeasibility(const Problem& problem, const DualPoint& point)
{
    const auto q = problem.assembler().energies(point.u);
    double worst = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        worst = std::max(worst, q[i] - point.alpha + point.nu_lower[i] - point.nu_upper[i]);
        worst = std::max(worst, -point.nu_lower[i]);
        worst = std::max(worst, -point.nu_upper[i]);
    }
    return worst;
}

GapReport gap_report(const Problem& problem, std::span<const double> u, double alpha,
                     std::span<const double> nu_lower, std::span<const double> nu_upper, GapScaling scaling)
{
    GapReport r;
    const double fu = dot(problem.load(), u);
    r.primal = 0.5 * fu;
    r.dual = dual_objective(problem, u, alpha, nu_lower, nu_upper);
    r.gap = duality_gap(problem, fu, alpha, problem.assembler().energies(u));
    r.scaled_gap = scaling == GapScaling::dual ? std::abs(r.gap / r.dual) : r.gap / r.primal;
    return r;
}

StateSolver::StateSolver(const Problem& problem, SmootherConfig smoother) : problem_(&problem), smoother_(smoother) {}

MinresResult StateSolver::solve(std::span<const double> rho, std::span<double> u, double tolerance, int max_iterations,
                               int min_iterations)
{
    const Assembler& assembler = problem_->assembler();
    BorderedMatrix k;
    k.block = assembler.assemble(rho);
    if (mg_)
        mg_->update(std::move(k));
    else
        mg_ = std::make_unique<MultigridPreconditioner>(problem_->mesh(), std::move(k), smoother_);
    const MultigridPreconditioner& mg = *mg_;
    MinresConfig config;
    config.tolerance = tolerance;
    config.max_iterations = max_iterations;
    config.min_iterations = min_iterations;
    return minres([&](std::span<const double> x, std::span<double> y) { mg.fine_operator().apply(x, y); },
                  problem_->load(), u, config,
                  [&](std::span<const double> r, std::span<double> z) { mg.apply(r, z); });
}

double compliance(const Problem& problem, std::span<const double> rho, double tolerance)
{
    StateSolver solver(problem);
    std::vector<double> u(static_cast<std::size_t>(problem.dofs()), 0.0);
    solver.solve(rho, u, tolerance);
    return primal_objective(problem, u);
}

} // namespace vts
