#include "vts/doc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vts {

void doc_update(std::span<const double> rho, std::span<const double> work, double alpha, double damping,
                std::span<const double> lower, std::span<const double> upper, std::span<double> out)
{
    if (!(alpha > 0.0))
        throw std::invalid_argument("doc_update: alpha must be positive");
    for (std::size_t i = 0; i < rho.size(); ++i)
        out[i] = std::min(std::max(rho[i] * std::pow(work[i], damping) / alpha, lower[i]), upper[i]);
}

VolumeBisection bisect_volume(const Problem& problem, std::span<const double> rho, std::span<const double> work,
                              const DocConfig& config)
{
    const double tau = 0.1 * config.tolerance;
    const double volume = problem.volume();
    VolumeBisection out;
    out.rho.resize(rho.size());
    auto total = [&](double alpha) {
        doc_update(rho, work, alpha, config.damping, problem.lower(), problem.upper(), out.rho);
        double s = 0.0;
        for (double x : out.rho)
            s += x;
        return s;
    };
    double lo = config.alpha_lower;
    double hi = config.alpha_upper;
    if (total(hi) > volume)
        throw std::runtime_error("doc: volume bracket invalid, sum(rho+) > V at the upper alpha; "
                                 "rescale the load or the volume budget");
    while ((hi - lo) / (hi + lo) > tau) {
        out.alpha = 0.5 * (lo + hi);
        if (total(out.alpha) > volume)
            lo = out.alpha;
        else
            hi = out.alpha;
        ++out.steps;
    }
    out.alpha = 0.5 * (lo + hi);
    total(out.alpha);
    return out;
}

DocSolver::DocSolver(const Problem& problem, DocConfig config) : problem_(problem), config_(config)
{
    if (!(config_.tolerance > 0.0))
        throw std::invalid_argument("doc: tolerance must be positive");
    if (!(config_.damping > 0.0 && config_.damping <= 1.0))
        throw std::invalid_argument("doc: damping exponent must lie in (0, 1]");
    if (!(config_.alpha_upper > config_.alpha_lower && config_.alpha_lower >= 0.0))
        throw std::invalid_argument("doc: invalid bisection bracket");
}

SolveReport DocSolver::run()
{
    const auto start = std::chrono::steady_clock::now();
    SolveReport report;
    report.problem = format_problem_name(problem_.name());
    report.method = Method::doc;
    report.tolerance = config_.tolerance;
    report.lower_bound = problem_.settings().lower;
    report.target_volume = problem_.volume();
    report.status = Termination::max_iterations;
    report.message = "iteration limit reached";

    const auto m = static_cast<std::size_t>(problem_.elements());
    std::vector<double> rho(m, problem_.volume() / static_cast<double>(m));
    std::vector<double> u(static_cast<std::size_t>(problem_.dofs()), 0.0);
    std::vector<double> work(m);
    StateSolver state(problem_, config_.smoother);

    double best_step = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int increases = 0;
    double previous_objective = std::numeric_limits<double>::infinity();
    double alpha = 0.0;
    for (int it = 1; it <= config_.max_iterations; ++it) {
        const MinresResult solve = state.solve(rho, u, config_.tol_mr, config_.max_minres, config_.min_minres);
        const auto q = problem_.assembler().energies(u);
        for (std::size_t i = 0; i < m; ++i)
            work[i] = 2.0 * q[i];
        VolumeBisection bis = bisect_volume(problem_, rho, work, config_);
        alpha = bis.alpha;

        double step = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            step = std::max(step, std::abs(bis.rho[i] - rho[i]));

        const double fu = dot(problem_.load(), u);
        // at a fixed point (u^T K_i u)^q = alpha, i.e. q_i = alpha^{1/q} / 2
        const double dual_alpha = 0.5 * std::pow(alpha, 1.0 / config_.damping);
        const double gap = duality_gap(problem_, fu, dual_alpha, q);

        IterationRecord row;
        row.iteration = it;
        row.minres_steps = solve.iterations;
        row.objective = 0.5 * fu;
        row.dual_objective = gap - 0.5 * fu;
        row.scaled_gap = gap / (0.5 * fu);
        row.volume = 0.0;
        for (double x : bis.rho)
            row.volume += x;
        row.step_inf = step;
        row.tol_mr = config_.tol_mr;
        report.rows.push_back(row);

        if (row.objective > previous_objective * (1.0 + 1e-3))
            ++increases;
        previous_objective = row.objective;
        rho = std::move(bis.rho);

        if (step <= config_.tolerance) {
            report.status = Termination::converged;
            report.message.clear();
            break;
        }
        if (step < (1.0 - config_.oscillation_ratio) * best_step) {
            best_step = step;
            since_best = 0;
        } else if (++since_best >= config_.oscillation_window) {
            report.status = Termination::oscillating;
            report.message = "no progress in ||rho+ - rho||_inf";
            break;
        }
    }

    const MinresResult final_solve = state.solve(rho, u, config_.final_tol_mr, config_.max_minres);
    const double fu = dot(problem_.load(), u);
    const double gap =
        duality_gap(problem_, fu, 0.5 * std::pow(alpha, 1.0 / config_.damping), problem_.assembler().energies(u));
    report.objective = 0.5 * fu;
    report.gap = gap;
    report.dual_objective = gap - 0.5 * fu;
    report.scaled_gap = gap / (0.5 * fu);
    report.residual = final_solve.relative_residual;
    report.density = rho;
    report.volume = 0.0;
    for (double x : rho)
        report.volume += x;
    if (increases > 0) {
        if (!report.message.empty())
            report.message += "; ";
        report.message += "compliance increased in " + std::to_string(increases) + " iterations";
    }
    report.tally();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace vts
