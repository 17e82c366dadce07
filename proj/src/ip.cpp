#include "vts/ip.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vts {

std::pair<double, double> duality_measures(const Problem& problem, const IpState& state)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < state.rho.size(); ++i) {
        a += state.nu_lower[i] * (state.rho[i] - lo[i]);
        b += state.nu_upper[i] * (up[i] - state.rho[i]);
    }
    const double m = static_cast<double>(state.rho.size());
    return {a / m, b / m};
}

IpState IpState::initial(const Problem& problem, const IpConfig& config)
{
    const auto m = static_cast<std::size_t>(problem.elements());
    IpState s;
    s.u.assign(static_cast<std::size_t>(problem.dofs()), 0.0);
    s.alpha = 1.0;
    s.rho.assign(m, problem.volume() / static_cast<double>(m));
    s.nu_lower.assign(m, 1.0);
    s.nu_upper.assign(m, 1.0);
    s.r = config.initial_barrier;
    s.s = config.initial_barrier;
    const auto [a, b] = duality_measures(problem, s);
    s.r_next = config.sigma_r * a;
    s.s_next = config.sigma_s * b;
    return s;
}

IpResidual ip_residual(const Problem& problem, const IpState& state)
{
    const Assembler& assembler = problem.assembler();
    const auto f = problem.load();
    const auto lo = problem.lower();
    const auto up = problem.upper();
    const auto m = state.rho.size();
    IpResidual res;
    res.res1.resize(state.u.size());
    assembler.apply_stiffness(state.rho, state.u, res.res1);
    for (std::size_t j = 0; j < f.size(); ++j)
        res.res1[j] -= f[j];
    res.res2 = -problem.volume();
    for (double x : state.rho)
        res.res2 += x;
    res.res3 = assembler.energies(state.u);
    res.res4.resize(m);
    res.res5.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        res.res3[i] += state.alpha + state.nu_lower[i] - state.nu_upper[i];
        res.res4[i] = (state.rho[i] - lo[i]) * state.nu_lower[i] - state.r;
        res.res5[i] = (up[i] - state.rho[i]) * state.nu_upper[i] - state.s;
    }
    return res;
}

IpResidual ip_jacobian_apply(const Problem& problem, const IpState& state, const IpStep& d)
{
    const Assembler& assembler = problem.assembler();
    const auto lo = problem.lower();
    const auto up = problem.upper();
    const auto m = state.rho.size();
    IpResidual out;
    out.res1.resize(state.u.size());
    assembler.apply_stiffness(state.rho, d.du, out.res1);
    std::vector<double> b_drho(state.u.size());
    assembler.apply_b(state.u, d.drho, b_drho);
    axpy(1.0, b_drho, out.res1);
    out.res2 = 0.0;
    for (double x : d.drho)
        out.res2 += x;
    out.res3.resize(m);
    assembler.apply_bt(state.u, d.du, out.res3);
    out.res4.resize(m);
    out.res5.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.res3[i] += d.dalpha + d.dnu_lower[i] - d.dnu_upper[i];
        out.res4[i] = state.nu_lower[i] * d.drho[i] + (state.rho[i] - lo[i]) * d.dnu_lower[i];
        out.res5[i] = -state.nu_upper[i] * d.drho[i] + (up[i] - state.rho[i]) * d.dnu_upper[i];
    }
    return out;
}

double ip_residual_measure(const Problem& problem, const IpState& state, const IpResidual& res)
{
    const double m = static_cast<double>(state.rho.size());
    double sum4 = 0.0, sum5 = 0.0;
    for (std::size_t i = 0; i < res.res4.size(); ++i) {
        sum4 += res.res4[i];
        sum5 += res.res5[i];
    }
    return norm2(res.res1) / norm2(problem.load()) + std::abs(res.res2) / problem.volume() +
           norm2(res.res3) / (norm2(state.nu_lower) + norm2(state.nu_upper)) + std::abs(sum4) / m +
           std::abs(sum5) / m;
}

namespace {

void require_interior(const Problem& problem, const IpState& state)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    for (std::size_t i = 0; i < state.rho.size(); ++i)
        if (!(state.rho[i] > lo[i] && state.rho[i] < up[i] && state.nu_lower[i] > 0.0 && state.nu_upper[i] > 0.0))
            throw std::runtime_error("ip: iterate is not strictly interior");
}

} // namespace

std::vector<double> ip_middle_factor(const Problem& problem, const IpState& state)
{
    require_interior(problem, state);
    const auto lo = problem.lower();
    const auto up = problem.upper();
    std::vector<double> d(state.rho.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = 1.0 / (state.nu_lower[i] / (state.rho[i] - lo[i]) + state.nu_upper[i] / (up[i] - state.rho[i]));
    return d;
}

BorderedMatrix ip_schur(const Problem& problem, const IpState& state)
{
    return problem.assembler().assemble_bordered(state.u, state.rho, ip_middle_factor(problem, state), 1.0);
}

namespace {

/// res3 - P_lower^{-1} res4 + P_upper^{-1} res5
std::vector<double> reduced_res3(const Problem& problem, const IpState& state, const IpResidual& res)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    std::vector<double> t(state.rho.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = res.res3[i] - res.res4[i] / (state.rho[i] - lo[i]) + res.res5[i] / (up[i] - state.rho[i]);
    return t;
}

} // namespace

std::vector<double> ip_schur_rhs(const Problem& problem, const IpState& state, const IpResidual& res)
{
    const auto d = ip_middle_factor(problem, state);
    auto t = reduced_res3(problem, state, res);
    double corner = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] *= d[i];
        corner += t[i];
    }
    const auto n = state.u.size();
    std::vector<double> rhs(n + 1);
    problem.assembler().apply_b(state.u, t, std::span<double>(rhs).first(n));
    for (std::size_t j = 0; j < n; ++j)
        rhs[j] = -res.res1[j] - rhs[j];
    rhs[n] = -res.res2 - corner;
    return rhs;
}

void ip_reconstruct(const Problem& problem, const IpState& state, const IpResidual& res, IpStep& step)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    const auto d = ip_middle_factor(problem, state);
    const auto t = reduced_res3(problem, state, res);
    const auto m = state.rho.size();
    std::vector<double> bt(m);
    problem.assembler().apply_bt(state.u, step.du, bt);
    step.drho.resize(m);
    step.dnu_lower.resize(m);
    step.dnu_upper.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double moved = bt[i] + step.dalpha;
        step.drho[i] = d[i] * (t[i] + moved);
        const double pl = state.rho[i] - lo[i];
        step.dnu_upper[i] = (pl * (moved + res.res3[i]) - (state.nu_lower[i] - state.nu_upper[i]) * step.drho[i] -
                             res.res4[i] - res.res5[i]) /
                            (up[i] - lo[i]);
        step.dnu_lower[i] = step.dnu_upper[i] - moved - res.res3[i];
    }
}

StepLengths ip_step_lengths(const Problem& problem, const IpState& state, const IpStep& step, double fraction)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    constexpr double inf = std::numeric_limits<double>::infinity();
    double primal = inf, nl = inf, nu = inf;
    for (std::size_t i = 0; i < state.rho.size(); ++i) {
        const double dr = step.drho[i];
        if (dr > 0.0)
            primal = std::min(primal, (up[i] - state.rho[i]) / dr);
        else if (dr < 0.0)
            primal = std::min(primal, (lo[i] - state.rho[i]) / dr);
        if (step.dnu_lower[i] < 0.0)
            nl = std::min(nl, -state.nu_lower[i] / step.dnu_lower[i]);
        if (step.dnu_upper[i] < 0.0)
            nu = std::min(nu, -state.nu_upper[i] / step.dnu_upper[i]);
    }
    StepLengths k;
    k.primal = std::min(fraction * primal, 1.0);
    k.nu_lower = std::min(fraction * nl, 1.0);
    k.nu_upper = std::min(fraction * nu, 1.0);
    k.alpha = 1.0;
    return k;
}

void ip_advance(IpState& state, const IpStep& step, const StepLengths& kappa)
{
    axpy(kappa.primal, step.du, state.u);
    state.alpha += kappa.alpha * step.dalpha;
    axpy(kappa.primal, step.drho, state.rho);
    axpy(kappa.nu_lower, step.dnu_lower, state.nu_lower);
    axpy(kappa.nu_upper, step.dnu_upper, state.nu_upper);
}

double max_complementarity(const Problem& problem, const IpState& state)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    double d = 0.0;
    for (std::size_t i = 0; i < state.rho.size(); ++i) {
        d = std::max(d, std::abs((state.rho[i] - lo[i]) * state.nu_lower[i]));
        d = std::max(d, std::abs((up[i] - state.rho[i]) * state.nu_upper[i]));
    }
    return d;
}

double min_slack(const Problem& problem, const IpState& state)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < state.rho.size(); ++i)
        s = std::min({s, state.rho[i] - lo[i], up[i] - state.rho[i]});
    return s;
}

IpSolver::IpSolver(const Problem& problem, IpConfig config)
    : problem_(problem), config_(config), state_(IpState::initial(problem, config)),
      tol_mr_(MinresTolerance::for_ip(config.tol_mr_initial))
{
    if (!(config_.tolerance > 0.0) || !(config_.sigma_r > 0.0 && config_.sigma_r < 1.0) ||
        !(config_.sigma_s > 0.0 && config_.sigma_s < 1.0))
        throw std::invalid_argument("ip: require tolerance > 0 and sigma in (0, 1)");
    if (!(config_.initial_barrier > 0.0))
        throw std::invalid_argument("ip: initial barrier parameter must be positive");
    if (!(problem.lower()[0] < state_.rho[0] && state_.rho[0] < problem.upper()[0]))
        throw std::invalid_argument("ip: uniform start V/m is not strictly inside the bounds");
}

IpStep IpSolver::direction(const IpResidual& res, double minres_tolerance)
{
    BorderedMatrix s = ip_schur(problem_, state_);
    if (mg_)
        mg_->update(std::move(s));
    else
        mg_ = std::make_unique<MultigridPreconditioner>(problem_.mesh(), std::move(s), config_.smoother);
    const MultigridPreconditioner& mg = *mg_;

    const auto rhs = ip_schur_rhs(problem_, state_, res);
    std::vector<double> x(rhs.size(), 0.0);
    MinresConfig mc;
    mc.tolerance = minres_tolerance;
    mc.max_iterations = config_.max_minres;
    IpStep step;
    step.solve = minres([&](std::span<const double> v, std::span<double> y) { mg.fine_operator().apply(v, y); },
                        rhs, x, mc, [&](std::span<const double> r, std::span<double> z) { mg.apply(r, z); });
    step.dalpha = x.back();
    x.pop_back();
    step.du = std::move(x);
    ip_reconstruct(problem_, state_, res, step);
    return step;
}

int IpSolver::iterate()
{
    const IpResidual res = ip_residual(problem_, state_);
    const IpStep step = direction(res, tol_mr_.value());
    state_.r = state_.r_next;
    state_.s = state_.s_next;
    const StepLengths kappa = ip_step_lengths(problem_, state_, step, config_.fraction_to_boundary);
    ip_advance(state_, step, kappa);
    tol_mr_.observe_complementarity(max_complementarity(problem_, state_));
    return step.solve.iterations;
}

SolveReport IpSolver::run()
{
    const auto start = std::chrono::steady_clock::now();
    SolveReport report;
    report.problem = format_problem_name(problem_.name());
    report.method = Method::ip;
    report.tolerance = config_.tolerance;
    report.lower_bound = problem_.settings().lower;
    report.target_volume = problem_.volume();
    report.status = Termination::max_iterations;
    report.message = "iteration limit reached";

    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    GapReport gap;
    double residual = not_available;
    for (int it = 1; it <= config_.max_iterations; ++it) {
        const double tol_used = tol_mr_.value();
        const int minres_steps = iterate();

        const IpResidual res = ip_residual(problem_, state_);
        residual = ip_residual_measure(problem_, state_, res);
        gap = gap_report(problem_, state_.u, -state_.alpha, state_.nu_lower, state_.nu_upper, GapScaling::primal);

        IterationRecord row;
        row.iteration = it;
        row.newton_steps = 1;
        row.minres_steps = minres_steps;
        row.objective = gap.primal;
        row.dual_objective = gap.dual;
        row.scaled_gap = gap.scaled_gap;
        row.residual = residual;
        row.volume = 0.0;
        for (double x : state_.rho)
            row.volume += x;
        row.barrier_r = state_.r;
        row.barrier_s = state_.s;
        row.min_slack = min_slack(problem_, state_);
        row.tol_mr = tol_used;
        report.rows.push_back(row);

        if (config_.tolerance > gap.scaled_gap && gap.scaled_gap > -0.1 * config_.tolerance &&
            residual < 10.0 * config_.tolerance) {
            report.status = Termination::converged;
            report.message.clear();
            break;
        }
        if (!std::isfinite(gap.scaled_gap) || !std::isfinite(residual)) {
            report.status = Termination::diverged;
            report.message = "non-finite iterate";
            break;
        }
        if (std::abs(gap.scaled_gap) < best) {
            best = std::abs(gap.scaled_gap);
            since_best = 0;
        } else if (++since_best >= config_.divergence_window) {
            report.status = Termination::diverged;
            report.message = "no convergence apparent: scaled gap stagnated";
            break;
        }
        const auto [a, b] = duality_measures(problem_, state_);
        state_.r_next = config_.sigma_r * a;
        state_.s_next = config_.sigma_s * b;
    }

    report.objective = gap.primal;
    report.dual_objective = gap.dual;
    report.gap = gap.gap;
    report.scaled_gap = gap.scaled_gap;
    report.residual = residual;
    report.density = state_.rho;
    report.volume = 0.0;
    for (double x : state_.rho)
        report.volume += x;
    report.tally();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace vts
