#include "vts/pbm.hpp"

#include "vts/penalty.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace vts {

PbmState PbmState::initial(const Problem& problem)
{
    const auto m = static_cast<std::size_t>(problem.elements());
    PbmState s;
    s.u.assign(static_cast<std::size_t>(problem.dofs()), 0.0);
    s.alpha = 1.0;
    s.nu_lower.assign(m, 1.0);
    s.nu_upper.assign(m, 1.0);
    s.rho.assign(m, problem.volume() / static_cast<double>(m));
    s.mu_lower.assign(m, 1.0);
    s.mu_upper.assign(m, 1.0);
    s.p.assign(m, 1.0);
    s.q_lower.assign(m, 1.0);
    s.q_upper.assign(m, 1.0);
    return s;
}

namespace {

double constraint_argument(const PbmState& s, const std::vector<double>& q, std::size_t i)
{
    return (q[i] - s.alpha + s.nu_lower[i] - s.nu_upper[i]) / s.p[i];
}

double lagrangian_from(const Problem& problem, const PbmState& s, const std::vector<double>& q)
{
    double value = s.alpha * problem.volume() - dot(problem.load(), s.u) - dot(problem.lower(), s.nu_lower) +
                   dot(problem.upper(), s.nu_upper);
    for (std::size_t i = 0; i < q.size(); ++i) {
        value += s.rho[i] * s.p[i] * PenaltyFunction::value(constraint_argument(s, q, i));
        value += s.mu_lower[i] * s.q_lower[i] * PenaltyFunction::value(-s.nu_lower[i] / s.q_lower[i]);
        value += s.mu_upper[i] * s.q_upper[i] * PenaltyFunction::value(-s.nu_upper[i] / s.q_upper[i]);
    }
    return value;
}

} // namespace

double pbm_lagrangian(const Problem& problem, const PbmState& state)
{
    return lagrangian_from(problem, state, problem.assembler().energies(state.u));
}

PbmEvaluation pbm_evaluate(const Problem& problem, const PbmState& s)
{
    const Assembler& assembler = problem.assembler();
    const auto m = static_cast<std::size_t>(problem.elements());
    PbmEvaluation e;
    e.q = assembler.energies(s.u);
    e.value = lagrangian_from(problem, s, e.q);
    e.rho_hat.resize(m);
    e.rho_check.resize(m);
    e.mul_hat.resize(m);
    e.mul_check.resize(m);
    e.muu_hat.resize(m);
    e.muu_check.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const PenaltyValue g = PenaltyFunction::eval(constraint_argument(s, e.q, i));
        e.rho_hat[i] = s.rho[i] * g.first;
        e.rho_check[i] = s.rho[i] / s.p[i] * g.second;
        const PenaltyValue hl = PenaltyFunction::eval(-s.nu_lower[i] / s.q_lower[i]);
        e.mul_hat[i] = s.mu_lower[i] * hl.first;
        e.mul_check[i] = s.mu_lower[i] / s.q_lower[i] * hl.second;
        const PenaltyValue hu = PenaltyFunction::eval(-s.nu_upper[i] / s.q_upper[i]);
        e.muu_hat[i] = s.mu_upper[i] * hu.first;
        e.muu_check[i] = s.mu_upper[i] / s.q_upper[i] * hu.second;
    }

    const auto f = problem.load();
    e.grad_u.resize(s.u.size());
    assembler.apply_b(s.u, e.rho_hat, e.grad_u);
    for (std::size_t j = 0; j < f.size(); ++j)
        e.grad_u[j] -= f[j];
    e.grad_alpha = problem.volume();
    e.grad_nu_lower.resize(m);
    e.grad_nu_upper.resize(m);
    const auto lo = problem.lower();
    const auto up = problem.upper();
    for (std::size_t i = 0; i < m; ++i) {
        e.grad_alpha -= e.rho_hat[i];
        e.grad_nu_lower[i] = -lo[i] + e.rho_hat[i] - e.mul_hat[i];
        e.grad_nu_upper[i] = up[i] - e.rho_hat[i] - e.muu_hat[i];
    }
    e.residual = norm2(e.grad_u) / norm2(f) + std::abs(e.grad_alpha) / problem.volume() +
                 norm2(e.grad_nu_lower) / (norm2(lo) + norm2(up));
    if (!std::isfinite(e.value) || !std::isfinite(e.residual))
        throw std::runtime_error("pbm: augmented Lagrangian is not finite");
    return e;
}

namespace {

struct ElementBlock {
    double a, b, c, det;
};

ElementBlock nu_block(const PbmEvaluation& e, std::size_t i)
{
    const double a = e.rho_check[i] + e.mul_check[i];
    const double c = e.rho_check[i] + e.muu_check[i];
    const double det = e.rho_check[i] * (e.mul_check[i] + e.muu_check[i]) + e.mul_check[i] * e.muu_check[i];
    if (!(det > 0.0))
        throw std::runtime_error("pbm: multiplier block of the Hessian is singular");
    return {a, -e.rho_check[i], c, det};
}

/// y = block^{-1} g
std::pair<double, double> solve_block(const ElementBlock& h, double g0, double g1)
{
    return {(h.c * g0 - h.b * g1) / h.det, (-h.b * g0 + h.a * g1) / h.det};
}

} // namespace

BorderedMatrix pbm_schur(const Problem& problem, const PbmState& state, const PbmEvaluation& e)
{
    const auto m = e.rho_hat.size();
    std::vector<double> omega(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double r = e.rho_check[i], l = e.mul_check[i], u = e.muu_check[i];
        // rho_check - rho_check^2 [1 -1] block^{-1} [1 -1]^T, in cancellation-free form
        omega[i] = r * l * u / (r * (l + u) + l * u);
    }
    return problem.assembler().assemble_bordered(state.u, e.rho_hat, omega, -1.0);
}

std::vector<double> pbm_schur_rhs(const Problem& problem, const PbmState& state, const PbmEvaluation& e)
{
    const auto m = e.rho_hat.size();
    const auto n = state.u.size();
    std::vector<double> coef(m);
    double corner = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto [y0, y1] = solve_block(nu_block(e, i), e.grad_nu_lower[i], e.grad_nu_upper[i]);
        coef[i] = e.rho_check[i] * (y0 - y1);
        corner -= coef[i];
    }
    std::vector<double> rhs(n + 1);
    problem.assembler().apply_b(state.u, coef, std::span<double>(rhs).first(n));
    for (std::size_t j = 0; j < n; ++j)
        rhs[j] -= e.grad_u[j];
    rhs[n] = corner - e.grad_alpha;
    return rhs;
}

void pbm_reconstruct(const Problem& problem, const PbmState& state, const PbmEvaluation& e, PbmStep& step)
{
    const auto m = e.rho_hat.size();
    std::vector<double> t(m);
    problem.assembler().apply_bt(state.u, step.du, t);
    step.dnu_lower.resize(m);
    step.dnu_upper.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double wx = t[i] - step.dalpha;
        const double g0 = e.grad_nu_lower[i] + e.rho_check[i] * wx;
        const double g1 = e.grad_nu_upper[i] - e.rho_check[i] * wx;
        const auto [y0, y1] = solve_block(nu_block(e, i), g0, g1);
        step.dnu_lower[i] = -y0;
        step.dnu_upper[i] = -y1;
    }
}

double pbm_slope(const PbmEvaluation& e, const PbmStep& step)
{
    return dot(e.grad_u, step.du) + e.grad_alpha * step.dalpha + dot(e.grad_nu_lower, step.dnu_lower) +
           dot(e.grad_nu_upper, step.dnu_upper);
}

PbmState pbm_advance(const PbmState& state, const PbmStep& step, double kappa)
{
    PbmState next = state;
    axpy(kappa, step.du, next.u);
    next.alpha += kappa * step.dalpha;
    axpy(kappa, step.dnu_lower, next.nu_lower);
    axpy(kappa, step.dnu_upper, next.nu_upper);
    return next;
}

PbmSolver::PbmSolver(const Problem& problem, PbmConfig config)
    : problem_(problem), config_(config), state_(PbmState::initial(problem)),
      tol_mr_(MinresTolerance::for_pbm(problem.dofs() + 1, config.tol_mr_scale))
{
    if (!(config_.tolerance > 0.0) || !(config_.beta > 0.0 && config_.beta < 1.0) ||
        !(config_.gamma > 0.0 && config_.gamma < 1.0))
        throw std::invalid_argument("pbm: require tolerance > 0 and beta, gamma in (0, 1)");
    if (!(config_.p_min > 0.0 && config_.q_lower_min > 0.0 && config_.q_upper_min > 0.0))
        throw std::invalid_argument("pbm: penalty floors must be positive");
}

PbmStep PbmSolver::direction(const PbmEvaluation& eval, double minres_tolerance)
{
    BorderedMatrix s = pbm_schur(problem_, state_, eval);
    if (mg_)
        mg_->update(std::move(s));
    else
        mg_ = std::make_unique<MultigridPreconditioner>(problem_.mesh(), std::move(s), config_.smoother);
    const MultigridPreconditioner& mg = *mg_;

    const auto rhs = pbm_schur_rhs(problem_, state_, eval);
    std::vector<double> x(rhs.size(), 0.0);
    MinresConfig mc;
    mc.tolerance = minres_tolerance;
    mc.max_iterations = config_.max_minres;
    PbmStep step;
    step.solve = minres([&](std::span<const double> v, std::span<double> y) { mg.fine_operator().apply(v, y); },
                        rhs, x, mc, [&](std::span<const double> r, std::span<double> z) { mg.apply(r, z); });
    step.dalpha = x.back();
    x.pop_back();
    step.du = std::move(x);
    pbm_reconstruct(problem_, state_, eval, step);
    return step;
}

NewtonOutcome PbmSolver::minimize(double tol_newton)
{
    NewtonOutcome out;
    PbmEvaluation eval = pbm_evaluate(problem_, state_);
    double best = eval.residual;
    double value_at_best = eval.value;
    int since_best = 0;
    while (eval.residual >= tol_newton) {
        if (out.steps >= config_.max_newton) {
            out.stalled = true;
            out.reason = "Newton iteration limit";
            break;
        }
        PbmStep step = direction(eval, tol_mr_.value());
        out.minres_steps += step.solve.iterations;
        minres_history_.push_back(step.solve.iterations);
        const double slope = pbm_slope(eval, step);
        if (!(slope < 0.0)) {
            out.stalled = true;
            out.reason = "not a descent direction";
            break;
        }
        double kappa = 1.0;
        bool accepted = false;
        PbmState trial;
        double trial_value = 0.0;
        for (int h = 0; h <= config_.max_halvings; ++h, kappa *= config_.backtrack) {
            trial = pbm_advance(state_, step, kappa);
            trial_value = pbm_lagrangian(problem_, trial);
            if (trial_value <= eval.value + config_.armijo * kappa * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.stalled = true;
            out.reason = "line search failed";
            break;
        }
        state_ = std::move(trial);
        const double previous = eval.residual;
        eval = pbm_evaluate(problem_, state_);
        ++out.steps;
        tol_mr_.observe_newton_residual(previous, eval.residual);

        if (eval.residual < best) {
            best = eval.residual;
            value_at_best = eval.value;
            since_best = 0;
        } else if (++since_best >= config_.stall_window &&
                   value_at_best - eval.value <= 1e-13 * std::max(1.0, std::abs(eval.value))) {
            out.stalled = true;
            out.reason = "no residual progress";
            break;
        }
    }
    out.residual = eval.residual;
    return out;
}

void PbmSolver::update_multipliers(const PbmEvaluation& eval, bool only_rho)
{
    const double beta = config_.beta;
    auto safeguard = [beta](double old, double proposed) { return std::clamp(proposed, beta * old, old / beta); };
    for (std::size_t i = 0; i < state_.rho.size(); ++i) {
        const double s = (eval.q[i] - state_.alpha + state_.nu_lower[i] - state_.nu_upper[i]) / state_.p[i];
        state_.rho[i] = safeguard(state_.rho[i], state_.rho[i] * PenaltyFunction::first(s));
        if (only_rho)
            continue;
        state_.mu_lower[i] = safeguard(state_.mu_lower[i],
                                       state_.mu_lower[i] * PenaltyFunction::first(-state_.nu_lower[i] / state_.q_lower[i]));
        state_.mu_upper[i] = safeguard(state_.mu_upper[i],
                                       state_.mu_upper[i] * PenaltyFunction::first(-state_.nu_upper[i] / state_.q_upper[i]));
    }
}

void PbmSolver::update_penalties()
{
    for (std::size_t i = 0; i < state_.p.size(); ++i) {
        state_.p[i] = std::max(config_.gamma * state_.p[i], config_.p_min);
        state_.q_lower[i] = std::max(config_.gamma * state_.q_lower[i], config_.q_lower_min);
        state_.q_upper[i] = std::max(config_.gamma * state_.q_upper[i], config_.q_upper_min);
    }
}

namespace {

double sum(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s;
}

} // namespace

SolveReport PbmSolver::run()
{
    const auto start = std::chrono::steady_clock::now();
    SolveReport report;
    report.problem = format_problem_name(problem_.name());
    report.method = Method::pbm;
    report.tolerance = config_.tolerance;
    report.lower_bound = problem_.settings().lower;
    report.target_volume = problem_.volume();

    double tol_newton = config_.tol_newton;
    bool stopped = false;
    std::string stall_note;
    GapReport gap;
    for (int outer = 1; outer <= config_.max_outer; ++outer) {
        const NewtonOutcome inner = minimize(tol_newton);
        if (inner.stalled)
            stall_note = inner.reason;
        gap = gap_report(problem_, state_.u, state_.alpha, state_.nu_lower, state_.nu_upper, GapScaling::dual);
        const PbmEvaluation eval = pbm_evaluate(problem_, state_);

        IterationRecord row;
        row.iteration = outer;
        row.newton_steps = inner.steps;
        row.minres_steps = inner.minres_steps;
        row.objective = gap.primal;
        row.dual_objective = gap.dual;
        row.scaled_gap = gap.scaled_gap;
        row.residual = inner.residual;
        row.volume = sum(state_.rho);
        row.tol_mr = tol_mr_.value();
        report.rows.push_back(row);

        if (gap.scaled_gap < config_.tolerance) {
            stopped = true;
            break;
        }
        update_multipliers(eval);
        update_penalties();
        tol_newton = std::max(std::min(100.0 * gap.scaled_gap, tol_newton), config_.tol_newton_min);
    }
    report.scaled_gap_before_final_pass = gap.scaled_gap;

    if (stopped) {
        const NewtonOutcome inner = minimize(10.0 * config_.tolerance);
        if (inner.stalled)
            stall_note = inner.reason;
        const PbmEvaluation eval = pbm_evaluate(problem_, state_);
        update_multipliers(eval, true);
        gap = gap_report(problem_, state_.u, state_.alpha, state_.nu_lower, state_.nu_upper, GapScaling::dual);

        IterationRecord row;
        row.iteration = static_cast<int>(report.rows.size()) + 1;
        row.newton_steps = inner.steps;
        row.minres_steps = inner.minres_steps;
        row.objective = gap.primal;
        row.dual_objective = gap.dual;
        row.scaled_gap = gap.scaled_gap;
        row.residual = inner.residual;
        row.volume = sum(state_.rho);
        row.tol_mr = tol_mr_.value();
        report.rows.push_back(row);
        report.residual = inner.residual;
        report.status = Termination::converged;
        if (inner.stalled)
            report.message = "final Newton pass stalled (" + inner.reason + "); accepted nearly optimal point";
    } else {
        report.status = Termination::max_iterations;
        report.message = "outer iteration limit reached";
        report.residual = report.rows.empty() ? not_available : report.rows.back().residual;
    }
    if (report.message.empty() && !stall_note.empty())
        report.message = "inner Newton stalled at least once (" + stall_note + ")";

    report.scaled_gap_after_final_pass = gap.scaled_gap;
    report.objective = gap.primal;
    report.dual_objective = gap.dual;
    report.gap = gap.gap;
    report.scaled_gap = gap.scaled_gap;
    report.density = state_.rho;
    report.volume = sum(state_.rho);
    report.tally();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace vts
