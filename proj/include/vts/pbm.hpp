#pragma once

#include "vts/minres.hpp"
#include "vts/model.hpp"
#include "vts/multigrid.hpp"
#include "vts/report.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vts {

struct PbmConfig {
    double tolerance = 1e-5;
    double beta = 0.3;
    double gamma = 0.3;
    double p_min = 1e-8;
    double q_lower_min = 1e-8;
    double q_upper_min = 1e-8;
    double tol_newton = 1.0;
    double tol_newton_min = 1e-3;
    /// Initial MINRES tolerance is tol_mr_scale * sqrt(n).
    double tol_mr_scale = 1e-4;
    int max_outer = 100;
    int max_newton = 100;
    int max_minres = 5000;
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_halvings = 40;
    /// Newton steps without a new best residual (and no decrease of L) before
    /// the inner loop is declared stalled.
    int stall_window = 3;
    SmootherConfig smoother;
};

/// Dual iterate xi = (u, alpha, nu_lower, nu_upper), multipliers
/// (rho, mu_lower, mu_upper) and penalty parameters (p, q_lower, q_upper).
struct PbmState {
    std::vector<double> u;
    double alpha = 1.0;
    std::vector<double> nu_lower;
    std::vector<double> nu_upper;
    std::vector<double> rho;
    std::vector<double> mu_lower;
    std::vector<double> mu_upper;
    std::vector<double> p;
    std::vector<double> q_lower;
    std::vector<double> q_upper;

    /// u = 0, alpha = 1, nu = e, rho = V/m, mu = e, penalties = e.
    static PbmState initial(const Problem& problem);
};

/// Augmented Lagrangian, its gradient blocks and the per-element Hessian
/// coefficients at one state.
struct PbmEvaluation {
    double value = 0.0;
    std::vector<double> grad_u;
    double grad_alpha = 0.0;
    std::vector<double> grad_nu_lower;
    std::vector<double> grad_nu_upper;
    /// tau_res = ||res1||/||f|| + |res2|/V + ||res3||/(||lower|| + ||upper||)
    double residual = 0.0;
    /// q_i = 1/2 u^T K_i u
    std::vector<double> q;
    /// rho_i phi'(s_i), mu phi'(.) and their second-derivative counterparts rho_i/p_i phi''(s_i), ...
    std::vector<double> rho_hat;
    std::vector<double> rho_check;
    std::vector<double> mul_hat;
    std::vector<double> mul_check;
    std::vector<double> muu_hat;
    std::vector<double> muu_check;
};

PbmEvaluation pbm_evaluate(const Problem& problem, const PbmState& state);
double pbm_lagrangian(const Problem& problem, const PbmState& state);

/// Newton increment of all four blocks.
struct PbmStep {
    std::vector<double> du;
    double dalpha = 0.0;
    std::vector<double> dnu_lower;
    std::vector<double> dnu_upper;
    MinresResult solve;
};

/// Schur complement S of the Hessian onto (u, alpha).
BorderedMatrix pbm_schur(const Problem& problem, const PbmState& state, const PbmEvaluation& eval);
std::vector<double> pbm_schur_rhs(const Problem& problem, const PbmState& state, const PbmEvaluation& eval);
/// Recovers (dnu_lower, dnu_upper) from (du, dalpha).
void pbm_reconstruct(const Problem& problem, const PbmState& state, const PbmEvaluation& eval, PbmStep& step);

/// <grad L, step>
double pbm_slope(const PbmEvaluation& eval, const PbmStep& step);
/// state + kappa * step
PbmState pbm_advance(const PbmState& state, const PbmStep& step, double kappa);

struct NewtonOutcome {
    int steps = 0;
    int minres_steps = 0;
    double residual = 0.0;
    bool stalled = false;
    std::string reason;
};

class PbmSolver {
public:
    PbmSolver(const Problem& problem, PbmConfig config = {});

    PbmState& state() { return state_; }
    const PbmState& state() const { return state_; }
    const PbmConfig& config() const { return config_; }
    double minres_tolerance() const { return tol_mr_.value(); }
    /// MINRES iterations of every Newton step so far, in order.
    const std::vector<int>& minres_history() const { return minres_history_; }

    /// Newton step from the Schur system solved by preconditioned MINRES.
    PbmStep direction(const PbmEvaluation& eval, double minres_tolerance);

    /// Damped Newton on L until tau_res < tol_newton (inner loop).
    NewtonOutcome minimize(double tol_newton);

    /// Multiplier update with the beta safeguard; the mu updates are skipped
    /// when only_rho is set (final update).
    void update_multipliers(const PbmEvaluation& eval, bool only_rho = false);
    void update_penalties();

    /// Outer loop, final Newton pass and final density update.
    SolveReport run();

private:
    const Problem& problem_;
    PbmConfig config_;
    PbmState state_;
    MinresTolerance tol_mr_;
    std::unique_ptr<MultigridPreconditioner> mg_;
    std::vector<int> minres_history_;
};

} // namespace vts
