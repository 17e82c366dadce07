#pragma once

#include "vts/minres.hpp"
#include "vts/model.hpp"
#include "vts/multigrid.hpp"
#include "vts/report.hpp"

#include <memory>
#include <span>
#include <vector>

namespace vts {

struct IpConfig {
    double tolerance = 1e-5;
    double sigma_r = 0.2;
    double sigma_s = 0.2;
    double initial_barrier = 1e-2;
    double fraction_to_boundary = 0.9;
    double tol_mr_initial = 1e-2;
    int max_iterations = 500;
    int max_minres = 5000;
    /// Iterations without a new smallest |scaled gap| before giving up.
    int divergence_window = 15;
    SmootherConfig smoother;
};

/// Primal-dual iterate and barrier parameters. alpha follows the sign of the
/// KKT residual res3 = q + alpha + nu_lower - nu_upper, i.e. it is minus the
/// alpha of the dual problem.
struct IpState {
    std::vector<double> u;
    double alpha = 1.0;
    std::vector<double> rho;
    std::vector<double> nu_lower;
    std::vector<double> nu_upper;
    double r = 1e-2;
    double s = 1e-2;
    double r_next = 0.0;
    double s_next = 0.0;

    /// u = 0, alpha = 1, rho = V/m, nu = e, r = s = barrier, staged values from the start point.
    static IpState initial(const Problem& problem, const IpConfig& config = {});
};

struct IpResidual {
    std::vector<double> res1;
    double res2 = 0.0;
    std::vector<double> res3;
    std::vector<double> res4;
    std::vector<double> res5;
};

/// Newton increment of all five blocks.
struct IpStep {
    std::vector<double> du;
    double dalpha = 0.0;
    std::vector<double> drho;
    std::vector<double> dnu_lower;
    std::vector<double> dnu_upper;
    MinresResult solve;
};

struct StepLengths {
    double primal = 1.0;
    double nu_lower = 1.0;
    double nu_upper = 1.0;
    double alpha = 1.0;
};

IpResidual ip_residual(const Problem& problem, const IpState& state);
/// Derivative of the residual applied to a direction.
IpResidual ip_jacobian_apply(const Problem& problem, const IpState& state, const IpStep& direction);

/// tau_IP: five weighted residual norms.
double ip_residual_measure(const Problem& problem, const IpState& state, const IpResidual& res);

/// Middle factor (P_lower^{-1} N_lower + P_upper^{-1} N_upper)^{-1} of S_IP.
std::vector<double> ip_middle_factor(const Problem& problem, const IpState& state);
BorderedMatrix ip_schur(const Problem& problem, const IpState& state);
std::vector<double> ip_schur_rhs(const Problem& problem, const IpState& state, const IpResidual& res);
/// Recovers drho, then dnu_upper, then dnu_lower from (du, dalpha).
void ip_reconstruct(const Problem& problem, const IpState& state, const IpResidual& res, IpStep& step);

StepLengths ip_step_lengths(const Problem& problem, const IpState& state, const IpStep& step,
                            double fraction = 0.9);
void ip_advance(IpState& state, const IpStep& step, const StepLengths& kappa);

/// max_i of (rho_i - lower_i) nu_lower_i and (upper_i - rho_i) nu_upper_i
double max_complementarity(const Problem& problem, const IpState& state);
/// min_i of rho_i - lower_i and upper_i - rho_i
double min_slack(const Problem& problem, const IpState& state);
/// nu_lower^T (rho - lower) / m and nu_upper^T (upper - rho) / m
std::pair<double, double> duality_measures(const Problem& problem, const IpState& state);

class IpSolver {
public:
    IpSolver(const Problem& problem, IpConfig config = {});

    IpState& state() { return state_; }
    const IpState& state() const { return state_; }
    double minres_tolerance() const { return tol_mr_.value(); }

    /// Newton step from S_IP solved by preconditioned MINRES.
    IpStep direction(const IpResidual& res, double minres_tolerance);

    /// One iteration of the algorithm: solve, reconstruct, barrier shift,
    /// step lengths, update. Returns the MINRES iteration count.
    int iterate();

    SolveReport run();

private:
    const Problem& problem_;
    IpConfig config_;
    IpState state_;
    MinresTolerance tol_mr_;
    std::unique_ptr<MultigridPreconditioner> mg_;
};

} // namespace vts
