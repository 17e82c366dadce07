#pragma once

#include "vts/model.hpp"
#include "vts/report.hpp"

#include <span>
#include <vector>

namespace vts {

struct DocConfig {
    double tolerance = 1e-5;
    /// Damping exponent q in (0, 1].
    double damping = 0.5;
    double alpha_lower = 0.0;
    double alpha_upper = 1e4;
    double tol_mr = 1e-4;
    /// Tolerance of the solve that produces the reported compliance.
    double final_tol_mr = 1e-10;
    int max_iterations = 20000;
    int max_minres = 5000;
    /// MINRES steps per state solve even when the warm start meets tol_mr.
    int min_minres = 1;
    /// Abort when ||rho+ - rho||_inf has not dropped below 99% of its best
    /// value for this many iterations.
    int oscillation_window = 50;
    double oscillation_ratio = 0.01;
    SmootherConfig smoother;
};

/// rho+_i = min{max{rho_i (u^T K_i u)^q / alpha, lower_i}, upper_i}, with
/// work_i = u^T K_i u (no factor 1/2).
void doc_update(std::span<const double> rho, std::span<const double> work, double alpha, double damping,
                std::span<const double> lower, std::span<const double> upper, std::span<double> out);

struct VolumeBisection {
    double alpha = 0.0;
    std::vector<double> rho;
    int steps = 0;
};

/// Bisection on alpha until (hi - lo)/(hi + lo) <= 0.1 tol_DOC; sum(rho+) > V
/// moves the lower end up, otherwise the upper end down.
VolumeBisection bisect_volume(const Problem& problem, std::span<const double> rho, std::span<const double> work,
                              const DocConfig& config);

class DocSolver {
public:
    DocSolver(const Problem& problem, DocConfig config = {});
    SolveReport run();

private:
    const Problem& problem_;
    DocConfig config_;
};

} // namespace vts
