#pragma once

#include "vts/mesh.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace vts {

enum class Method { pbm, ip, doc };

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

enum class Termination { converged, stalled, max_iterations, diverged, oscillating };

std::string_view termination_name(Termination t);

inline constexpr double not_available = std::numeric_limits<double>::quiet_NaN();

/// One row of the iteration log. Fields that do not apply to a method are NaN
/// and written as "nan".
struct IterationRecord {
    int iteration = 0;
    /// Newton steps of this outer iteration (PBM inner loop, 1 for IP, 0 for DOC).
    int newton_steps = 0;
    int minres_steps = 0;
    double objective = not_available;
    double dual_objective = not_available;
    double scaled_gap = not_available;
    double residual = not_available;
    double volume = not_available;
    double step_inf = not_available;
    double barrier_r = not_available;
    double barrier_s = not_available;
    double min_slack = not_available;
    double tol_mr = not_available;
};

/// Column order of the iteration CSV.
inline constexpr std::string_view iteration_csv_header =
    "iteration,newton_steps,minres_steps,objective,dual_objective,scaled_gap,residual,volume,"
    "step_inf,barrier_r,barrier_s,min_slack,tol_mr";

struct SolveReport {
    std::string problem;
    Method method = Method::pbm;
    double tolerance = 0.0;
    double lower_bound = 0.0;
    std::vector<IterationRecord> rows;

    int outer_iterations = 0;
    int newton_iterations = 0;
    int minres_iterations = 0;

    double objective = not_available;
    double dual_objective = not_available;
    double gap = not_available;
    double scaled_gap = not_available;
    double residual = not_available;
    double volume = not_available;
    double target_volume = not_available;

    /// PBM only: scaled gap before and after the final Newton pass.
    double scaled_gap_before_final_pass = not_available;
    double scaled_gap_after_final_pass = not_available;

    Termination status = Termination::converged;
    std::string message;
    double wall_seconds = 0.0;

    std::vector<double> density;

    /// Sets the totals to the sums over rows.
    void tally();
    bool converged() const { return status == Termination::converged; }
    /// Objectives are compared at the default lower bounds; a raised bound
    /// (e.g. the IP lower_1e-3 profile) changes the problem.
    bool objective_comparable() const { return lower_bound <= comparable_lower_bound; }
    static constexpr double comparable_lower_bound = 1e-7;
};

void write_iteration_csv(std::ostream& out, const SolveReport& report);
std::vector<IterationRecord> read_iteration_csv(std::istream& in);

void write_summary_json(std::ostream& out, const SolveReport& report);
/// Reads the scalar fields back (rows and density are not part of the summary).
SolveReport read_summary_json(std::istream& in);

/// Legacy ASCII VTK structured grid with the cell scalar "rho".
void write_density_vtk(std::ostream& out, const MeshLevel& level, const std::vector<double>& rho);
std::vector<double> read_density_vtk(std::istream& in);

/// Densest elements whose densities add up to at most fraction * volume.
struct CutoffSelection {
    std::vector<int> elements;
    double total = 0.0;
};
CutoffSelection cutoff_selection(const std::vector<double>& rho, double volume, double fraction = 0.8);
void write_cutoff(std::ostream& out, const MeshLevel& level, const std::vector<double>& rho,
                  const CutoffSelection& selection);

/// Number of leading significant digits on which a and b agree.
int agreement_digits(double a, double b);

/// Side-by-side table of reports on the same problem; throws if the problems differ.
void write_comparison(std::ostream& out, const std::vector<SolveReport>& reports);

} // namespace vts
