#pragma once

#include "vts/fem.hpp"
#include "vts/mesh.hpp"
#include "vts/minres.hpp"
#include "vts/multigrid.hpp"

#include <memory>
#include <span>
#include <vector>

namespace vts {

struct ProblemSettings {
    Material material;
    /// Total force in -z.
    double load = 1.0;
    /// V = volume_fraction * m.
    double volume_fraction = 0.35;
    double lower = 0.0;
    double upper = 1.0;
};

/// A VTS instance: mesh hierarchy, finest-level assembler, load f, volume
/// budget V and density bounds. Not movable: preconditioners keep a pointer
/// to the hierarchy.
class Problem {
public:
    Problem(const ProblemName& name, const ProblemSettings& settings = {});
    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;

    const ProblemName& name() const { return name_; }
    const ProblemSettings& settings() const { return settings_; }
    const Hierarchy& mesh() const { return mesh_; }
    const Assembler& assembler() const { return *assembler_; }

    int dofs() const { return assembler_->dofs(); }
    int elements() const { return assembler_->elements(); }
    std::span<const double> load() const { return mesh_.finest().load; }
    double volume() const { return volume_; }
    std::span<const double> lower() const { return lower_; }
    std::span<const double> upper() const { return upper_; }

    /// Replaces the uniform bounds; V must stay strictly feasible.
    void set_bounds(double lower, double upper);

private:
    ProblemName name_;
    ProblemSettings settings_;
    Hierarchy mesh_;
    std::unique_ptr<Assembler> assembler_;
    double volume_ = 0.0;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// 1/2 f^T u
double primal_objective(const Problem& problem, std::span<const double> u);

/// alpha V - f^T u - lower^T nu_lower + upper^T nu_upper
double dual_objective(const Problem& problem, std::span<const double> u, double alpha,
                      std::span<const double> nu_lower, std::span<const double> nu_upper);

/// -1/2 f^T u + alpha V - sum_i min{lower_i (alpha - q_i), upper_i (alpha - q_i)}
/// with q_i = 1/2 u^T K_i u already computed.
double duality_gap(const Problem& problem, double f_dot_u, double alpha, std::span<const double> q);
double duality_gap(const Problem& problem, std::span<const double> u, double alpha);

/// -alpha V + f^T u + sum_i min{lower_i (alpha - q_i), upper_i (alpha - q_i)}
double nonsmooth_objective(const Problem& problem, std::span<const double> u, double alpha);

struct DualPoint {
    std::vector<double> u;
    double alpha = 0.0;
    std::vector<double> nu_lower;
    std::vector<double> nu_upper;
};

/// The dual-feasible completion of (u, alpha): nu_lower = max(alpha - q, 0),
/// nu_upper = max(q - alpha, 0). Its dual objective equals minus the
/// nonsmooth objective.
DualPoint complete_dual_point(const Problem& problem, std::span<const double> u, double alpha);

/// Largest violation of q_i <= alpha - nu_lower_i + nu_upper_i, nu >= 0.
double dual_infeasibility(const Problem& problem, const DualPoint& point);

enum class GapScaling { dual, primal };

struct GapReport {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    /// |gap / dual| or gap / primal.
    double scaled_gap = 0.0;
};

GapReport gap_report(const Problem& problem, std::span<const double> u, double alpha,
                     std::span<const double> nu_lower, std::span<const double> nu_upper, GapScaling scaling);

/// Solves K(rho) u = f by MINRES with one V-cycle of a multigrid
/// preconditioner; u is used as the initial guess.
class StateSolver {
public:
    explicit StateSolver(const Problem& problem, SmootherConfig smoother = {});

    MinresResult solve(std::span<const double> rho, std::span<double> u, double tolerance,
                       int max_iterations = 5000, int min_iterations = 0);

private:
    const Problem* problem_;
    SmootherConfig smoother_;
    std::unique_ptr<MultigridPreconditioner> mg_;
};

/// 1/2 f^T K(rho)^{-1} f from an accurate solve.
double compliance(const Problem& problem, std::span<const double> rho, double tolerance = 1e-10);

} // namespace vts
