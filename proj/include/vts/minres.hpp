#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vts {

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct MinresConfig {
    /// Stop when ||b - A x||_2 <= tolerance * ||b||_2.
    double tolerance = 1e-4;
    int max_iterations = 5000;
    /// Iterations performed even when the initial guess already meets the tolerance.
    int min_iterations = 0;
    /// Record the preconditioned residual estimate of every iteration.
    bool keep_history = false;
};

struct MinresResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    std::vector<double> history;
};

/// Thrown on recurrence breakdown; the solution vector passed to minres()
/// holds the last stable iterate.
class MinresBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The preconditioner produced <M r, r> < 0.
class IndefinitePreconditioner : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Preconditioned MINRES (Paige-Saunders recurrences) for symmetric A and SPD
/// preconditioner M ~ A^{-1}. x holds the initial guess on entry. The true
/// residual is carried along by the recurrence A w_k, so the stopping test is
/// on ||b - A x||_2 without extra operator applications.
MinresResult minres(const LinearOperator& a, std::span<const double> b, std::span<double> x,
                    const MinresConfig& config, const LinearOperator& preconditioner = {});

enum class TolerancePolicy { oc, pbm, ip };

/// The relative MINRES tolerance and its per-method update rule.
///   oc:  constant (1e-4 by default).
///   pbm: starts at 1e-4 sqrt(n); multiplied by 0.1 (floor 1e-9) whenever the
///        Newton residual stagnates, tau+ > 0.9 tau.
///   ip:  starts at 1e-2; set to max(100 d, 1e-9) when that is lower, d the
///        largest complementarity product.
class MinresTolerance {
public:
    static constexpr double floor = 1e-9;

    MinresTolerance(TolerancePolicy policy, double initial);

    static MinresTolerance for_oc(double value = 1e-4) { return {TolerancePolicy::oc, value}; }
    static MinresTolerance for_pbm(int n, double scale = 1e-4);
    static MinresTolerance for_ip(double initial = 1e-2) { return {TolerancePolicy::ip, initial}; }

    TolerancePolicy policy() const { return policy_; }
    double value() const { return value_; }

    /// PBM trigger: residual measure of the previous and the current Newton step.
    void observe_newton_residual(double previous, double current);
    /// IP trigger: largest complementarity product max_i |(rho_i - lo_i) nu_i|, |(up_i - rho_i) nu_i|.
    void observe_complementarity(double d);

private:
    TolerancePolicy policy_;
    double value_;
};

double pbm_tolerance_update(double tol, double previous_residual, double current_residual);
double ip_tolerance_update(double tol, double complementarity);

} // namespace vts
