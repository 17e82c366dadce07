#pragma once

// Independent reference computations for the test suites. Everything here is
// dense and meant for instances with a few dozen elements at most.

#include "vts/ip.hpp"
#include "vts/model.hpp"
#include "vts/pbm.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace vts::oracles {

Eigen::MatrixXd to_dense(const CsrMatrix& a);
Eigen::MatrixXd to_dense(const BorderedMatrix& a);

/// K_i scattered to the free DOFs of the finest level, n x n.
Eigen::MatrixXd element_matrix_global(const Problem& problem, int e);
/// sum_i rho_i K_i from the scattered element matrices.
Eigen::MatrixXd stiffness_dense(const Problem& problem, std::span<const double> rho);

struct DenseSystem {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    Eigen::VectorXd solve() const;
};

/// Full Hessian of the augmented Lagrangian in (u, alpha, nu_lower, nu_upper)
/// and minus its gradient, built from the dense K_i.
DenseSystem pbm_newton_system(const Problem& problem, const PbmState& state);
/// Gradient of the augmented Lagrangian from the dense K_i.
Eigen::VectorXd pbm_gradient(const Problem& problem, const PbmState& state);
/// Central differences of pbm_lagrangian in every component of xi.
Eigen::VectorXd pbm_gradient_fd(const Problem& problem, const PbmState& state, double h);

/// Jacobian of the KKT residual in (u, alpha, rho, nu_lower, nu_upper) and
/// minus the residual, built from the dense K_i.
DenseSystem ip_newton_system(const Problem& problem, const IpState& state);

Eigen::VectorXd stack(const PbmStep& step);
Eigen::VectorXd stack(const IpStep& step);

/// Euclidean projection onto {lower <= rho <= upper, sum rho = V}.
std::vector<double> project_feasible(const Problem& problem, std::span<const double> rho);

/// 1/2 f^T K(rho)^{-1} f by dense Cholesky.
double compliance_dense(const Problem& problem, std::span<const double> rho);

struct PrimalSolution {
    std::vector<double> rho;
    double compliance = 0.0;
    int iterations = 0;
};

/// Minimum compliance by projected gradient with an exact (golden-section)
/// line search along the projected direction.
PrimalSolution primal_minimum(const Problem& problem, double tolerance = 1e-13, int max_iterations = 2000);

/// Golden-section minimizer of a convex function on [a, b].
double golden_section(const std::function<double(double)>& f, double a, double b, double tolerance);

} // namespace vts::oracles
