#pragma once

#include "vts/fem.hpp"
#include "vts/mesh.hpp"

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <vector>

namespace vts {

struct SmootherConfig {
    int pre_sweeps = 2;
    int post_sweeps = 2;
    /// Relax the free DOFs of one node together (3x3 block Gauss-Seidel)
    /// instead of one DOF at a time.
    bool nodal_blocks = true;
};

/// One symmetric geometric-multigrid V-cycle, used as an SPD preconditioner.
///
/// Coarse operators are Galerkin products A_{k-1} = R A_k P over the mesh
/// hierarchy. The optional border unknown is carried between levels by the
/// identity, skipped by the coarse-level Gauss-Seidel sweeps and relaxed once
/// on the finest level (before the coarse correction on the way down, after it
/// on the way up, so the cycle stays symmetric). The coarsest level is solved
/// by dense Cholesky.
class MultigridPreconditioner {
public:
    MultigridPreconditioner(const Hierarchy& mesh, BorderedMatrix fine, SmootherConfig config = {});

    /// Replaces the finest operator (same sparsity pattern) and rebuilds the chain.
    void update(BorderedMatrix fine);

    /// z = B r, one V-cycle from a zero initial guess.
    void apply(std::span<const double> r, std::span<double> z) const;

    /// One V-cycle for A x = b starting from the current x.
    void vcycle(std::span<const double> b, std::span<double> x) const;

    int levels() const { return static_cast<int>(ops_.size()); }
    const BorderedMatrix& op(int level) const { return ops_[static_cast<std::size_t>(level)]; }
    const BorderedMatrix& fine_operator() const { return ops_.back(); }

    /// Diagonal shift added to the coarsest matrix when it was not numerically
    /// positive definite (0 when the plain factorization succeeded).
    double coarse_shift() const { return coarse_shift_; }

private:
    void rebuild();
    void cycle(int level, std::span<const double> b, std::span<double> x) const;
    void smooth_forward(int level, std::span<const double> b, std::span<double> x) const;
    void smooth_backward(int level, std::span<const double> b, std::span<double> x) const;
    void relax_border(int level, std::span<const double> b, std::span<double> x) const;
    void relax_group(int level, int g, std::span<const double> b, std::span<double> x) const;

    const Hierarchy* mesh_;
    SmootherConfig config_;
    std::vector<BorderedMatrix> ops_;
    /// Per level: first free DOF of every node group (plus the end), and the
    /// inverted diagonal blocks padded to 3x3.
    std::vector<std::vector<int>> groups_;
    std::vector<std::vector<Eigen::Matrix3d>> block_inv_;
    std::vector<std::unique_ptr<GalerkinProduct>> galerkin_;
    Eigen::LLT<Eigen::MatrixXd> coarse_factor_;
    double coarse_shift_ = 0.0;
};

} // namespace vts
