#pragma once

#include "vts/mesh.hpp"
#include "vts/sparse.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace vts {

struct Material {
    double young = 1.0;
    double poisson = 0.3;
};

using ElementMatrix = Eigen::Matrix<double, 24, 24>;
using ElementVector = Eigen::Matrix<double, 24, 1>;

/// Stiffness of an 8-node trilinear hexahedron (cube of the given edge),
/// integrated with 2x2x2 Gauss quadrature. Local DOF 3a+c is component c of
/// node a, with node a at offset (a&1, (a>>1)&1, (a>>2)&1).
ElementMatrix element_stiffness(const Material& material, double edge);

/// (n+1)x(n+1) symmetric matrix [A b; b^T c] with a sparse principal block and
/// one dense border row/column. An empty border means a plain n x n matrix.
struct BorderedMatrix {
    CsrMatrix block;
    std::vector<double> border;
    double corner = 0.0;

    bool bordered() const { return !border.empty(); }
    int size() const { return block.rows() + (bordered() ? 1 : 0); }
    void apply(std::span<const double> x, std::span<double> y) const;
};

/// Element-level kernels on one mesh level: K(rho), sum K_i, q_i = 1/2 u^T K_i u,
/// B(u) w and B(u)^T v, and the bordered Schur-complement assembly shared by the
/// PBM and IP solvers. K_i is never materialized globally.
class Assembler {
public:
    Assembler(const MeshLevel& level, ElementMatrix element_matrix);

    int elements() const { return static_cast<int>(element_dofs_.size()); }
    int dofs() const { return pattern_.rows(); }
    const ElementMatrix& element_matrix() const { return ke_; }
    const std::array<int, 24>& element_dofs(int e) const { return element_dofs_[static_cast<std::size_t>(e)]; }

    /// Zero-valued matrix with the pattern of sum K_i.
    const CsrMatrix& pattern() const { return pattern_; }

    CsrMatrix assemble(std::span<const double> rho) const;
    void assemble_into(std::span<const double> rho, CsrMatrix& out) const;
    CsrMatrix assemble_sum() const;

    /// y = K(rho) x without assembling.
    void apply_stiffness(std::span<const double> rho, std::span<const double> x, std::span<double> y) const;

    /// q_i = 1/2 u^T K_i u
    void energies(std::span<const double> u, std::span<double> q) const;
    std::vector<double> energies(std::span<const double> u) const;

    /// out = B(u) w = sum_i w_i K_i u
    void apply_b(std::span<const double> u, std::span<const double> w, std::span<double> out) const;
    /// out_i = (K_i u)^T v
    void apply_bt(std::span<const double> u, std::span<const double> v, std::span<double> out) const;

    /// Assembles
    ///   sum_i stiff_i [K_i 0; 0 0] + sum_i rank1_i w_i w_i^T,  w_i = [K_i u; sign]
    /// with sign = +1 or -1. This is the shape of both Schur complements.
    BorderedMatrix assemble_bordered(std::span<const double> u, std::span<const double> stiff,
                                     std::span<const double> rank1, double sign) const;

    ElementVector gather(std::span<const double> u, int e) const;

private:
    ElementMatrix ke_;
    std::vector<std::array<int, 24>> element_dofs_;
    CsrMatrix pattern_;

    template <class ElementBlock>
    void scatter(CsrMatrix& out, int e, const ElementBlock& block) const;
};

} // namespace vts
