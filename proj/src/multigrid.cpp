#include "vts/multigrid.hpp"

#include <cmath>
#include <stdexcept>

namespace vts {

MultigridPreconditioner::MultigridPreconditioner(const Hierarchy& mesh, BorderedMatrix fine, SmootherConfig config)
    : mesh_(&mesh), config_(config)
{
    if (fine.block.rows() != mesh.finest().free_dofs)
        throw std::invalid_argument("multigrid: operator size does not match the finest mesh level");
    if (config_.pre_sweeps < 0 || config_.post_sweeps < 0)
        throw std::invalid_argument("multigrid: sweep counts must be non-negative");
    const auto levels = mesh.levels.size();
    ops_.resize(levels);
    groups_.resize(levels);
    block_inv_.resize(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        const MeshLevel& level = mesh.levels[k];
        auto& starts = groups_[k];
        for (int node = 0; node < level.node_count(); ++node) {
            int first = -1;
            for (int c = 0; c < 3; ++c) {
                const int d = level.dof_map[static_cast<std::size_t>(3 * node + c)];
                if (d >= 0 && first < 0)
                    first = d;
            }
            if (first >= 0)
                starts.push_back(config_.nodal_blocks ? first : -1);
        }
        if (!config_.nodal_blocks) {
            starts.resize(static_cast<std::size_t>(level.free_dofs));
            for (int i = 0; i < level.free_dofs; ++i)
                starts[static_cast<std::size_t>(i)] = i;
        }
        starts.push_back(level.free_dofs);
    }
    ops_.back() = std::move(fine);
    galerkin_.resize(levels - 1);
    for (std::size_t k = levels - 1; k > 0; --k) {
        const TransferOperator& t = mesh.transfers[k - 1];
        galerkin_[k - 1] = std::make_unique<GalerkinProduct>(t.restriction, ops_[k].block, t.prolongation);
        ops_[k - 1].block = galerkin_[k - 1]->result();
    }
    rebuild();
}

void MultigridPreconditioner::update(BorderedMatrix fine)
{
    if (fine.block.rows() != ops_.back().block.rows() || fine.block.nnz() != ops_.back().block.nnz())
        throw std::invalid_argument("multigrid: update requires the same sparsity pattern");
    ops_.back() = std::move(fine);
    rebuild();
}

void MultigridPreconditioner::rebuild()
{
    for (std::size_t k = ops_.size() - 1; k > 0; --k) {
        const TransferOperator& t = mesh_->transfers[k - 1];
        galerkin_[k - 1]->refresh(ops_[k].block);
        BorderedMatrix& coarse = ops_[k - 1];
        coarse.block = galerkin_[k - 1]->result();
        if (ops_[k].bordered()) {
            coarse.border.assign(static_cast<std::size_t>(coarse.block.rows()), 0.0);
            t.restriction.multiply(ops_[k].border, coarse.border);
            coarse.corner = ops_[k].corner;
        } else {
            coarse.border.clear();
            coarse.corner = 0.0;
        }
    }
    for (std::size_t k = 0; k < ops_.size(); ++k) {
        const CsrMatrix& a = ops_[k].block;
        const auto ptr = a.row_ptr();
        const auto idx = a.col_idx();
        const auto val = a.values();
        const auto& starts = groups_[k];
        auto& inv = block_inv_[k];
        inv.resize(starts.size() - 1);
        for (std::size_t g = 0; g + 1 < starts.size(); ++g) {
            const int s = starts[g], e = starts[g + 1];
            Eigen::Matrix3d block = Eigen::Matrix3d::Identity();
            for (int i = s; i < e; ++i)
                for (int p = ptr[i]; p < ptr[i + 1]; ++p)
                    if (idx[p] >= s && idx[p] < e)
                        block(i - s, idx[p] - s) = val[p];
            inv[g] = block.inverse();
        }
    }

    const BorderedMatrix& c = ops_.front();
    const int n = c.size();
    const int nb = c.block.rows();
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    const auto ptr = c.block.row_ptr();
    const auto idx = c.block.col_idx();
    const auto val = c.block.values();
    for (int i = 0; i < nb; ++i)
        for (int k = ptr[i]; k < ptr[i + 1]; ++k)
            dense(i, idx[k]) = val[k];
    if (c.bordered()) {
        for (int i = 0; i < nb; ++i) {
            dense(i, nb) = c.border[i];
            dense(nb, i) = c.border[i];
        }
        dense(nb, nb) = c.corner;
    }
    coarse_shift_ = 0.0;
    coarse_factor_.compute(dense);
    if (coarse_factor_.info() != Eigen::Success) {
        // semidefinite (or round-off indefinite) coarse matrix
        double shift = 1e-12 * std::max(dense.trace(), 1e-300) / n;
        for (int attempt = 0; attempt < 12; ++attempt, shift *= 10.0) {
            Eigen::MatrixXd shifted = dense;
            shifted.diagonal().array() += shift;
            coarse_factor_.compute(shifted);
            if (coarse_factor_.info() == Eigen::Success) {
                coarse_shift_ = shift;
                break;
            }
        }
        if (coarse_factor_.info() != Eigen::Success)
            throw std::runtime_error("multigrid: coarsest matrix could not be factorized even after regularization");
    }
}

void MultigridPreconditioner::apply(std::span<const double> r, std::span<double> z) const
{
    std::fill(z.begin(), z.end(), 0.0);
    cycle(levels() - 1, r, z);
}

void MultigridPreconditioner::vcycle(std::span<const double> b, std::span<double> x) const
{
    if (b.size() != static_cast<std::size_t>(ops_.back().size()) || x.size() != b.size())
        throw std::invalid_argument("vcycle: vector length does not match the operator");
    cycle(levels() - 1, b, x);
}

void MultigridPreconditioner::relax_group(int level, int g, std::span<const double> b, std::span<double> x) const
{
    const BorderedMatrix& a = ops_[static_cast<std::size_t>(level)];
    const auto& starts = groups_[static_cast<std::size_t>(level)];
    const auto ptr = a.block.row_ptr();
    const auto idx = a.block.col_idx();
    const auto val = a.block.values();
    const int n = a.block.rows();
    const int s = starts[static_cast<std::size_t>(g)], e = starts[static_cast<std::size_t>(g) + 1];
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (int i = s; i < e; ++i) {
        double sum = b[i];
        if (a.bordered())
            sum -= a.border[i] * x[n];
        for (int k = ptr[i]; k < ptr[i + 1]; ++k)
            sum -= val[k] * x[idx[k]];
        r(i - s) = sum;
    }
    const Eigen::Vector3d d = block_inv_[static_cast<std::size_t>(level)][static_cast<std::size_t>(g)] * r;
    for (int i = s; i < e; ++i)
        x[i] += d(i - s);
}

void MultigridPreconditioner::smooth_forward(int level, std::span<const double> b, std::span<double> x) const
{
    const int groups = static_cast<int>(groups_[static_cast<std::size_t>(level)].size()) - 1;
    for (int g = 0; g < groups; ++g)
        relax_group(level, g, b, x);
}

void MultigridPreconditioner::smooth_backward(int level, std::span<const double> b, std::span<double> x) const
{
    const int groups = static_cast<int>(groups_[static_cast<std::size_t>(level)].size()) - 1;
    for (int g = groups - 1; g >= 0; --g)
        relax_group(level, g, b, x);
}

void MultigridPreconditioner::relax_border(int level, std::span<const double> b, std::span<double> x) const
{
    const BorderedMatrix& a = ops_[static_cast<std::size_t>(level)];
    if (!a.bordered() || a.corner == 0.0)
        return;
    const int n = a.block.rows();
    double coupling = 0.0;
    for (int i = 0; i < n; ++i)
        coupling += a.border[i] * x[i];
    x[n] = (b[n] - coupling) / a.corner;
}

void MultigridPreconditioner::cycle(int level, std::span<const double> b, std::span<double> x) const
{
    const BorderedMatrix& a = ops_[static_cast<std::size_t>(level)];
    const int size = a.size();
    if (level == 0) {
        // x <- x + A^{-1}(b - A x) = A^{-1} b for the exact coarse solve
        Eigen::Map<const Eigen::VectorXd> rhs(b.data(), size);
        Eigen::Map<Eigen::VectorXd> sol(x.data(), size);
        sol = coarse_factor_.solve(rhs);
        return;
    }
    const bool finest = level == levels() - 1;

    for (int s = 0; s < config_.pre_sweeps; ++s)
        smooth_forward(level, b, x);
    if (finest)
        relax_border(level, b, x);

    std::vector<double> residual(static_cast<std::size_t>(size));
    a.apply(x, residual);
    for (int i = 0; i < size; ++i)
        residual[i] = b[i] - residual[i];

    const TransferOperator& t = mesh_->transfers[static_cast<std::size_t>(level - 1)];
    const BorderedMatrix& coarse = ops_[static_cast<std::size_t>(level - 1)];
    const auto nc = static_cast<std::size_t>(coarse.block.rows());
    const auto nf = static_cast<std::size_t>(a.block.rows());
    std::vector<double> coarse_rhs(static_cast<std::size_t>(coarse.size()));
    std::vector<double> correction(coarse_rhs.size(), 0.0);
    t.restriction.multiply(std::span<const double>(residual).first(nf), std::span<double>(coarse_rhs).first(nc));
    if (a.bordered())
        coarse_rhs[nc] = residual[nf];

    cycle(level - 1, coarse_rhs, correction);

    t.prolongation.multiply_add(std::span<const double>(correction).first(nc), x.first(nf));
    if (a.bordered())
        x[nf] += correction[nc];

    if (finest)
        relax_border(level, b, x);
    for (int s = 0; s < config_.post_sweeps; ++s)
        smooth_backward(level, b, x);
}

} // namespace vts
