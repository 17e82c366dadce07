#include "vts/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vts {

ElementMatrix element_stiffness(const Material& material, double edge)
{
    const double E = material.young;
    const double nu = material.poisson;
    if (!(E > 0.0))
        throw std::invalid_argument("element_stiffness: Young modulus must be positive");
    if (!(nu >= 0.0 && nu < 0.5))
        throw std::invalid_argument("element_stiffness: Poisson ratio must lie in [0, 0.5)");
    if (!(edge > 0.0))
        throw std::invalid_argument("element_stiffness: edge length must be positive");

    const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = E / (2.0 * (1.0 + nu));
    Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            D(i, j) = lambda;
        D(i, i) = lambda + 2.0 * mu;
        D(i + 3, i + 3) = mu;
    }

    const double gp = 1.0 / std::sqrt(3.0);
    const double jac = edge / 2.0;
    const double det = jac * jac * jac;
    ElementMatrix ke = ElementMatrix::Zero();
    for (int g = 0; g < 8; ++g) {
        const double xi[3] = {(g & 1) ? gp : -gp, ((g >> 1) & 1) ? gp : -gp, ((g >> 2) & 1) ? gp : -gp};
        Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
        for (int a = 0; a < 8; ++a) {
            const double s[3] = {(a & 1) ? 1.0 : -1.0, ((a >> 1) & 1) ? 1.0 : -1.0, ((a >> 2) & 1) ? 1.0 : -1.0};
            const double f[3] = {1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]};
            // physical derivatives: dN/dx = dN/dxi / jac
            const double dx = s[0] * f[1] * f[2] / 8.0 / jac;
            const double dy = s[1] * f[0] * f[2] / 8.0 / jac;
            const double dz = s[2] * f[0] * f[1] / 8.0 / jac;
            const int c = 3 * a;
            B(0, c) = dx;
            B(1, c + 1) = dy;
            B(2, c + 2) = dz;
            B(3, c) = dy;
            B(3, c + 1) = dx;
            B(4, c + 1) = dz;
            B(4, c + 2) = dy;
            B(5, c) = dz;
            B(5, c + 2) = dx;
        }
        ke.noalias() += B.transpose() * D * B * det;
    }
    return 0.5 * (ke + ke.transpose());
}

void BorderedMatrix::apply(std::span<const double> x, std::span<double> y) const
{
    const auto n = static_cast<std::size_t>(block.rows());
    block.multiply(x.first(n), y.first(n));
    if (!bordered())
        return;
    const double lambda = x[n];
    double last = corner * lambda;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += border[i] * lambda;
        last += border[i] * x[i];
    }
    y[n] = last;
}

Assembler::Assembler(const MeshLevel& level, ElementMatrix element_matrix) : ke_(std::move(element_matrix))
{
    const int m = level.element_count();
    element_dofs_.reserve(static_cast<std::size_t>(m));
    for (int e = 0; e < m; ++e)
        element_dofs_.push_back(level.element_dofs(e));

    const int n = level.free_dofs;
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
    for (const auto& dofs : element_dofs_)
        for (int a : dofs) {
            if (a < 0)
                continue;
            for (int b : dofs)
                if (b >= 0)
                    rows[a].push_back(b);
        }
    std::vector<int> ptr{0};
    std::vector<int> idx;
    ptr.reserve(static_cast<std::size_t>(n) + 1);
    for (auto& row : rows) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        idx.insert(idx.end(), row.begin(), row.end());
        ptr.push_back(static_cast<int>(idx.size()));
        std::vector<int>().swap(row);
    }
    std::vector<double> val(idx.size(), 0.0);
    pattern_ = CsrMatrix(n, n, std::move(ptr), std::move(idx), std::move(val));
}

template <class ElementBlock>
void Assembler::scatter(CsrMatrix& out, int e, const ElementBlock& block) const
{
    const auto& dofs = element_dofs_[static_cast<std::size_t>(e)];
    auto values = out.values();
    const auto ptr = out.row_ptr();
    const auto cols = out.col_idx();
    for (int a = 0; a < 24; ++a) {
        const int row = dofs[a];
        if (row < 0)
            continue;
        const int* first = cols.data() + ptr[row];
        const int* last = cols.data() + ptr[row + 1];
        for (int b = 0; b < 24; ++b) {
            const int col = dofs[b];
            if (col < 0)
                continue;
            const int* it = std::lower_bound(first, last, col);
            values[static_cast<std::size_t>(it - cols.data())] += block(a, b);
        }
    }
}

ElementVector Assembler::gather(std::span<const double> u, int e) const
{
    ElementVector ue;
    const auto& dofs = element_dofs_[static_cast<std::size_t>(e)];
    for (int a = 0; a < 24; ++a)
        ue[a] = dofs[a] >= 0 ? u[dofs[a]] : 0.0;
    return ue;
}

CsrMatrix Assembler::assemble(std::span<const double> rho) const
{
    CsrMatrix k = pattern_;
    assemble_into(rho, k);
    return k;
}

void Assembler::assemble_into(std::span<const double> rho, CsrMatrix& out) const
{
    if (rho.size() != element_dofs_.size())
        throw std::invalid_argument("assemble: density length does not match element count");
    out.set_zero();
    for (int e = 0; e < elements(); ++e)
        if (rho[e] != 0.0)
            scatter(out, e, rho[e] * ke_);
}

CsrMatrix Assembler::assemble_sum() const
{
    const std::vector<double> ones(element_dofs_.size(), 1.0);
    return assemble(ones);
}

void Assembler::apply_stiffness(std::span<const double> rho, std::span<const double> x, std::span<double> y) const
{
    std::fill(y.begin(), y.end(), 0.0);
    for (int e = 0; e < elements(); ++e) {
        const ElementVector ke_x = ke_ * gather(x, e);
        const auto& dofs = element_dofs_[static_cast<std::size_t>(e)];
        for (int a = 0; a < 24; ++a)
            if (dofs[a] >= 0)
                y[dofs[a]] += rho[e] * ke_x[a];
    }
}

void Assembler::energies(std::span<const double> u, std::span<double> q) const
{
    if (u.size() != static_cast<std::size_t>(dofs()) || q.size() != element_dofs_.size())
        throw std::invalid_argument("energies: dimension mismatch");
    for (int e = 0; e < elements(); ++e) {
        const ElementVector ue = gather(u, e);
        q[e] = 0.5 * ue.dot(ke_ * ue);
    }
}

std::vector<double> Assembler::energies(std::span<const double> u) const
{
    std::vector<double> q(element_dofs_.size());
    energies(u, q);
    return q;
}

void Assembler::apply_b(std::span<const double> u, std::span<const double> w, std::span<double> out) const
{
    if (u.size() != static_cast<std::size_t>(dofs()) || w.size() != element_dofs_.size() || out.size() != u.size())
        throw std::invalid_argument("apply_b: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (int e = 0; e < elements(); ++e) {
        if (w[e] == 0.0)
            continue;
        const ElementVector ke_u = ke_ * gather(u, e);
        const auto& dofs = element_dofs_[static_cast<std::size_t>(e)];
        for (int a = 0; a < 24; ++a)
            if (dofs[a] >= 0)
                out[dofs[a]] += w[e] * ke_u[a];
    }
}

void Assembler::apply_bt(std::span<const double> u, std::span<const double> v, std::span<double> out) const
{
    if (u.size() != static_cast<std::size_t>(dofs()) || v.size() != u.size() || out.size() != element_dofs_.size())
        throw std::invalid_argument("apply_bt: dimension mismatch");
    for (int e = 0; e < elements(); ++e)
        out[e] = (ke_ * gather(u, e)).dot(gather(v, e));
}

BorderedMatrix Assembler::assemble_bordered(std::span<const double> u, std::span<const double> stiff,
                                            std::span<const double> rank1, double sign) const
{
    if (stiff.size() != element_dofs_.size() || rank1.size() != element_dofs_.size())
        throw std::invalid_argument("assemble_bordered: coefficient length does not match element count");
    BorderedMatrix s;
    s.block = pattern_;
    s.border.assign(static_cast<std::size_t>(dofs()), 0.0);
    s.corner = 0.0;
    for (int e = 0; e < elements(); ++e) {
        const ElementVector ke_u = ke_ * gather(u, e);
        const ElementMatrix block = stiff[e] * ke_ + rank1[e] * (ke_u * ke_u.transpose());
        scatter(s.block, e, block);
        const auto& dofs = element_dofs_[static_cast<std::size_t>(e)];
        for (int a = 0; a < 24; ++a)
            if (dofs[a] >= 0)
                s.border[dofs[a]] += sign * rank1[e] * ke_u[a];
        s.corner += rank1[e];
    }
    return s;
}

} // namespace vts
