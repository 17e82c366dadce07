#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vts {

/// Compressed sparse row matrix with sorted column indices in every row.
///
/// Used for stiffness matrices, Schur complements, the Galerkin chain and the
/// rectangular transfer operators. Symmetric matrices store the full pattern.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
              std::vector<double> values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t nnz() const { return col_idx_.size(); }

    std::span<const int> row_ptr() const { return row_ptr_; }
    std::span<const int> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Position of entry (i, j) in the value array, or -1 if not in the pattern.
    int find(int i, int j) const;
    double coeff(int i, int j) const;

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const;
    /// y += scale * A x
    void multiply_add(std::span<const double> x, std::span<double> y, double scale = 1.0) const;
    /// y = A^T x
    void multiply_transpose(std::span<const double> x, std::span<double> y) const;

    CsrMatrix transpose() const;

    /// Index into values() of every diagonal entry; -1 where the diagonal is
    /// structurally absent.
    std::vector<int> diagonal_positions() const;

    /// max |a_ij - a_ji| over the stored pattern (pattern asymmetry counts as
    /// the magnitude of the unmatched entry).
    double symmetry_defect() const;
    double max_abs() const;
    int max_row_nnz() const;

    void set_zero();

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_ptr_{0};
    std::vector<int> col_idx_;
    std::vector<double> values_;
};

/// C = A * B (Gustavson's algorithm, rows of C sorted).
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

/// Galerkin coarse operator R * A * P with R = P^T.
///
/// The pattern is computed once; refresh() recomputes only the values, which is
/// what the solvers need when A changes every Newton step but its pattern
/// stays fixed.
class GalerkinProduct {
public:
    GalerkinProduct(const CsrMatrix& restriction, const CsrMatrix& fine, const CsrMatrix& prolongation);

    const CsrMatrix& result() const { return coarse_; }
    void refresh(const CsrMatrix& fine);

private:
    const CsrMatrix* restriction_;
    const CsrMatrix* prolongation_;
    CsrMatrix fine_times_p_;
    CsrMatrix coarse_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

} // namespace vts
