#include "vts/sparse.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vts {

CsrMatrix::CsrMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
                     std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values))
{
    if (rows_ < 0 || cols_ < 0 || row_ptr_.size() != static_cast<std::size_t>(rows_) + 1)
        throw std::invalid_argument("CsrMatrix: row pointer size does not match row count");
    if (col_idx_.size() != values_.size() || static_cast<std::size_t>(row_ptr_.back()) != col_idx_.size())
        throw std::invalid_argument("CsrMatrix: inconsistent index/value arrays");
}

int CsrMatrix::find(int i, int j) const
{
    auto first = col_idx_.begin() + row_ptr_[i];
    auto last = col_idx_.begin() + row_ptr_[i + 1];
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j)
        return -1;
    return static_cast<int>(it - col_idx_.begin());
}

double CsrMatrix::coeff(int i, int j) const
{
    const int pos = find(i, j);
    return pos < 0 ? 0.0 : values_[pos];
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const
{
    assert(x.size() == static_cast<std::size_t>(cols_) && y.size() == static_cast<std::size_t>(rows_));
    for (int i = 0; i < rows_; ++i) {
        double sum = 0.0;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            sum += values_[k] * x[col_idx_[k]];
        y[i] = sum;
    }
}

void CsrMatrix::multiply_add(std::span<const double> x, std::span<double> y, double scale) const
{
    for (int i = 0; i < rows_; ++i) {
        double sum = 0.0;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            sum += values_[k] * x[col_idx_[k]];
        y[i] += scale * sum;
    }
}

void CsrMatrix::multiply_transpose(std::span<const double> x, std::span<double> y) const
{
    std::fill(y.begin(), y.end(), 0.0);
    for (int i = 0; i < rows_; ++i) {
        const double xi = x[i];
        if (xi == 0.0)
            continue;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            y[col_idx_[k]] += values_[k] * xi;
    }
}

CsrMatrix CsrMatrix::transpose() const
{
    std::vector<int> ptr(static_cast<std::size_t>(cols_) + 1, 0);
    for (int c : col_idx_)
        ++ptr[c + 1];
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    std::vector<int> idx(nnz());
    std::vector<double> val(nnz());
    std::vector<int> next(ptr.begin(), ptr.end() - 1);
    // rows are visited in increasing order, so each transposed row ends up sorted
    for (int i = 0; i < rows_; ++i) {
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            const int dst = next[col_idx_[k]]++;
            idx[dst] = i;
            val[dst] = values_[k];
        }
    }
    return CsrMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
}

std::vector<int> CsrMatrix::diagonal_positions() const
{
    std::vector<int> diag(static_cast<std::size_t>(std::min(rows_, cols_)));
    for (int i = 0; i < static_cast<int>(diag.size()); ++i)
        diag[i] = find(i, i);
    return diag;
}

double CsrMatrix::symmetry_defect() const
{
    double defect = 0.0;
    for (int i = 0; i < rows_; ++i) {
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            const int j = col_idx_[k];
            const int pos = (j < rows_ && i < cols_) ? find(j, i) : -1;
            const double other = pos < 0 ? 0.0 : values_[pos];
            defect = std::max(defect, std::abs(values_[k] - other));
        }
    }
    return defect;
}

double CsrMatrix::max_abs() const
{
    double m = 0.0;
    for (double v : values_)
        m = std::max(m, std::abs(v));
    return m;
}

int CsrMatrix::max_row_nnz() const
{
    int m = 0;
    for (int i = 0; i < rows_; ++i)
        m = std::max(m, row_ptr_[i + 1] - row_ptr_[i]);
    return m;
}

void CsrMatrix::set_zero()
{
    std::fill(values_.begin(), values_.end(), 0.0);
}

namespace {

CsrMatrix multiply_symbolic(const CsrMatrix& a, const CsrMatrix& b)
{
    if (a.cols() != b.rows())
        throw std::invalid_argument("multiply: inner dimensions differ");
    const auto ap = a.row_ptr();
    const auto ai = a.col_idx();
    const auto bp = b.row_ptr();
    const auto bi = b.col_idx();

    std::vector<int> ptr(static_cast<std::size_t>(a.rows()) + 1, 0);
    std::vector<int> idx;
    std::vector<int> marker(static_cast<std::size_t>(b.cols()), -1);
    for (int i = 0; i < a.rows(); ++i) {
        const auto row_start = idx.size();
        for (int k = ap[i]; k < ap[i + 1]; ++k) {
            const int mid = ai[k];
            for (int l = bp[mid]; l < bp[mid + 1]; ++l) {
                const int j = bi[l];
                if (marker[j] != i) {
                    marker[j] = i;
                    idx.push_back(j);
                }
            }
        }
        std::sort(idx.begin() + static_cast<std::ptrdiff_t>(row_start), idx.end());
        ptr[i + 1] = static_cast<int>(idx.size());
    }
    std::vector<double> val(idx.size(), 0.0);
    return CsrMatrix(a.rows(), b.cols(), std::move(ptr), std::move(idx), std::move(val));
}

// Fills the values of c = a * b, where c already holds the product pattern.
void multiply_numeric(const CsrMatrix& a, const CsrMatrix& b, CsrMatrix& c, std::vector<double>& accum)
{
    const auto ap = a.row_ptr();
    const auto ai = a.col_idx();
    const auto av = a.values();
    const auto bp = b.row_ptr();
    const auto bi = b.col_idx();
    const auto bv = b.values();
    const auto cp = c.row_ptr();
    const auto ci = c.col_idx();
    auto cv = c.values();
    accum.assign(static_cast<std::size_t>(b.cols()), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = ap[i]; k < ap[i + 1]; ++k) {
            const int mid = ai[k];
            const double aik = av[k];
            for (int l = bp[mid]; l < bp[mid + 1]; ++l)
                accum[bi[l]] += aik * bv[l];
        }
        for (int k = cp[i]; k < cp[i + 1]; ++k) {
            cv[k] = accum[ci[k]];
            accum[ci[k]] = 0.0;
        }
    }
}

} // namespace

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b)
{
    CsrMatrix c = multiply_symbolic(a, b);
    std::vector<double> accum;
    multiply_numeric(a, b, c, accum);
    return c;
}

GalerkinProduct::GalerkinProduct(const CsrMatrix& restriction, const CsrMatrix& fine,
                                 const CsrMatrix& prolongation)
    : restriction_(&restriction), prolongation_(&prolongation),
      fine_times_p_(multiply_symbolic(fine, prolongation)),
      coarse_(multiply_symbolic(restriction, fine_times_p_))
{
    refresh(fine);
}

void GalerkinProduct::refresh(const CsrMatrix& fine)
{
    std::vector<double> accum;
    multiply_numeric(fine, *prolongation_, fine_times_p_, accum);
    multiply_numeric(*restriction_, fine_times_p_, coarse_, accum);
}

double dot(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a)
{
    return std::sqrt(dot(a, a));
}

double norm_inf(std::span<const double> a)
{
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

void axpy(double a, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += a * x[i];
}

} // namespace vts
