#include "conceptgcn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("DenseMatrix: " + std::to_string(data_.size()) +
                             " values for shape " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw DimensionError("DenseMatrix::from_rows: ragged rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string shape_of(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string shape_of(const SparseMatrixCSR& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " (csr)";
}

namespace {

// out = sum_k coef[k] * row(k) of a row-major block with `n` columns, taken
// in ascending k. Row k is base + idx[k] * n, or base + k * n when idx is
// null. `out` must hold zeros on entry.
template <std::size_t N>
void combine_fixed(const double* coef, const std::size_t* idx, std::size_t count,
                   const double* base, double* out) {
    double acc[N] = {};
    for (std::size_t k = 0; k < count; ++k) {
        const double c = coef[k];
        const double* src = base + (idx ? idx[k] : k) * N;
        for (std::size_t j = 0; j < N; ++j) acc[j] += c * src[j];
    }
    std::copy(acc, acc + N, out);
}

void combine_rows(const double* coef, const std::size_t* idx, std::size_t count,
                  const double* base, std::size_t n, double* __restrict out) {
    switch (n) {
        case 1: return combine_fixed<1>(coef, idx, count, base, out);
        case 2: return combine_fixed<2>(coef, idx, count, base, out);
        case 3: return combine_fixed<3>(coef, idx, count, base, out);
        case 4: return combine_fixed<4>(coef, idx, count, base, out);
        case 6: return combine_fixed<6>(coef, idx, count, base, out);
        case 7: return combine_fixed<7>(coef, idx, count, base, out);
        case 8: return combine_fixed<8>(coef, idx, count, base, out);
        case 16: return combine_fixed<16>(coef, idx, count, base, out);
        case 32: return combine_fixed<32>(coef, idx, count, base, out);
        default: break;
    }
    for (std::size_t k = 0; k < count; ++k) {
        const double c = coef[k];
        const double* __restrict src = base + (idx ? idx[k] : k) * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += c * src[j];
    }
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_of(a) + " by " + shape_of(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    if (out.empty()) return out;
    // Zero terms are added too: the sum starts at +0 and can never become
    // -0, so adding a signed zero leaves it bitwise unchanged and the result
    // still matches spmm, which only visits stored entries.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        combine_rows(a.row(i).data(), nullptr, a.cols(), b.values().data(), b.cols(),
                     out.row(i).data());
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

DenseMatrix hconcat(std::initializer_list<const DenseMatrix*> blocks) {
    if (blocks.size() == 0) return {};
    std::size_t rows = (*blocks.begin())->rows();
    std::size_t cols = 0;
    for (const DenseMatrix* b : blocks) {
        // A zero-width block carries no row information.
        if (b->cols() == 0 && b->rows() == 0) continue;
        if (rows == 0 && cols == 0) rows = b->rows();
        if (b->rows() != rows) {
            throw DimensionError("hconcat: row count mismatch (" + std::to_string(rows) +
                                 " vs " + shape_of(*b) + ")");
        }
        cols += b->cols();
    }
    DenseMatrix out(rows, cols);
    std::size_t offset = 0;
    for (const DenseMatrix* b : blocks) {
        if (b->cols() == 0) continue;
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(b->row(i).begin(), b->row(i).end(), out.row(i).begin() + offset);
        }
        offset += b->cols();
    }
    return out;
}

DenseMatrix slice_cols(const DenseMatrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.cols()) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of " + shape_of(m));
    }
    DenseMatrix out(m.rows(), end - begin);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto src = m.row(i);
        std::copy(src.begin() + begin, src.begin() + end, out.row(i).begin());
    }
    return out;
}

bool all_finite(const DenseMatrix& m) noexcept {
    return std::all_of(m.values().begin(), m.values().end(),
                       [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("max_abs_diff: " + shape_of(a) + " vs " + shape_of(b));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    }
    return worst;
}

DenseMatrix row_normalize(const DenseMatrix& m) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        double norm = 0.0;
        for (double v : row) norm += std::abs(v);
        if (norm == 0.0) continue;
        for (double& v : row) v /= norm;
    }
    return out;
}

// --- SparseMatrixCSR --------------------------------------------------------

SparseMatrixCSR::SparseMatrixCSR(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrixCSR::SparseMatrixCSR(std::size_t rows, std::size_t cols,
                                 std::vector<std::size_t> row_ptr,
                                 std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    validate();
}

void SparseMatrixCSR::validate() const {
    if (row_ptr_.size() != rows_ + 1) {
        throw ContractError("csr: row_ptr length " + std::to_string(row_ptr_.size()) +
                            " != rows+1");
    }
    if (row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        col_idx_.size() != values_.size()) {
        throw ContractError("csr: row_ptr/col_idx/values lengths disagree");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
        if (row_ptr_[r] > row_ptr_[r + 1]) throw ContractError("csr: row_ptr decreasing");
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (col_idx_[k] >= cols_) throw ContractError("csr: column index out of range");
            if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
                throw ContractError("csr: column indices not strictly increasing in row " +
                                    std::to_string(r));
            }
            if (values_[k] == 0.0) throw ContractError("csr: explicit zero stored");
        }
    }
}

SparseMatrixCSR SparseMatrixCSR::from_dense(const DenseMatrix& m) {
    std::vector<std::size_t> row_ptr(m.rows() + 1, 0);
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (row[j] != 0.0) {
                col_idx.push_back(j);
                values.push_back(row[j]);
            }
        }
        row_ptr[i + 1] = col_idx.size();
    }
    return SparseMatrixCSR(m.rows(), m.cols(), std::move(row_ptr), std::move(col_idx),
                           std::move(values));
}

SparseMatrixCSR SparseMatrixCSR::from_triplets(std::size_t rows, std::size_t cols,
                                               std::vector<Triplet> triplets,
                                               Duplicates policy) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) {
            throw DimensionError("from_triplets: entry (" + std::to_string(t.row) + "," +
                                 std::to_string(t.col) + ") outside " + std::to_string(rows) +
                                 "x" + std::to_string(cols));
        }
    }
    // Stable sort keeps duplicate merging order independent of std::sort internals.
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> row_ptr(rows + 1, 0);
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    col_idx.reserve(triplets.size());
    values.reserve(triplets.size());
    std::size_t i = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        while (i < triplets.size() && triplets[i].row == r) {
            const std::size_t c = triplets[i].col;
            double v = triplets[i].value;
            ++i;
            while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) {
                v = policy == Duplicates::sum ? v + triplets[i].value
                                              : std::max(v, triplets[i].value);
                ++i;
            }
            if (v != 0.0) {
                col_idx.push_back(c);
                values.push_back(v);
            }
        }
        row_ptr[r + 1] = col_idx.size();
    }
    return SparseMatrixCSR(rows, cols, std::move(row_ptr), std::move(col_idx),
                           std::move(values));
}

SparseMatrixCSR SparseMatrixCSR::identity(std::size_t n) {
    std::vector<std::size_t> row_ptr(n + 1);
    std::vector<std::size_t> col_idx(n);
    for (std::size_t i = 0; i <= n; ++i) row_ptr[i] = i;
    for (std::size_t i = 0; i < n; ++i) col_idx[i] = i;
    return SparseMatrixCSR(n, n, std::move(row_ptr), std::move(col_idx),
                           std::vector<double>(n, 1.0));
}

double SparseMatrixCSR::at(std::size_t r, std::size_t c) const {
    if (r >= rows_ || c >= cols_) throw DimensionError("csr::at: index out of range");
    const auto cols = row_cols(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

DenseMatrix SparseMatrixCSR::to_dense() const {
    DenseMatrix out(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out(r, col_idx_[k]) = values_[k];
    return out;
}

SparseMatrixCSR SparseMatrixCSR::transposed() const {
    std::vector<std::size_t> row_ptr(cols_ + 1, 0);
    for (std::size_t c : col_idx_) ++row_ptr[c + 1];
    for (std::size_t c = 0; c < cols_; ++c) row_ptr[c + 1] += row_ptr[c];
    std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
    std::vector<std::size_t> col_idx(nnz());
    std::vector<double> values(nnz());
    // Visiting rows in ascending order keeps output columns sorted.
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const std::size_t dst = cursor[col_idx_[k]]++;
            col_idx[dst] = r;
            values[dst] = values_[k];
        }
    }
    return SparseMatrixCSR(cols_, rows_, std::move(row_ptr), std::move(col_idx),
                           std::move(values));
}

DenseMatrix spmm(const SparseMatrixCSR& s, const DenseMatrix& d) {
    if (s.cols() != d.rows()) {
        throw DimensionError("spmm: cannot multiply " + shape_of(s) + " by " + shape_of(d));
    }
    DenseMatrix out(s.rows(), d.cols());
    if (out.empty()) return out;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto cols = s.row_cols(r);
        combine_rows(s.row_values(r).data(), cols.data(), cols.size(), d.values().data(),
                     d.cols(), out.row(r).data());
    }
    return out;
}

DenseMatrix spmm_transposed(const SparseMatrixCSR& s, const DenseMatrix& d) {
    if (s.rows() != d.rows()) {
        throw DimensionError("spmm_transposed: cannot multiply transpose of " + shape_of(s) +
                             " by " + shape_of(d));
    }
    DenseMatrix out(s.cols(), d.cols());
    const std::size_t n = d.cols();
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto src = d.row(r);
        // Mini-batch gradients are mostly zero rows.
        if (std::all_of(src.begin(), src.end(), [](double x) { return x == 0.0; })) continue;
        const auto cols = s.row_cols(r);
        const auto vals = s.row_values(r);
        const double* __restrict in_row = src.data();
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double* __restrict dst = out.row(cols[k]).data();
            const double v = vals[k];
            for (std::size_t j = 0; j < n; ++j) dst[j] += v * in_row[j];
        }
    }
    return out;
}

SparseMatrixCSR linear_combination(double alpha, const SparseMatrixCSR& a, double beta,
                                   const SparseMatrixCSR& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("linear_combination: " + shape_of(a) + " vs " + shape_of(b));
    }
    std::vector<std::size_t> row_ptr(a.rows() + 1, 0);
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto ac = a.row_cols(r);
        const auto av = a.row_values(r);
        const auto bc = b.row_cols(r);
        const auto bv = b.row_values(r);
        std::size_t i = 0, j = 0;
        while (i < ac.size() || j < bc.size()) {
            std::size_t c;
            double v;
            if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
                c = ac[i];
                v = alpha * av[i++];
            } else if (i == ac.size() || bc[j] < ac[i]) {
                c = bc[j];
                v = beta * bv[j++];
            } else {
                c = ac[i];
                v = alpha * av[i++] + beta * bv[j++];
            }
            if (v != 0.0) {
                col_idx.push_back(c);
                values.push_back(v);
            }
        }
        row_ptr[r + 1] = col_idx.size();
    }
    return SparseMatrixCSR(a.rows(), a.cols(), std::move(row_ptr), std::move(col_idx),
                           std::move(values));
}

SparseMatrixCSR symmetric_normalize(const SparseMatrixCSR& s) {
    if (s.rows() != s.cols()) {
        throw DimensionError("symmetric_normalize: matrix must be square, got " + shape_of(s));
    }
    std::vector<double> degree(s.rows(), 0.0);
    for (std::size_t r = 0; r < s.rows(); ++r) {
        for (double v : s.row_values(r)) degree[r] += v;
    }
    std::vector<std::size_t> row_ptr(s.row_ptr().begin(), s.row_ptr().end());
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    col_idx.reserve(s.nnz());
    values.reserve(s.nnz());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto cols = s.row_cols(r);
        const auto vals = s.row_values(r);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            // d_r * d_c is commutative, so (r,c) and (c,r) round identically;
            // for integer degrees it is also exact.
            const double dd = degree[r] * degree[cols[k]];
            const double v = dd > 0.0 ? vals[k] / std::sqrt(dd) : 0.0;
            col_idx.push_back(cols[k]);
            values.push_back(v);
        }
        row_ptr[r + 1] = col_idx.size();
    }
    // Rows with zero total produce zeros; rebuild through triplets to drop them.
    const bool has_zero = std::any_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
    if (has_zero) {
        std::vector<Triplet> triplets;
        for (std::size_t r = 0; r < s.rows(); ++r)
            for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                triplets.push_back({r, col_idx[k], values[k]});
        return SparseMatrixCSR::from_triplets(s.rows(), s.cols(), std::move(triplets));
    }
    return SparseMatrixCSR(s.rows(), s.cols(), std::move(row_ptr), std::move(col_idx),
                           std::move(values));
}

double asymmetry(const SparseMatrixCSR& s) {
    if (s.rows() != s.cols()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const auto cols = s.row_cols(r);
        const auto vals = s.row_values(r);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto other = s.row_cols(cols[k]);
            if (!std::binary_search(other.begin(), other.end(), r)) {
                return std::numeric_limits<double>::infinity();
            }
            worst = std::max(worst, std::abs(vals[k] - s.at(cols[k], r)));
        }
    }
    return worst;
}

}  // namespace conceptgcn
