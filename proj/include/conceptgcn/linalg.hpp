#pragma once

// Dense row-major and CSR sparse matrices over 64-bit floats.
//
// All products accumulate in a fixed order (ascending inner index), so the
// same inputs always give bitwise-identical outputs and
//   spmm(S, D) == matmul(S.to_dense(), D)
// holds exactly, not just approximately.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace conceptgcn {

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_of(const DenseMatrix& m);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& m);

// Column-wise concatenation; every block must have the same row count.
// Zero-width blocks are allowed.
DenseMatrix hconcat(std::initializer_list<const DenseMatrix*> blocks);
DenseMatrix slice_cols(const DenseMatrix& m, std::size_t begin, std::size_t end);

bool all_finite(const DenseMatrix& m) noexcept;
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

// Each row divided by its L1 norm; all-zero rows are left untouched.
DenseMatrix row_normalize(const DenseMatrix& m);

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

// Compressed sparse row matrix.
//
// Invariants (checked on construction): row_ptr non-decreasing with
// row_ptr.back() == nnz, column indices in range and strictly increasing
// within a row, no stored zeros.
class SparseMatrixCSR {
public:
    enum class Duplicates { sum, max };

    SparseMatrixCSR() : row_ptr_(1, 0) {}
    SparseMatrixCSR(std::size_t rows, std::size_t cols);
    SparseMatrixCSR(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                    std::vector<std::size_t> col_idx, std::vector<double> values);

    static SparseMatrixCSR from_dense(const DenseMatrix& m);
    // Explicit zeros (after merging duplicates) are dropped.
    static SparseMatrixCSR from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets,
                                         Duplicates policy = Duplicates::sum);
    static SparseMatrixCSR identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return col_idx_.size(); }

    std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<const std::size_t> row_cols(std::size_t r) const noexcept {
        return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }
    std::span<const double> row_values(std::size_t r) const noexcept {
        return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }

    // Binary search within the row; 0 for absent entries.
    double at(std::size_t r, std::size_t c) const;

    DenseMatrix to_dense() const;
    SparseMatrixCSR transposed() const;

    bool operator==(const SparseMatrixCSR&) const = default;

private:
    void validate() const;

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

std::string shape_of(const SparseMatrixCSR& m);

DenseMatrix spmm(const SparseMatrixCSR& s, const DenseMatrix& d);
// s^T * d without materializing the transpose.
DenseMatrix spmm_transposed(const SparseMatrixCSR& s, const DenseMatrix& d);

// alpha * a + beta * b.
SparseMatrixCSR linear_combination(double alpha, const SparseMatrixCSR& a, double beta,
                                   const SparseMatrixCSR& b);

// D^{-1/2} S D^{-1/2} with D the row sums of S. Rows summing to zero stay zero.
SparseMatrixCSR symmetric_normalize(const SparseMatrixCSR& s);

// Same sparsity pattern required; returns max |s_ij - s_ji|, or +inf when the
// patterns differ.
double asymmetry(const SparseMatrixCSR& s);

}  // namespace conceptgcn
