// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#ifndef MILPOOL_MATRIX_HPP
#define MILPOOL_MATRIX_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace milpool {

/// Dense row-major matrix of doubles. Rows are frames (or segments),
/// columns are event classes throughout this library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_)
                throw std::invalid_argument("Matrix::from_rows: ragged input");
            for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    /// Single-column matrix from a flat vector (one class).
    static Matrix column(const std::vector<double>& v) {
        Matrix m(v.size(), 1);
        for (std::size_t r = 0; r < v.size(); ++r) m(r, 0) = v[r];
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

}  // namespace milpool

#endif  // MILPOOL_MATRIX_HPP
