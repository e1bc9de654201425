#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spamm/errors.hpp"

namespace spamm {

/// Row-major dense matrix. Every element is finite.
template <typename T>
class DenseMatrix {
public:
    using value_type = T;

    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(checked_size(rows, cols), T{0}) {}

    /// Takes ownership of `values` (row-major, length rows*cols). Rejects NaN/Inf.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != checked_size(rows, cols)) {
            throw ValidationError("DenseMatrix: element count does not match shape");
        }
        for (const T& v : data_) {
            if (!std::isfinite(v)) {
                throw ValidationError("DenseMatrix: non-finite element");
            }
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = T{1};
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    T& at(std::size_t i, std::size_t j) {
        check_index(i, j);
        return (*this)(i, j);
    }
    [[nodiscard]] const T& at(std::size_t i, std::size_t j) const {
        check_index(i, j);
        return (*this)(i, j);
    }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
    [[nodiscard]] std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    [[nodiscard]] std::span<const T> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    template <typename U>
    [[nodiscard]] DenseMatrix<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t k = 0; k < data_.size(); ++k) {
            out[k] = static_cast<U>(data_[k]);
        }
        DenseMatrix<U> result;
        result.assign_unchecked(rows_, cols_, std::move(out));
        return result;
    }

    /// Frobenius norm accumulated in double.
    [[nodiscard]] double frobenius_norm() const noexcept {
        double sum = 0.0;
        for (const T& v : data_) {
            sum += static_cast<double>(v) * static_cast<double>(v);
        }
        return std::sqrt(sum);
    }

    [[nodiscard]] double max_abs() const noexcept {
        double m = 0.0;
        for (const T& v : data_) {
            m = std::max(m, std::abs(static_cast<double>(v)));
        }
        return m;
    }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) = default;

    // Skips the finiteness scan; callers guarantee the invariant.
    void assign_unchecked(std::size_t rows, std::size_t cols, std::vector<T> values) {
        rows_ = rows;
        cols_ = cols;
        data_ = std::move(values);
    }

private:
    static std::size_t checked_size(std::size_t rows, std::size_t cols) {
        if (cols != 0 && rows > static_cast<std::size_t>(-1) / cols) {
            throw ValidationError("DenseMatrix: dimension overflow");
        }
        return rows * cols;
    }

    void check_index(std::size_t i, std::size_t j) const {
        if (i >= rows_ || j >= cols_) {
            throw std::out_of_range("DenseMatrix: index out of range");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using DenseMatrixF = DenseMatrix<float>;
using DenseMatrixD = DenseMatrix<double>;

/// True when every element of `a` and `b` has the same bit pattern.
bool bitwise_equal(const DenseMatrixF& a, const DenseMatrixF& b);

} // namespace spamm
