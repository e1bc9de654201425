#pragma once

// Oracles and metrics: dense triple-loop products, the recursive quadtree
// multiply with the product-norm condition applied at every tier, the
// max-norm error and the flop model used for effective performance.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spamm/dense_matrix.hpp"
#include "spamm/execution.hpp"
#include "spamm/quadtree.hpp"

namespace spamm {

/// C := alpha * A * B + beta * C in double precision, i-k-j loop order.
/// The parallel path splits rows across threads and gives identical bits.
void dense_gemm_double(double alpha, const DenseMatrixD& a, const DenseMatrixD& b, double beta, DenseMatrixD& c,
                       Execution execution = Execution::parallel);

/// Ground truth A * B for single-precision inputs.
DenseMatrixD dense_multiply_double(const DenseMatrixF& a, const DenseMatrixF& b,
                                   Execution execution = Execution::parallel);

/// Naive single-precision product; every element is a float sum over k in
/// ascending order starting from zero.
DenseMatrixF dense_multiply_single(const DenseMatrixF& a, const DenseMatrixF& b,
                                   Execution execution = Execution::serial);

struct RecursiveResult {
    QuadtreeMatrix c;
    /// Leaf products performed, as (A key, B key) in visit order.
    std::vector<std::pair<Key, Key>> visits;
};

/// Depth-first recursive product. At every tier each of the eight child
/// products is skipped when ||A_ik|| * ||B_kj|| < tau; surviving leaf pairs
/// are multiplied densely (no 4x4 gating). Operands must share depth and
/// leaf size.
RecursiveResult recursive_spamm(const QuadtreeMatrix& a, const QuadtreeMatrix& b, double tau);

struct ErrorReport {
    double max_abs = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
    double tau = 0.0;
    std::string granularity;
};

/// max_ij |C_ij - Cref_ij|, computed in double, with the location of the
/// first maximum in row-major order.
template <typename T, typename U>
ErrorReport max_norm_error(const DenseMatrix<T>& c, const DenseMatrix<U>& ref) {
    if (c.rows() != ref.rows() || c.cols() != ref.cols()) {
        throw ValidationError("max_norm_error: shape mismatch");
    }
    ErrorReport report;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        for (std::size_t j = 0; j < c.cols(); ++j) {
            const double d = std::abs(static_cast<double>(c(i, j)) - static_cast<double>(ref(i, j)));
            if (d > report.max_abs) {
                report.max_abs = d;
                report.row = i;
                report.col = j;
            }
        }
    }
    return report;
}

/// Modeled flops of an m x k by k x n product: m * (k * (1 + 2n) - n).
std::uint64_t flop_model(std::uint64_t m, std::uint64_t k, std::uint64_t n);

/// flops / seconds; throws ValidationError for nonpositive time.
double effective_performance(std::uint64_t flops, double seconds);

} // namespace spamm
