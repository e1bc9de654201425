#include "spamm/reference.hpp"

#include <limits>

namespace spamm {

namespace {

void require_conformable(std::size_t a_cols, std::size_t b_rows) {
    if (a_cols != b_rows) {
        throw ValidationError("dense multiply: inner dimensions do not match");
    }
}

// Row i of C := alpha * A(i,:) * B + beta * C(i,:).
void gemm_row(double alpha, const DenseMatrixD& a, const DenseMatrixD& b, double beta, DenseMatrixD& c,
              std::size_t i) {
    const std::size_t n = b.cols();
    double* crow = c.row(i).data();
    if (beta == 0.0) {
        std::fill_n(crow, n, 0.0);
    } else if (beta != 1.0) {
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] *= beta;
        }
    }
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = alpha * a(i, k);
        if (aik == 0.0) {
            continue;  // exact: operands are finite
        }
        const double* brow = b.row(k).data();
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] += aik * brow[j];
        }
    }
}

struct RecursionState {
    const QuadtreeMatrix& a;
    const QuadtreeMatrix& b;
    QuadtreeMatrix& c;
    double tau;
    std::vector<std::pair<Key, Key>>& visits;
};

void recurse(RecursionState& s, unsigned tier, Key ka, Key kb) {
    const auto na = s.a.node(tier, ka);
    const auto nb = s.b.node(tier, kb);
    if (!na || !nb) {
        return;
    }
    if (static_cast<double>(na->norm) * nb->norm < s.tau) {
        return;
    }
    if (tier == s.a.depth()) {
        s.visits.emplace_back(ka, kb);
        const std::size_t n = s.a.leaf_size();
        const auto av = s.a.leaf_values(*na->leaf);
        const auto bv = s.b.leaf_values(*nb->leaf);
        const auto cv = s.c.leaf_values(s.c.ensure_leaf(morton::c_index(ka, kb)));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const float aik = av[i * n + k];
                for (std::size_t j = 0; j < n; ++j) {
                    cv[i * n + j] += aik * bv[k * n + j];
                }
            }
        }
        return;
    }
    for (unsigned i = 0; i < 2; ++i) {
        for (unsigned j = 0; j < 2; ++j) {
            for (unsigned k = 0; k < 2; ++k) {
                recurse(s, tier + 1, morton::child(ka, (i << 1U) | k), morton::child(kb, (k << 1U) | j));
            }
        }
    }
}

} // namespace

void dense_gemm_double(double alpha, const DenseMatrixD& a, const DenseMatrixD& b, double beta, DenseMatrixD& c,
                       Execution execution) {
    require_conformable(a.cols(), b.rows());
    if (c.rows() != a.rows() || c.cols() != b.cols()) {
        throw ValidationError("dense_gemm_double: result has an incompatible shape");
    }
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
    if (execution == Execution::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            gemm_row(alpha, a, b, beta, c, static_cast<std::size_t>(i));
        }
    } else {
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            gemm_row(alpha, a, b, beta, c, static_cast<std::size_t>(i));
        }
    }
}

DenseMatrixD dense_multiply_double(const DenseMatrixF& a, const DenseMatrixF& b, Execution execution) {
    require_conformable(a.cols(), b.rows());
    DenseMatrixD c(a.rows(), b.cols());
    dense_gemm_double(1.0, a.cast<double>(), b.cast<double>(), 0.0, c, execution);
    return c;
}

DenseMatrixF dense_multiply_single(const DenseMatrixF& a, const DenseMatrixF& b, Execution execution) {
    require_conformable(a.cols(), b.rows());
    DenseMatrixF c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
    // i-k-j order: each C element still sums over k in ascending order.
    auto row_kernel = [&](std::size_t i) {
        float* crow = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const float aik = a(i, k);
            const float* brow = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    };
    if (execution == Execution::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            row_kernel(static_cast<std::size_t>(i));
        }
    } else {
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            row_kernel(static_cast<std::size_t>(i));
        }
    }
    return c;
}

RecursiveResult recursive_spamm(const QuadtreeMatrix& a, const QuadtreeMatrix& b, double tau) {
    if (a.cols() != b.rows()) {
        throw ValidationError("recursive_spamm: inner dimensions do not match");
    }
    if (a.depth() != b.depth() || a.leaf_size() != b.leaf_size()) {
        throw ValidationError("recursive_spamm: operands must share depth and leaf size");
    }
    if (!(tau >= 0.0)) {
        throw ValidationError("recursive_spamm: tolerance must be nonnegative");
    }
    RecursiveResult result{QuadtreeMatrix(a.rows(), b.cols(), a.leaf_size()), {}};
    RecursionState state{a, b, result.c, tau, result.visits};
    recurse(state, 0, 0, 0);
    for (LeafHandle h = 0; h < result.c.leaf_count(); ++h) {
        for (float& v : result.c.leaf_values(h)) {
            v = flush_subnormal(v);
        }
    }
    result.c.compute_norms();
    return result;
}

std::uint64_t flop_model(std::uint64_t m, std::uint64_t k, std::uint64_t n) {
    if (m == 0 || k == 0 || n == 0) {
        throw ValidationError("flop_model: dimensions must be positive");
    }
    std::uint64_t two_n_plus_one = 0;
    std::uint64_t inner = 0;
    std::uint64_t total = 0;
    if (__builtin_mul_overflow(n, std::uint64_t{2}, &two_n_plus_one) ||
        __builtin_add_overflow(two_n_plus_one, std::uint64_t{1}, &two_n_plus_one) ||
        __builtin_mul_overflow(k, two_n_plus_one, &inner) || __builtin_mul_overflow(m, inner - n, &total)) {
        throw std::overflow_error("flop_model: result exceeds 64 bits");
    }
    return total;
}

double effective_performance(std::uint64_t flops, double seconds) {
    if (!(seconds > 0.0)) {
        throw ValidationError("effective_performance: time must be positive");
    }
    return static_cast<double>(flops) / seconds;
}

} // namespace spamm
