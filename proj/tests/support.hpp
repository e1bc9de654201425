#pragma once

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <random>

#include "spamm/dense_matrix.hpp"
#include "spamm/quadtree.hpp"

namespace spamm::test {

inline DenseMatrixF random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, float scale = 1.0F) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0F, 1.0F);
    DenseMatrixF m(rows, cols);
    for (float& v : m.values()) {
        v = scale * dist(rng);
    }
    return m;
}

// Random matrix with roughly `density` of its 16x16 blocks nonzero.
inline DenseMatrixF block_sparse_matrix(std::size_t rows, std::size_t cols, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0F, 1.0F);
    std::bernoulli_distribution keep(density);
    DenseMatrixF m(rows, cols);
    for (std::size_t bi = 0; bi < rows; bi += 16) {
        for (std::size_t bj = 0; bj < cols; bj += 16) {
            if (!keep(rng)) {
                continue;
            }
            const float scale = std::pow(10.0F, -6.0F * static_cast<float>(std::abs(dist(rng))));
            for (std::size_t i = bi; i < std::min(rows, bi + 16); ++i) {
                for (std::size_t j = bj; j < std::min(cols, bj + 16); ++j) {
                    m(i, j) = scale * dist(rng);
                }
            }
        }
    }
    return m;
}

// Norm check applied to every quadtree the tests build.
inline bool norms_consistent(const QuadtreeMatrix& q) { return q.check_invariants(1e-6).ok; }

} // namespace spamm::test
