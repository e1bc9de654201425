#include "spamm/dense_matrix.hpp"

#include <cstring>

namespace spamm {

bool bitwise_equal(const DenseMatrixF& a, const DenseMatrixF& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    return a.size() == 0 ||
           std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

} // namespace spamm
