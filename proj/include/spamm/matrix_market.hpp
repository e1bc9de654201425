#pragma once

#include <iosfwd>
#include <string>

#include "spamm/dense_matrix.hpp"

namespace spamm {

enum class MatrixMarketFormat { array, coordinate };

/// Reads real or integer MatrixMarket files (array or coordinate; general,
/// symmetric or skew-symmetric) into full dense storage. Complex, pattern
/// and hermitian files are rejected with FormatError.
template <typename T>
DenseMatrix<T> read_matrix_market(std::istream& in);

/// Writes a general real matrix with enough digits for an exact round trip.
/// Coordinate output lists only nonzero elements.
template <typename T>
void write_matrix_market(std::ostream& out, const DenseMatrix<T>& m,
                         MatrixMarketFormat format = MatrixMarketFormat::array);

DenseMatrixF load_matrix(const std::string& path);
void save_matrix(const std::string& path, const DenseMatrixF& m,
                 MatrixMarketFormat format = MatrixMarketFormat::array);

} // namespace spamm
