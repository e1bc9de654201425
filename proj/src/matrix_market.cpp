#include "spamm/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <type_traits>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

namespace spamm {

namespace {

// Largest element count accepted from a header (16 GiB of floats).
constexpr std::size_t kMaxElements = std::size_t{1} << 32;

enum class Symmetry { general, symmetric, skew };

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

struct Header {
    MatrixMarketFormat format = MatrixMarketFormat::array;
    Symmetry symmetry = Symmetry::general;
};

Header parse_banner(const std::string& line) {
    std::istringstream ss(line);
    std::string banner;
    std::string object;
    std::string format;
    std::string field;
    std::string symmetry;
    ss >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix") {
        throw FormatError("MatrixMarket: missing or malformed banner");
    }
    Header h;
    format = lower(format);
    if (format == "array") {
        h.format = MatrixMarketFormat::array;
    } else if (format == "coordinate") {
        h.format = MatrixMarketFormat::coordinate;
    } else {
        throw FormatError("MatrixMarket: unknown format '" + format + "'");
    }
    field = lower(field);
    if (field != "real" && field != "integer" && field != "double") {
        throw FormatError("MatrixMarket: unsupported field '" + field + "' (real or integer required)");
    }
    symmetry = lower(symmetry);
    if (symmetry == "general") {
        h.symmetry = Symmetry::general;
    } else if (symmetry == "symmetric") {
        h.symmetry = Symmetry::symmetric;
    } else if (symmetry == "skew-symmetric") {
        h.symmetry = Symmetry::skew;
    } else {
        throw FormatError("MatrixMarket: unsupported symmetry '" + symmetry + "'");
    }
    return h;
}

// Streams whitespace-separated tokens, skipping '%' comment lines.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    bool next(std::string& token) {
        while (true) {
            if (line_ >> token) {
                return true;
            }
            std::string raw;
            if (!std::getline(in_, raw)) {
                return false;
            }
            if (!raw.empty() && raw[0] == '%') {
                continue;
            }
            line_.clear();
            line_.str(raw);
        }
    }

    std::string expect() {
        std::string token;
        if (!next(token)) {
            throw FormatError("MatrixMarket: unexpected end of file");
        }
        return token;
    }

private:
    std::istream& in_;
    std::istringstream line_;
};

std::size_t parse_index(const std::string& token) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw FormatError("MatrixMarket: bad integer '" + token + "'");
    }
    return value;
}

template <typename T>
T parse_value(const std::string& token) {
    T value{};
    const char* first = token.data();
    if (!token.empty() && token[0] == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
    if (ec == std::errc::result_out_of_range) {
        // Subnormal values: strtof/strtod still return the correctly rounded result.
        char* end = nullptr;
        if constexpr (std::is_same_v<T, float>) {
            value = std::strtof(token.c_str(), &end);
        } else {
            value = std::strtod(token.c_str(), &end);
        }
        ptr = end;
        ec = std::errc();
    }
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw FormatError("MatrixMarket: bad value '" + token + "'");
    }
    if (!std::isfinite(value)) {
        throw FormatError("MatrixMarket: non-finite value");
    }
    return value;
}

void place(auto& m, Symmetry symmetry, std::size_t i, std::size_t j, auto v, bool accumulate) {
    if (accumulate) {
        m(i, j) += v;
    } else {
        m(i, j) = v;
    }
    if (i != j && symmetry != Symmetry::general) {
        const auto mirrored = symmetry == Symmetry::skew ? -v : v;
        if (accumulate) {
            m(j, i) += mirrored;
        } else {
            m(j, i) = mirrored;
        }
    }
}

} // namespace

template <typename T>
DenseMatrix<T> read_matrix_market(std::istream& in) {
    std::string banner;
    if (!std::getline(in, banner)) {
        throw FormatError("MatrixMarket: empty input");
    }
    const Header header = parse_banner(banner);
    TokenReader tokens(in);
    const std::size_t rows = parse_index(tokens.expect());
    const std::size_t cols = parse_index(tokens.expect());
    if (rows == 0 || cols == 0 || rows > kMaxElements / cols) {
        throw FormatError("MatrixMarket: dimension overflow or empty matrix");
    }
    if (header.symmetry != Symmetry::general && rows != cols) {
        throw FormatError("MatrixMarket: symmetric storage requires a square matrix");
    }
    DenseMatrix<T> m(rows, cols);

    if (header.format == MatrixMarketFormat::array) {
        // Column-major; symmetric variants list the lower triangle only
        // (skew-symmetric also omits the diagonal).
        for (std::size_t j = 0; j < cols; ++j) {
            std::size_t first = 0;
            if (header.symmetry == Symmetry::symmetric) {
                first = j;
            } else if (header.symmetry == Symmetry::skew) {
                first = j + 1;
            }
            for (std::size_t i = first; i < rows; ++i) {
                place(m, header.symmetry, i, j, parse_value<T>(tokens.expect()), false);
            }
        }
    } else {
        const std::size_t nnz = parse_index(tokens.expect());
        if (nnz > rows * cols) {
            throw FormatError("MatrixMarket: more entries than matrix elements");
        }
        for (std::size_t e = 0; e < nnz; ++e) {
            const std::size_t i = parse_index(tokens.expect());
            const std::size_t j = parse_index(tokens.expect());
            const T v = parse_value<T>(tokens.expect());
            if (i == 0 || j == 0 || i > rows || j > cols) {
                throw FormatError("MatrixMarket: entry index out of range");
            }
            if (header.symmetry != Symmetry::general && j > i) {
                throw FormatError("MatrixMarket: symmetric file lists an upper-triangle entry");
            }
            if (header.symmetry == Symmetry::skew && i == j) {
                throw FormatError("MatrixMarket: skew-symmetric file lists a diagonal entry");
            }
            place(m, header.symmetry, i - 1, j - 1, v, true);
        }
    }
    std::string extra;
    if (tokens.next(extra)) {
        throw FormatError("MatrixMarket: trailing data after the last entry");
    }
    for (const T& v : m.values()) {
        if (!std::isfinite(v)) {
            throw FormatError("MatrixMarket: accumulated value overflowed");
        }
    }
    return m;
}

template <typename T>
void write_matrix_market(std::ostream& out, const DenseMatrix<T>& m, MatrixMarketFormat format) {
    const auto precision = out.precision(std::numeric_limits<T>::max_digits10);
    if (format == MatrixMarketFormat::array) {
        out << "%%MatrixMarket matrix array real general\n";
        out << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t j = 0; j < m.cols(); ++j) {
            for (std::size_t i = 0; i < m.rows(); ++i) {
                out << m(i, j) << '\n';
            }
        }
    } else {
        std::size_t nnz = 0;
        for (const T& v : m.values()) {
            nnz += v != T{0} ? 1 : 0;
        }
        out << "%%MatrixMarket matrix coordinate real general\n";
        out << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
        for (std::size_t j = 0; j < m.cols(); ++j) {
            for (std::size_t i = 0; i < m.rows(); ++i) {
                if (m(i, j) != T{0}) {
                    out << (i + 1) << ' ' << (j + 1) << ' ' << m(i, j) << '\n';
                }
            }
        }
    }
    out.precision(precision);
    if (!out) {
        throw IoError("MatrixMarket: write failed");
    }
}

template DenseMatrix<float> read_matrix_market<float>(std::istream&);
template DenseMatrix<double> read_matrix_market<double>(std::istream&);
template void write_matrix_market<float>(std::ostream&, const DenseMatrix<float>&, MatrixMarketFormat);
template void write_matrix_market<double>(std::ostream&, const DenseMatrix<double>&, MatrixMarketFormat);

DenseMatrixF load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_matrix_market<float>(in);
}

void save_matrix(const std::string& path, const DenseMatrixF& m, MatrixMarketFormat format) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_matrix_market(out, m, format);
}

} // namespace spamm
