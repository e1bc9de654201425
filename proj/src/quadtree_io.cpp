#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "spamm/quadtree.hpp"

namespace spamm {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'P', 'A', 'M', 'M', 'Q', 'T', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        bytes[b] = static_cast<char>((value >> (8 * b)) & 0xFFU);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) {
        throw FormatError("quadtree dump: truncated input");
    }
    U value = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
        value |= static_cast<U>(bytes[b]) << (8 * b);
    }
    return value;
}

} // namespace

void write_quadtree(std::ostream& out, const QuadtreeMatrix& q) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint64_t>(out, q.rows());
    put_le<std::uint64_t>(out, q.cols());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.leaf_size()));
    put_le<std::uint32_t>(out, q.depth());
    put_le<std::uint64_t>(out, q.leaf_count());
    for (const Key key : q.keys_at_tier(q.depth())) {
        put_le<std::uint64_t>(out, key);
        for (const float v : q.leaf_values(*q.find_leaf(key))) {
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    if (!out) {
        throw IoError("quadtree dump: write failed");
    }
}

QuadtreeMatrix read_quadtree(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw FormatError("quadtree dump: bad magic");
    }
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    const auto leaf_size = get_le<std::uint32_t>(in);
    const auto depth = get_le<std::uint32_t>(in);
    const auto leaves = get_le<std::uint64_t>(in);
    if (rows == 0 || cols == 0 || leaf_size == 0 || !std::has_single_bit(leaf_size)) {
        throw FormatError("quadtree dump: invalid header");
    }
    QuadtreeMatrix q(rows, cols, leaf_size);
    if (q.depth() != depth) {
        throw FormatError("quadtree dump: depth does not match dimensions");
    }
    const std::uint64_t slots = std::uint64_t{1} << (2 * depth);
    if (leaves > slots) {
        throw FormatError("quadtree dump: leaf count exceeds tree capacity");
    }
    for (std::uint64_t n = 0; n < leaves; ++n) {
        const auto key = get_le<std::uint64_t>(in);
        if (key >= slots || q.find_leaf(key)) {
            throw FormatError("quadtree dump: invalid or duplicate leaf key");
        }
        const LeafHandle h = q.ensure_leaf(key);
        for (float& v : q.leaf_values(h)) {
            v = std::bit_cast<float>(get_le<std::uint32_t>(in));
            if (!std::isfinite(v)) {
                throw FormatError("quadtree dump: non-finite value");
            }
        }
        const auto [bi, bj] = morton::decode(key);
        const auto values = q.leaf_values(h);
        for (std::size_t i = 0; i < leaf_size; ++i) {
            for (std::size_t j = 0; j < leaf_size; ++j) {
                const bool padding = bi * leaf_size + i >= rows || bj * leaf_size + j >= cols;
                if (padding && values[i * leaf_size + j] != 0.0F) {
                    throw FormatError("quadtree dump: nonzero value in the padding region");
                }
            }
        }
    }
    q.compute_norms();
    return q;
}

void save_quadtree(const std::string& path, const QuadtreeMatrix& q) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_quadtree(out, q);
}

QuadtreeMatrix load_quadtree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_quadtree(in);
}

} // namespace spamm
