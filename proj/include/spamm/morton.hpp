#pragma once

// Linear quadtree indices. A key interleaves the bits of a row-block index i
// and a column-block index j with the row bit in the higher position of each
// pair:  l = sum_m  i_m * 2^(2m+1) + j_m * 2^(2m).
// Each tier appends two bits on the right, so parent/child navigation is a
// 2-bit shift.

#include <cstdint>
#include <stdexcept>
#include <utility>

namespace spamm::morton {

using Key = std::uint64_t;

/// Bit positions holding column digits (j of a key; k of an A key).
inline constexpr Key kOddMask = 0x5555555555555555ULL;
/// Bit positions holding row digits (i of a key; k of a B key).
inline constexpr Key kEvenMask = 0xAAAAAAAAAAAAAAAAULL;

/// Largest coordinate (exclusive) that fits in a 64-bit key.
inline constexpr std::uint64_t kCoordinateLimit = std::uint64_t{1} << 32;

/// Spreads the low 32 bits of x onto the even bit positions 0,2,4,...
constexpr std::uint64_t dilate(std::uint64_t x) noexcept {
    x &= 0x00000000FFFFFFFFULL;
    x = (x | (x << 16)) & 0x0000FFFF0000FFFFULL;
    x = (x | (x << 8)) & 0x00FF00FF00FF00FFULL;
    x = (x | (x << 4)) & 0x0F0F0F0F0F0F0F0FULL;
    x = (x | (x << 2)) & 0x3333333333333333ULL;
    x = (x | (x << 1)) & 0x5555555555555555ULL;
    return x;
}

/// Inverse of dilate: gathers the even bit positions into the low 32 bits.
constexpr std::uint64_t undilate(std::uint64_t x) noexcept {
    x &= 0x5555555555555555ULL;
    x = (x | (x >> 1)) & 0x3333333333333333ULL;
    x = (x | (x >> 2)) & 0x0F0F0F0F0F0F0F0FULL;
    x = (x | (x >> 4)) & 0x00FF00FF00FF00FFULL;
    x = (x | (x >> 8)) & 0x0000FFFF0000FFFFULL;
    x = (x | (x >> 16)) & 0x00000000FFFFFFFFULL;
    return x;
}

constexpr Key encode_unchecked(std::uint64_t i, std::uint64_t j) noexcept {
    return (dilate(i) << 1) | dilate(j);
}

/// Throws std::overflow_error when a coordinate does not fit in 32 bits.
constexpr Key encode(std::uint64_t i, std::uint64_t j) {
    if (i >= kCoordinateLimit || j >= kCoordinateLimit) {
        throw std::overflow_error("morton::encode: coordinate exceeds 64-bit key width");
    }
    return encode_unchecked(i, j);
}

constexpr std::pair<std::uint64_t, std::uint64_t> decode(Key l) noexcept {
    return {undilate(l >> 1), undilate(l)};
}

/// Contraction index of an A key (its column digits), left in the odd lane.
constexpr Key k_of_a(Key l_a) noexcept { return l_a & kOddMask; }

/// Contraction index of a B key (its row digits), left in the even lane.
constexpr Key k_of_b(Key l_b) noexcept { return l_b & kEvenMask; }

/// True when A_ik and B_kj share the same k.
constexpr bool k_match(Key l_a, Key l_b) noexcept { return k_of_a(l_a) == (k_of_b(l_b) >> 1); }

/// Key of C_ij from A_ik and B_kj: row digits of A, column digits of B.
constexpr Key c_index(Key l_a, Key l_b) noexcept { return (l_a & kEvenMask) | (l_b & kOddMask); }

/// Quadrant q: 0 = upper left, 1 = upper right, 2 = lower left, 3 = lower right.
constexpr Key child(Key l, unsigned q) noexcept { return (l << 2) | (q & 3U); }

constexpr Key parent(Key l) noexcept { return l >> 2; }

constexpr unsigned quadrant(Key l) noexcept { return static_cast<unsigned>(l & 3U); }

/// splitmix64 finalizer; used to hash keys for the node store.
struct KeyHash {
    std::size_t operator()(Key k) const noexcept {
        k += 0x9E3779B97F4A7C15ULL;
        k = (k ^ (k >> 30)) * 0xBF58476D1CE4E5B9ULL;
        k = (k ^ (k >> 27)) * 0x94D049BB133111EBULL;
        return static_cast<std::size_t>(k ^ (k >> 31));
    }
};

} // namespace spamm::morton
