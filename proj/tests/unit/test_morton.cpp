#include "doctest.h"

#include <set>
#include <stdexcept>

#include "spamm/morton.hpp"

using namespace spamm::morton;

namespace {

// Bit-by-bit interleave, row bit above column bit.
Key slow_encode(std::uint64_t i, std::uint64_t j) {
    Key l = 0;
    for (unsigned m = 0; m < 32; ++m) {
        l |= ((i >> m) & 1ULL) << (2 * m + 1);
        l |= ((j >> m) & 1ULL) << (2 * m);
    }
    return l;
}

} // namespace

TEST_CASE("encode small coordinates") {
    CHECK(encode(0, 0) == 0);
    CHECK(encode(1, 0) == 2);
    CHECK(encode(0, 1) == 1);
    CHECK(encode(2, 3) == 13);
    CHECK(encode(3, 3) == 15);
}

TEST_CASE("encode matches the bitwise definition") {
    const std::uint64_t samples[] = {0, 1, 5, 0xFFFF, 0x12345678, 0xFFFFFFFF, 0x80000001};
    for (auto i : samples) {
        for (auto j : samples) {
            CHECK(encode(i, j) == slow_encode(i, j));
            CHECK(decode(encode(i, j)) == std::pair{i, j});
        }
    }
}

TEST_CASE("encode rejects coordinates beyond 32 bits") {
    CHECK_THROWS_AS(encode(kCoordinateLimit, 0), std::overflow_error);
    CHECK_THROWS_AS(encode(0, kCoordinateLimit), std::overflow_error);
    CHECK_NOTHROW(encode(kCoordinateLimit - 1, kCoordinateLimit - 1));
}

TEST_CASE("dilate and undilate are inverse") {
    for (std::uint64_t x = 0; x < 4096; ++x) {
        CHECK(undilate(dilate(x)) == x);
        CHECK((dilate(x) & kEvenMask) == 0);
    }
}

TEST_CASE("masks split row and column bits") {
    CHECK((kOddMask | kEvenMask) == ~Key{0});
    CHECK((kOddMask & kEvenMask) == 0);
    CHECK((encode(0xFFFFFFFF, 0) & kOddMask) == 0);
    CHECK((encode(0, 0xFFFFFFFF) & kEvenMask) == 0);
}

TEST_CASE("contraction index match equals column == row") {
    for (std::uint64_t i = 0; i < 16; ++i) {
        for (std::uint64_t k1 = 0; k1 < 16; ++k1) {
            for (std::uint64_t k2 = 0; k2 < 16; ++k2) {
                CHECK(k_match(encode(i, k1), encode(k2, 3)) == (k1 == k2));
            }
        }
    }
}

TEST_CASE("c_index composes the product index") {
    for (std::uint64_t i = 0; i < 32; ++i) {
        for (std::uint64_t k = 0; k < 32; ++k) {
            for (std::uint64_t j = 0; j < 32; ++j) {
                CHECK(c_index(encode(i, k), encode(k, j)) == encode(i, j));
            }
        }
    }
}

TEST_CASE("child and parent navigate one tier") {
    const Key l = encode(5, 9);
    std::set<Key> children;
    for (unsigned q = 0; q < 4; ++q) {
        const Key c = child(l, q);
        CHECK(parent(c) == l);
        CHECK(quadrant(c) == q);
        children.insert(c);
    }
    CHECK(children.size() == 4);
    // Quadrant bits are (row bit, column bit) of the finer coordinates.
    CHECK(child(l, 2) == encode(11, 18));
    CHECK(child(l, 1) == encode(10, 19));
}

TEST_CASE("key hash spreads sequential keys") {
    KeyHash h;
    std::set<std::size_t> seen;
    for (Key k = 0; k < 1000; ++k) {
        seen.insert(h(k));
    }
    CHECK(seen.size() == 1000);
}
