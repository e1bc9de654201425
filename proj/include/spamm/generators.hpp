#pragma once

// Synthetic matrices with decay. Every element is a seeded uniform draw in
// [-1, 1) scaled by an envelope that falls off with index separation:
//   exponential    c * lambda^|i-j|
//   algebraic      c / (|i-j|^lambda + 1)
//   blocked-decay  c * lambda^|I-J|, I and J the indices of the atom-like
//                  diagonal blocks holding i and j (sizes cycle through
//                  `blocks`, e.g. {5, 15} or {1, 5})
//   random-dense   c
// Magnitudes below the smallest normal float are stored as zero.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spamm/dense_matrix.hpp"

namespace spamm {

enum class DecayKind { exponential, algebraic, blocked_decay, random_dense };

struct GeneratorSpec {
    DecayKind kind = DecayKind::blocked_decay;
    std::size_t n = 256;
    double lambda = 0.5;
    double c = 1.0;
    std::vector<std::size_t> blocks{5, 15};
    std::uint64_t seed = 1;
    bool symmetrize = true;
};

std::string_view to_string(DecayKind kind);
DecayKind parse_decay_kind(std::string_view name);

/// Throws ValidationError for an invalid lambda, magnitude or block pattern.
void validate(const GeneratorSpec& spec);

/// Deterministic for a fixed spec (including seed).
DenseMatrixF generate(const GeneratorSpec& spec);

/// Envelope bound for element (i, j) of the spec's matrix.
double envelope(const GeneratorSpec& spec, std::size_t i, std::size_t j);

/// Atom-block index of every row for the blocked-decay kind.
std::vector<std::size_t> atom_of_rows(std::size_t n, const std::vector<std::size_t>& blocks);

} // namespace spamm
