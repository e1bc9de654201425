#include "spamm/generators.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace spamm {

namespace {

constexpr double kTwoPow53 = 9007199254740992.0;

double uniform_symmetric(std::mt19937_64& rng) {
    return 2.0 * (static_cast<double>(rng() >> 11U) / kTwoPow53) - 1.0;
}

std::size_t distance(std::size_t x, std::size_t y) { return x > y ? x - y : y - x; }

// Envelope as a function of (block or element) distance, precomputed.
class EnvelopeTable {
public:
    explicit EnvelopeTable(const GeneratorSpec& spec) : spec_(spec) {
        if (spec.kind == DecayKind::blocked_decay) {
            atoms_ = atom_of_rows(spec.n, spec.blocks);
        }
        const std::size_t span = spec.kind == DecayKind::blocked_decay && !atoms_.empty() ? atoms_.back() + 1 : spec.n;
        table_.resize(span);
        for (std::size_t d = 0; d < span; ++d) {
            table_[d] = evaluate(d);
        }
    }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        if (spec_.kind == DecayKind::blocked_decay) {
            return table_[distance(atoms_[i], atoms_[j])];
        }
        return table_[distance(i, j)];
    }

private:
    [[nodiscard]] double evaluate(std::size_t d) const {
        const double dd = static_cast<double>(d);
        switch (spec_.kind) {
        case DecayKind::exponential:
        case DecayKind::blocked_decay:
            return spec_.c * std::pow(spec_.lambda, dd);
        case DecayKind::algebraic:
            return spec_.c / (std::pow(dd, spec_.lambda) + 1.0);
        case DecayKind::random_dense:
            return spec_.c;
        }
        return 0.0;
    }

    const GeneratorSpec& spec_;
    std::vector<std::size_t> atoms_;
    std::vector<double> table_;
};

float draw(std::mt19937_64& rng, double env) {
    const double v = env * uniform_symmetric(rng);
    float f = static_cast<float>(v);
    if (std::abs(static_cast<double>(f)) > env) {
        f = std::nextafter(f, 0.0F);
    }
    if (std::abs(f) < std::numeric_limits<float>::min()) {
        f = 0.0F;
    }
    return f;
}

} // namespace

std::string_view to_string(DecayKind kind) {
    switch (kind) {
    case DecayKind::exponential:
        return "exponential";
    case DecayKind::algebraic:
        return "algebraic";
    case DecayKind::blocked_decay:
        return "blocked-decay";
    case DecayKind::random_dense:
        return "random-dense";
    }
    return "unknown";
}

DecayKind parse_decay_kind(std::string_view name) {
    for (const DecayKind k :
         {DecayKind::exponential, DecayKind::algebraic, DecayKind::blocked_decay, DecayKind::random_dense}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ValidationError("unknown generator kind: " + std::string(name));
}

void validate(const GeneratorSpec& spec) {
    if (spec.n == 0) {
        throw ValidationError("generator: n must be positive");
    }
    if (!std::isfinite(spec.c) || spec.c < 0.0) {
        throw ValidationError("generator: magnitude c must be finite and nonnegative");
    }
    switch (spec.kind) {
    case DecayKind::exponential:
    case DecayKind::blocked_decay:
        if (!(spec.lambda > 0.0 && spec.lambda < 1.0)) {
            throw ValidationError("generator: exponential decay needs 0 < lambda < 1");
        }
        break;
    case DecayKind::algebraic:
        if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda)) {
            throw ValidationError("generator: algebraic decay needs lambda > 0");
        }
        break;
    case DecayKind::random_dense:
        break;
    }
    if (spec.kind == DecayKind::blocked_decay) {
        if (spec.blocks.empty()) {
            throw ValidationError("generator: blocked decay needs a block pattern");
        }
        for (const std::size_t b : spec.blocks) {
            if (b == 0) {
                throw ValidationError("generator: block sizes must be positive");
            }
        }
    }
}

std::vector<std::size_t> atom_of_rows(std::size_t n, const std::vector<std::size_t>& blocks) {
    std::vector<std::size_t> atoms(n);
    std::size_t atom = 0;
    std::size_t pattern = 0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (filled == blocks[pattern]) {
            filled = 0;
            ++atom;
            pattern = (pattern + 1) % blocks.size();
        }
        atoms[i] = atom;
        ++filled;
    }
    return atoms;
}

double envelope(const GeneratorSpec& spec, std::size_t i, std::size_t j) {
    validate(spec);
    if (i >= spec.n || j >= spec.n) {
        throw std::out_of_range("envelope: index out of range");
    }
    return EnvelopeTable(spec)(i, j);
}

DenseMatrixF generate(const GeneratorSpec& spec) {
    validate(spec);
    const EnvelopeTable env(spec);
    const std::size_t n = spec.n;
    std::vector<float> values(n * n, 0.0F);
    std::mt19937_64 rng(spec.seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = spec.symmetrize ? i : 0; j < n; ++j) {
            const float v = draw(rng, env(i, j));
            values[i * n + j] = v;
            if (spec.symmetrize) {
                values[j * n + i] = v;
            }
        }
    }
    DenseMatrixF m;
    m.assign_unchecked(n, n, std::move(values));
    return m;
}

} // namespace spamm
