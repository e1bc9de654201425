#pragma once

// Symbolic phase of the linkless-tree multiply: collect the leaf keys of A
// and B, group them by contraction index k, order each group by descending
// norm and convolve the groups under the product-norm condition
// ||A_ik|| * ||B_kj|| >= tau. The result is an ordered list of leaf products.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "spamm/quadtree.hpp"

namespace spamm {

enum class OperandRole { a, b };

/// Where extract_entries reads the leaves from.
enum class LeafSource {
    array,   // flat leaf storage, handle order
    hashed,  // leaf-tier hash map, bucket order
};

struct IndexEntry {
    Key key = 0;
    float norm = 0.0F;
    LeafHandle leaf = 0;
};

/// Contiguous run [begin, end) of entries sharing one k, norms non-increasing.
struct KBlock {
    std::uint64_t k = 0;  // deinterleaved contraction index
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
};

struct SortedOperand {
    OperandRole role = OperandRole::a;
    std::uint64_t structure = 0;  // structure_id() of the source matrix
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<IndexEntry> entries;
    std::vector<KBlock> blocks;  // ascending k

    [[nodiscard]] std::span<const IndexEntry> block(const KBlock& b) const {
        return std::span<const IndexEntry>(entries).subspan(b.begin, b.size());
    }
};

struct ProductTask {
    LeafHandle a = 0;
    LeafHandle b = 0;
    Key a_key = 0;
    Key b_key = 0;
    Key c_key = 0;
    double norm_product = 0.0;
};

struct PlanStats {
    std::uint64_t emitted = 0;
    std::uint64_t examined = 0;  // norm products evaluated
    std::uint64_t pruned = 0;    // evaluations that failed the condition (loop exits)
    std::uint64_t candidate_pairs = 0;  // sum over k of |A_k| * |B_k|

    friend bool operator==(const PlanStats&, const PlanStats&) = default;
};

struct MultiplyPlan {
    double tau = 0.0;
    std::vector<ProductTask> tasks;
    PlanStats stats;
    // Identity of the operands the handles refer to.
    std::uint64_t a_structure = 0;
    std::uint64_t b_structure = 0;
    std::size_t rows = 0;   // rows of A
    std::size_t inner = 0;  // cols of A == rows of B
    std::size_t cols = 0;   // cols of B
};

/// One entry per stored leaf. Requires norms to be current.
std::vector<IndexEntry> extract_entries(const QuadtreeMatrix& q, LeafSource source = LeafSource::array);

/// Stable merge sort on the masked contraction index of the given role.
void sort_by_k(std::vector<IndexEntry>& entries, OperandRole role);

/// Splits k-sorted entries into k-blocks and orders every block by
/// descending norm, ties by ascending key.
SortedOperand sort_kblocks_by_norm(std::vector<IndexEntry> entries, OperandRole role);

/// Convenience: extract, sort by k, sort blocks by norm.
SortedOperand prepare_operand(const QuadtreeMatrix& q, OperandRole role, LeafSource source = LeafSource::array);

/// Nested convolution over matching k-blocks with early loop exits.
/// Products exactly equal to tau are kept.
MultiplyPlan convolve(const SortedOperand& a, const SortedOperand& b, double tau);

/// Same plan as convolve(), k-blocks distributed over OpenMP threads and the
/// per-block task lists concatenated in ascending k.
MultiplyPlan convolve_parallel(const SortedOperand& a, const SortedOperand& b, double tau);

/// Full symbolic multiply of A * B. Validates shapes and leaf sizes.
MultiplyPlan plan_multiply(const QuadtreeMatrix& a, const QuadtreeMatrix& b, double tau, bool parallel = false);

inline PlanStats plan_stats(const MultiplyPlan& plan) { return plan.stats; }

/// Debug dump, one "l_A l_B l_C normprod" line per task in plan order.
void write_plan(std::ostream& out, const MultiplyPlan& plan);

} // namespace spamm
