#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spamm/dense_matrix.hpp"
#include "spamm/morton.hpp"

namespace spamm {

using morton::Key;

/// Index of a leaf inside the dense leaf storage of one QuadtreeMatrix.
using LeafHandle = std::uint32_t;

inline constexpr std::size_t kDefaultLeafSize = 16;

/// Side length of the sub-blocks whose norms gate the fine-grained multiply.
inline constexpr std::size_t kSubBlockSize = 4;

/// Smallest d >= 0 with leaf_size * 2^d >= max(rows, cols). Integer arithmetic only.
unsigned tree_depth(std::size_t rows, std::size_t cols, std::size_t leaf_size = kDefaultLeafSize);

/// Zero for magnitudes below the smallest normal float. Computed results are
/// stored through this so every nonzero norm stays in the normal range.
inline float flush_subnormal(float v) noexcept {
    return std::abs(v) < std::numeric_limits<float>::min() ? 0.0F : v;
}

/// Drop tolerance matching the product tolerance: tau / max(norm_a, norm_b).
double drop_tolerance(double tau, double norm_a, double norm_b);

/// Owning 16x16 leaf block with its 4x4 grid of sub-block norms.
struct LeafBlock {
    static constexpr std::size_t kSize = 16;
    static constexpr std::size_t kGrid = kSize / kSubBlockSize;

    std::vector<float> values = std::vector<float>(kSize * kSize, 0.0F);
    std::vector<float> subnorms = std::vector<float>(kGrid * kGrid, 0.0F);
    float norm = 0.0F;

    float& operator()(std::size_t i, std::size_t j) { return values[i * kSize + j]; }
    float operator()(std::size_t i, std::size_t j) const { return values[i * kSize + j]; }

    /// Recomputes subnorms and norm from values.
    void compute_norms();
};

/// Snapshot of one node of the linkless tree.
struct TreeNode {
    unsigned tier = 0;
    Key index = 0;
    float norm = 0.0F;
    std::optional<LeafHandle> leaf;  // set only at the bottom tier
};

/// Result of a full-tree walk over the structural and norm invariants.
struct InvariantReport {
    bool ok = true;
    std::size_t nodes_checked = 0;
    double worst_relative_deviation = 0.0;
    std::string first_violation;
};

/// Zero-padded quadtree over leaf_size x leaf_size dense blocks, stored as a
/// linkless tree: one hash map per tier keyed by the node's linear index.
/// Absent nodes are zero submatrices. Every node carries its Frobenius norm.
///
/// Leaf payloads live in flat arrays indexed by LeafHandle. Handles stay
/// valid until a structural change (leaf insertion keeps them, sparsify and
/// clear invalidate them); structure_id() changes whenever that happens.
class QuadtreeMatrix {
public:
    QuadtreeMatrix() = default;

    /// Empty (all-zero) matrix of the given logical shape.
    QuadtreeMatrix(std::size_t rows, std::size_t cols, std::size_t leaf_size = kDefaultLeafSize);

    static QuadtreeMatrix from_dense(const DenseMatrixF& dense, std::size_t leaf_size = kDefaultLeafSize);
    [[nodiscard]] DenseMatrixF to_dense() const;

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t leaf_size() const noexcept { return leaf_size_; }
    [[nodiscard]] unsigned depth() const noexcept { return depth_; }
    [[nodiscard]] std::size_t padded_size() const noexcept { return leaf_size_ << depth_; }
    [[nodiscard]] std::size_t sub_size() const noexcept;
    [[nodiscard]] std::size_t sub_grid() const noexcept { return leaf_size_ / sub_size(); }
    [[nodiscard]] std::size_t leaf_elements() const noexcept { return leaf_size_ * leaf_size_; }

    /// Frobenius norm of the whole matrix (root norm).
    [[nodiscard]] float norm() const noexcept;

    [[nodiscard]] float get(std::size_t i, std::size_t j) const;
    /// Stores v and refreshes the affected sub-block, leaf and ancestor norms.
    /// Setting a value to zero never removes the leaf.
    void set(std::size_t i, std::size_t j, float v);

    /// Recomputes every norm bottom-up from the leaf values.
    void compute_norms();
    /// Recomputes interior norms from the stored leaf norms.
    void compute_interior_norms();

    /// Zeros every sub-block with subnorm < eps, removes leaves whose norm
    /// becomes zero and refreshes norms. Returns the number of nonzero
    /// sub-blocks that were dropped.
    std::size_t sparsify(double eps);

    /// Multiplies every element by s; products below the normal range become zero.
    void scale(float s);
    /// Removes all leaves; shape is kept.
    void clear();

    [[nodiscard]] std::size_t leaf_count() const noexcept { return leaf_keys_.size(); }
    [[nodiscard]] std::size_t node_count() const noexcept;
    [[nodiscard]] std::optional<LeafHandle> find_leaf(Key key) const;
    /// Returns the leaf at key, creating a zero leaf and its ancestors when
    /// absent. Norms of new nodes are zero until recomputed.
    LeafHandle ensure_leaf(Key key);

    [[nodiscard]] Key leaf_key(LeafHandle h) const { return leaf_keys_.at(h); }
    [[nodiscard]] float leaf_norm(LeafHandle h) const { return leaf_norms_.at(h); }
    [[nodiscard]] std::span<const float> leaf_values(LeafHandle h) const;
    [[nodiscard]] std::span<float> leaf_values(LeafHandle h);
    [[nodiscard]] std::span<const float> leaf_subnorms(LeafHandle h) const;
    /// Recomputes the sub-block norms and the norm of one leaf.
    void compute_leaf_norms(LeafHandle h);

    /// Leaf-tier hash map (key -> handle), iteration order unspecified.
    [[nodiscard]] const std::unordered_map<Key, LeafHandle, morton::KeyHash>& leaf_index() const noexcept {
        return leaf_index_;
    }

    [[nodiscard]] std::optional<TreeNode> node(unsigned tier, Key key) const;
    /// Keys stored at a tier, ascending.
    [[nodiscard]] std::vector<Key> keys_at_tier(unsigned tier) const;

    /// Changes whenever leaves are added or removed.
    [[nodiscard]] std::uint64_t structure_id() const noexcept { return structure_id_; }

    /// Full-tree check: parents exist, interior norm^2 equals the sum of
    /// child norm^2, leaf norms match their values (relative tolerance).
    [[nodiscard]] InvariantReport check_invariants(double relative_tolerance = 1e-6) const;

private:
    void check_element_index(std::size_t i, std::size_t j) const;
    void rebuild_interior_structure();
    void touch_structure() noexcept;

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t leaf_size_ = kDefaultLeafSize;
    unsigned depth_ = 0;
    std::uint64_t structure_id_ = 0;

    // Tiers 0 .. depth-1: key -> Frobenius norm.
    std::vector<std::unordered_map<Key, float, morton::KeyHash>> interior_;
    // Tier depth: key -> leaf handle.
    std::unordered_map<Key, LeafHandle, morton::KeyHash> leaf_index_;

    std::vector<Key> leaf_keys_;
    std::vector<float> leaf_values_;
    std::vector<float> leaf_subnorms_;
    std::vector<float> leaf_norms_;
};

// Binary dump: "SPAMMQT1", then little-endian u64 rows, u64 cols, u32 leaf
// size, u32 depth, u64 leaf count, and per leaf (u64 key, leaf_size^2 f32)
// in ascending key order.
void write_quadtree(std::ostream& out, const QuadtreeMatrix& q);
QuadtreeMatrix read_quadtree(std::istream& in);
void save_quadtree(const std::string& path, const QuadtreeMatrix& q);
QuadtreeMatrix load_quadtree(const std::string& path);

} // namespace spamm
