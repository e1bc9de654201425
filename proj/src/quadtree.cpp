#include "spamm/quadtree.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace spamm {

namespace {

std::atomic<std::uint64_t> g_next_structure_id{1};

std::uint64_t next_structure_id() noexcept {
    return g_next_structure_id.fetch_add(1, std::memory_order_relaxed);
}

void require_leaf_size(std::size_t leaf_size) {
    if (leaf_size == 0 || !std::has_single_bit(leaf_size)) {
        throw ValidationError("leaf size must be a power of two");
    }
}

double sub_block_square_sum(const float* values, std::size_t stride, std::size_t row0, std::size_t col0,
                            std::size_t size) noexcept {
    double sum = 0.0;
    for (std::size_t i = row0; i < row0 + size; ++i) {
        for (std::size_t j = col0; j < col0 + size; ++j) {
            const double v = values[i * stride + j];
            sum += v * v;
        }
    }
    return sum;
}

// Fills subnorms (grid x grid) and returns the block norm. Sums run in double.
float block_norms(const float* values, std::size_t leaf_size, std::size_t sub, float* subnorms) noexcept {
    const std::size_t grid = leaf_size / sub;
    double total = 0.0;
    for (std::size_t p = 0; p < grid; ++p) {
        for (std::size_t q = 0; q < grid; ++q) {
            const double s = sub_block_square_sum(values, leaf_size, p * sub, q * sub, sub);
            subnorms[p * grid + q] = static_cast<float>(std::sqrt(s));
            total += s;
        }
    }
    return static_cast<float>(std::sqrt(total));
}

bool any_bit_set(const float* values, std::size_t count) noexcept {
    for (std::size_t k = 0; k < count; ++k) {
        if (std::bit_cast<std::uint32_t>(values[k]) != 0U) {
            return true;
        }
    }
    return false;
}

// |stored - expected| relative to the stored value.
double relative_deviation(double expected, double stored) noexcept {
    if (stored == 0.0) {
        return expected == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::abs(stored - expected) / stored;
}

} // namespace

unsigned tree_depth(std::size_t rows, std::size_t cols, std::size_t leaf_size) {
    if (rows == 0 || cols == 0 || leaf_size == 0) {
        throw ValidationError("tree_depth: dimensions and leaf size must be positive");
    }
    const std::size_t extent = std::max(rows, cols);
    unsigned d = 0;
    std::size_t covered = leaf_size;
    while (covered < extent) {
        covered <<= 1U;
        ++d;
    }
    return d;
}

double drop_tolerance(double tau, double norm_a, double norm_b) {
    if (!(tau >= 0.0) || !(norm_a >= 0.0) || !(norm_b >= 0.0)) {
        throw ValidationError("drop_tolerance: tolerance and norms must be nonnegative");
    }
    const double largest = std::max(norm_a, norm_b);
    if (largest == 0.0) {
        throw ValidationError("drop_tolerance: both norms are zero");
    }
    return tau / largest;
}

void LeafBlock::compute_norms() {
    norm = block_norms(values.data(), kSize, kSubBlockSize, subnorms.data());
}

QuadtreeMatrix::QuadtreeMatrix(std::size_t rows, std::size_t cols, std::size_t leaf_size)
    : rows_(rows), cols_(cols), leaf_size_(leaf_size) {
    require_leaf_size(leaf_size);
    depth_ = tree_depth(rows, cols, leaf_size);
    interior_.resize(depth_);
    structure_id_ = next_structure_id();
}

std::size_t QuadtreeMatrix::sub_size() const noexcept { return std::min(kSubBlockSize, leaf_size_); }

void QuadtreeMatrix::touch_structure() noexcept { structure_id_ = next_structure_id(); }

QuadtreeMatrix QuadtreeMatrix::from_dense(const DenseMatrixF& dense, std::size_t leaf_size) {
    QuadtreeMatrix q(dense.rows(), dense.cols(), leaf_size);
    const std::size_t nb = leaf_size;
    const std::size_t block_rows = (dense.rows() + nb - 1) / nb;
    const std::size_t block_cols = (dense.cols() + nb - 1) / nb;

    std::vector<Key> keys;
    keys.reserve(block_rows * block_cols);
    for (std::size_t bi = 0; bi < block_rows; ++bi) {
        for (std::size_t bj = 0; bj < block_cols; ++bj) {
            keys.push_back(morton::encode(bi, bj));
        }
    }
    std::sort(keys.begin(), keys.end());

    std::vector<float> block(nb * nb);
    for (const Key key : keys) {
        const auto [bi, bj] = morton::decode(key);
        std::fill(block.begin(), block.end(), 0.0F);
        const std::size_t r0 = bi * nb;
        const std::size_t c0 = bj * nb;
        const std::size_t r1 = std::min(r0 + nb, dense.rows());
        const std::size_t c1 = std::min(c0 + nb, dense.cols());
        for (std::size_t i = r0; i < r1; ++i) {
            const auto src = dense.row(i);
            std::copy(src.begin() + static_cast<std::ptrdiff_t>(c0), src.begin() + static_cast<std::ptrdiff_t>(c1),
                      block.begin() + static_cast<std::ptrdiff_t>((i - r0) * nb));
        }
        if (!any_bit_set(block.data(), block.size())) {
            continue;
        }
        const LeafHandle h = q.ensure_leaf(key);
        std::copy(block.begin(), block.end(), q.leaf_values(h).begin());
    }
    q.compute_norms();
    return q;
}

DenseMatrixF QuadtreeMatrix::to_dense() const {
    DenseMatrixF dense(rows_, cols_);
    const std::size_t nb = leaf_size_;
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        const auto [bi, bj] = morton::decode(leaf_keys_[h]);
        const std::size_t r0 = bi * nb;
        const std::size_t c0 = bj * nb;
        const std::size_t r1 = std::min(r0 + nb, rows_);
        const std::size_t c1 = std::min(c0 + nb, cols_);
        const auto values = leaf_values(h);
        for (std::size_t i = r0; i < r1; ++i) {
            for (std::size_t j = c0; j < c1; ++j) {
                dense(i, j) = values[(i - r0) * nb + (j - c0)];
            }
        }
    }
    return dense;
}

float QuadtreeMatrix::norm() const noexcept {
    if (depth_ == 0) {
        const auto it = leaf_index_.find(0);
        return it == leaf_index_.end() ? 0.0F : leaf_norms_[it->second];
    }
    const auto it = interior_[0].find(0);
    return it == interior_[0].end() ? 0.0F : it->second;
}

std::size_t QuadtreeMatrix::node_count() const noexcept {
    std::size_t count = leaf_index_.size();
    for (const auto& tier : interior_) {
        count += tier.size();
    }
    return count;
}

void QuadtreeMatrix::check_element_index(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) {
        throw std::out_of_range("QuadtreeMatrix: element index out of range");
    }
}

float QuadtreeMatrix::get(std::size_t i, std::size_t j) const {
    check_element_index(i, j);
    const auto h = find_leaf(morton::encode(i / leaf_size_, j / leaf_size_));
    if (!h) {
        return 0.0F;
    }
    return leaf_values(*h)[(i % leaf_size_) * leaf_size_ + (j % leaf_size_)];
}

void QuadtreeMatrix::set(std::size_t i, std::size_t j, float v) {
    check_element_index(i, j);
    if (!std::isfinite(v)) {
        throw ValidationError("QuadtreeMatrix::set: non-finite value");
    }
    const Key key = morton::encode(i / leaf_size_, j / leaf_size_);
    auto h = find_leaf(key);
    if (!h) {
        if (v == 0.0F) {
            return;
        }
        h = ensure_leaf(key);
    }
    const std::size_t li = i % leaf_size_;
    const std::size_t lj = j % leaf_size_;
    float* values = leaf_values_.data() + static_cast<std::size_t>(*h) * leaf_elements();
    values[li * leaf_size_ + lj] = v;

    const std::size_t sub = sub_size();
    const std::size_t grid = sub_grid();
    const std::size_t p = li / sub;
    const std::size_t q = lj / sub;
    float* subnorms = leaf_subnorms_.data() + static_cast<std::size_t>(*h) * grid * grid;
    subnorms[p * grid + q] = static_cast<float>(std::sqrt(sub_block_square_sum(values, leaf_size_, p * sub, q * sub, sub)));
    leaf_norms_[*h] = static_cast<float>(std::sqrt(sub_block_square_sum(values, leaf_size_, 0, 0, leaf_size_)));

    // Walk to the root refreshing each ancestor from its four children.
    Key child_key = key;
    for (unsigned t = depth_; t-- > 0;) {
        const Key parent_key = morton::parent(child_key);
        double sum = 0.0;
        for (unsigned c = 0; c < 4; ++c) {
            const auto n = node(t + 1, morton::child(parent_key, c));
            if (n) {
                sum += static_cast<double>(n->norm) * n->norm;
            }
        }
        interior_[t][parent_key] = static_cast<float>(std::sqrt(sum));
        child_key = parent_key;
    }
}

std::optional<LeafHandle> QuadtreeMatrix::find_leaf(Key key) const {
    const auto it = leaf_index_.find(key);
    if (it == leaf_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

LeafHandle QuadtreeMatrix::ensure_leaf(Key key) {
    if (const auto h = find_leaf(key)) {
        return *h;
    }
    const auto [bi, bj] = morton::decode(key);
    if (bi >= (std::size_t{1} << depth_) || bj >= (std::size_t{1} << depth_)) {
        throw std::out_of_range("QuadtreeMatrix::ensure_leaf: key outside the padded matrix");
    }
    const auto h = static_cast<LeafHandle>(leaf_keys_.size());
    leaf_keys_.push_back(key);
    leaf_values_.resize(leaf_values_.size() + leaf_elements(), 0.0F);
    leaf_subnorms_.resize(leaf_subnorms_.size() + sub_grid() * sub_grid(), 0.0F);
    leaf_norms_.push_back(0.0F);
    leaf_index_.emplace(key, h);

    Key k = key;
    for (unsigned t = depth_; t-- > 0;) {
        k = morton::parent(k);
        if (!interior_[t].emplace(k, 0.0F).second) {
            break;  // ancestors above an existing node already exist
        }
    }
    touch_structure();
    return h;
}

std::span<const float> QuadtreeMatrix::leaf_values(LeafHandle h) const {
    return {leaf_values_.data() + static_cast<std::size_t>(h) * leaf_elements(), leaf_elements()};
}

std::span<float> QuadtreeMatrix::leaf_values(LeafHandle h) {
    return {leaf_values_.data() + static_cast<std::size_t>(h) * leaf_elements(), leaf_elements()};
}

std::span<const float> QuadtreeMatrix::leaf_subnorms(LeafHandle h) const {
    const std::size_t g2 = sub_grid() * sub_grid();
    return {leaf_subnorms_.data() + static_cast<std::size_t>(h) * g2, g2};
}

void QuadtreeMatrix::compute_leaf_norms(LeafHandle h) {
    const std::size_t g2 = sub_grid() * sub_grid();
    leaf_norms_[h] = block_norms(leaf_values_.data() + static_cast<std::size_t>(h) * leaf_elements(), leaf_size_,
                                 sub_size(), leaf_subnorms_.data() + static_cast<std::size_t>(h) * g2);
}

void QuadtreeMatrix::compute_norms() {
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        compute_leaf_norms(h);
    }
    compute_interior_norms();
}

void QuadtreeMatrix::compute_interior_norms() {
    for (unsigned t = depth_; t-- > 0;) {
        for (auto& [key, norm] : interior_[t]) {
            double sum = 0.0;
            for (unsigned c = 0; c < 4; ++c) {
                const Key ck = morton::child(key, c);
                if (t + 1 == depth_) {
                    const auto it = leaf_index_.find(ck);
                    if (it != leaf_index_.end()) {
                        const double v = leaf_norms_[it->second];
                        sum += v * v;
                    }
                } else {
                    const auto it = interior_[t + 1].find(ck);
                    if (it != interior_[t + 1].end()) {
                        const double v = it->second;
                        sum += v * v;
                    }
                }
            }
            norm = static_cast<float>(std::sqrt(sum));
        }
    }
}

std::size_t QuadtreeMatrix::sparsify(double eps) {
    if (!(eps >= 0.0)) {
        throw ValidationError("sparsify: tolerance must be nonnegative");
    }
    if (eps == 0.0) {
        return 0;
    }
    const std::size_t sub = sub_size();
    const std::size_t grid = sub_grid();
    std::size_t dropped = 0;
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        float* values = leaf_values_.data() + static_cast<std::size_t>(h) * leaf_elements();
        const float* subnorms = leaf_subnorms_.data() + static_cast<std::size_t>(h) * grid * grid;
        for (std::size_t p = 0; p < grid; ++p) {
            for (std::size_t q = 0; q < grid; ++q) {
                const float s = subnorms[p * grid + q];
                if (static_cast<double>(s) >= eps) {
                    continue;
                }
                if (s > 0.0F) {
                    ++dropped;
                }
                for (std::size_t i = p * sub; i < (p + 1) * sub; ++i) {
                    std::fill_n(values + i * leaf_size_ + q * sub, sub, 0.0F);
                }
            }
        }
        compute_leaf_norms(h);
    }

    // Compact: keep leaves with a nonzero norm, in their current order.
    std::vector<Key> keys;
    std::vector<float> values;
    std::vector<float> subnorms;
    std::vector<float> norms;
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        if (leaf_norms_[h] == 0.0F) {
            continue;
        }
        keys.push_back(leaf_keys_[h]);
        const auto v = leaf_values(h);
        values.insert(values.end(), v.begin(), v.end());
        const auto s = leaf_subnorms(h);
        subnorms.insert(subnorms.end(), s.begin(), s.end());
        norms.push_back(leaf_norms_[h]);
    }
    if (keys.size() != leaf_keys_.size()) {
        leaf_keys_ = std::move(keys);
        leaf_values_ = std::move(values);
        leaf_subnorms_ = std::move(subnorms);
        leaf_norms_ = std::move(norms);
        rebuild_interior_structure();
        touch_structure();
    }
    compute_interior_norms();
    return dropped;
}

void QuadtreeMatrix::rebuild_interior_structure() {
    leaf_index_.clear();
    for (auto& tier : interior_) {
        tier.clear();
    }
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        leaf_index_.emplace(leaf_keys_[h], h);
        Key k = leaf_keys_[h];
        for (unsigned t = depth_; t-- > 0;) {
            k = morton::parent(k);
            if (!interior_[t].emplace(k, 0.0F).second) {
                break;
            }
        }
    }
}

void QuadtreeMatrix::scale(float s) {
    for (float& v : leaf_values_) {
        v = flush_subnormal(v * s);
    }
    compute_norms();
}

void QuadtreeMatrix::clear() {
    leaf_keys_.clear();
    leaf_values_.clear();
    leaf_subnorms_.clear();
    leaf_norms_.clear();
    leaf_index_.clear();
    for (auto& tier : interior_) {
        tier.clear();
    }
    touch_structure();
}

std::optional<TreeNode> QuadtreeMatrix::node(unsigned tier, Key key) const {
    if (tier > depth_) {
        return std::nullopt;
    }
    if (tier == depth_) {
        const auto it = leaf_index_.find(key);
        if (it == leaf_index_.end()) {
            return std::nullopt;
        }
        return TreeNode{tier, key, leaf_norms_[it->second], it->second};
    }
    const auto it = interior_[tier].find(key);
    if (it == interior_[tier].end()) {
        return std::nullopt;
    }
    return TreeNode{tier, key, it->second, std::nullopt};
}

std::vector<Key> QuadtreeMatrix::keys_at_tier(unsigned tier) const {
    std::vector<Key> keys;
    if (tier == depth_) {
        keys = leaf_keys_;
    } else if (tier < depth_) {
        keys.reserve(interior_[tier].size());
        for (const auto& entry : interior_[tier]) {
            keys.push_back(entry.first);
        }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

InvariantReport QuadtreeMatrix::check_invariants(double relative_tolerance) const {
    InvariantReport report;
    auto fail = [&report](const std::string& what) {
        if (report.ok) {
            report.first_violation = what;
        }
        report.ok = false;
    };
    auto record = [&](double expected_sq, double actual_sq, unsigned tier, Key key) {
        const double dev = relative_deviation(expected_sq, actual_sq);
        report.worst_relative_deviation = std::max(report.worst_relative_deviation, dev);
        if (dev > relative_tolerance) {
            std::ostringstream msg;
            msg << "norm mismatch at tier " << tier << " key " << key << ": " << actual_sq << " vs " << expected_sq;
            fail(msg.str());
        }
    };

    for (unsigned t = 0; t < depth_; ++t) {
        for (const auto& [key, norm] : interior_[t]) {
            ++report.nodes_checked;
            if (t > 0 && !interior_[t - 1].contains(morton::parent(key))) {
                fail("interior node without parent at tier " + std::to_string(t));
            }
            if (t == 0 && key != 0) {
                fail("root tier holds a nonzero key");
            }
            double sum = 0.0;
            for (unsigned c = 0; c < 4; ++c) {
                const auto n = node(t + 1, morton::child(key, c));
                if (n) {
                    sum += static_cast<double>(n->norm) * n->norm;
                }
            }
            record(sum, static_cast<double>(norm) * norm, t, key);
        }
    }
    const std::size_t g2 = sub_grid() * sub_grid();
    for (LeafHandle h = 0; h < leaf_keys_.size(); ++h) {
        ++report.nodes_checked;
        const Key key = leaf_keys_[h];
        if (depth_ > 0 && !interior_[depth_ - 1].contains(morton::parent(key))) {
            fail("leaf without parent");
        }
        const auto it = leaf_index_.find(key);
        if (it == leaf_index_.end() || it->second != h) {
            fail("leaf index out of sync");
        }
        const double norm_sq = static_cast<double>(leaf_norms_[h]) * leaf_norms_[h];
        double values_sq = 0.0;
        for (const float v : leaf_values(h)) {
            values_sq += static_cast<double>(v) * v;
        }
        record(values_sq, norm_sq, depth_, key);
        double sub_sq = 0.0;
        for (std::size_t s = 0; s < g2; ++s) {
            const double v = leaf_subnorms(h)[s];
            sub_sq += v * v;
        }
        record(sub_sq, norm_sq, depth_, key);
    }
    return report;
}

} // namespace spamm
