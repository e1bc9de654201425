#include "spamm/symbolic.hpp"

#include <algorithm>
#include <ostream>

namespace spamm {

namespace {

Key masked_k(Key key, OperandRole role) noexcept {
    return role == OperandRole::a ? morton::k_of_a(key) : morton::k_of_b(key);
}

std::uint64_t deinterleaved_k(Key key, OperandRole role) noexcept {
    return role == OperandRole::a ? morton::undilate(key) : morton::undilate(key >> 1);
}

struct BlockPair {
    const KBlock* a;
    const KBlock* b;
};

std::vector<BlockPair> matching_blocks(const SortedOperand& a, const SortedOperand& b) {
    std::vector<BlockPair> pairs;
    std::size_t ia = 0;
    std::size_t ib = 0;
    while (ia < a.blocks.size() && ib < b.blocks.size()) {
        if (a.blocks[ia].k < b.blocks[ib].k) {
            ++ia;
        } else if (b.blocks[ib].k < a.blocks[ia].k) {
            ++ib;
        } else {
            pairs.push_back({&a.blocks[ia], &b.blocks[ib]});
            ++ia;
            ++ib;
        }
    }
    return pairs;
}

// Both spans are sorted by descending norm, so the first failing product in
// a row ends that row, and a failing product against the largest B norm ends
// the block.
void convolve_block(std::span<const IndexEntry> a_entries, std::span<const IndexEntry> b_entries, double tau,
                    std::vector<ProductTask>& tasks, PlanStats& stats) {
    stats.candidate_pairs += static_cast<std::uint64_t>(a_entries.size()) * b_entries.size();
    for (const IndexEntry& ea : a_entries) {
        const double norm_a = ea.norm;
        bool first = true;
        for (const IndexEntry& eb : b_entries) {
            const double product = norm_a * static_cast<double>(eb.norm);
            ++stats.examined;
            if (product < tau) {
                ++stats.pruned;
                if (first) {
                    return;
                }
                break;
            }
            first = false;
            tasks.push_back({ea.leaf, eb.leaf, ea.key, eb.key, morton::c_index(ea.key, eb.key), product});
            ++stats.emitted;
        }
    }
}

MultiplyPlan empty_plan(const SortedOperand& a, const SortedOperand& b, double tau) {
    if (!(tau >= 0.0)) {
        throw ValidationError("convolve: tolerance must be nonnegative");
    }
    if (a.role != OperandRole::a || b.role != OperandRole::b) {
        throw ValidationError("convolve: operands prepared with the wrong roles");
    }
    MultiplyPlan plan;
    plan.tau = tau;
    plan.a_structure = a.structure;
    plan.b_structure = b.structure;
    plan.rows = a.rows;
    plan.inner = a.cols;
    plan.cols = b.cols;
    return plan;
}

} // namespace

std::vector<IndexEntry> extract_entries(const QuadtreeMatrix& q, LeafSource source) {
    std::vector<IndexEntry> entries;
    entries.reserve(q.leaf_count());
    if (source == LeafSource::array) {
        for (LeafHandle h = 0; h < q.leaf_count(); ++h) {
            entries.push_back({q.leaf_key(h), q.leaf_norm(h), h});
        }
    } else {
        for (const auto& [key, h] : q.leaf_index()) {
            entries.push_back({key, q.leaf_norm(h), h});
        }
    }
    return entries;
}

void sort_by_k(std::vector<IndexEntry>& entries, OperandRole role) {
    std::stable_sort(entries.begin(), entries.end(), [role](const IndexEntry& x, const IndexEntry& y) {
        return masked_k(x.key, role) < masked_k(y.key, role);
    });
}

SortedOperand sort_kblocks_by_norm(std::vector<IndexEntry> entries, OperandRole role) {
    SortedOperand out;
    out.role = role;
    out.entries = std::move(entries);
    auto& e = out.entries;
    std::size_t begin = 0;
    while (begin < e.size()) {
        const Key k = masked_k(e[begin].key, role);
        std::size_t end = begin + 1;
        while (end < e.size() && masked_k(e[end].key, role) == k) {
            ++end;
        }
        std::sort(e.begin() + static_cast<std::ptrdiff_t>(begin), e.begin() + static_cast<std::ptrdiff_t>(end),
                  [](const IndexEntry& x, const IndexEntry& y) {
                      if (x.norm != y.norm) {
                          return x.norm > y.norm;
                      }
                      return x.key < y.key;
                  });
        out.blocks.push_back({deinterleaved_k(k, role), begin, end});
        begin = end;
    }
    return out;
}

SortedOperand prepare_operand(const QuadtreeMatrix& q, OperandRole role, LeafSource source) {
    auto entries = extract_entries(q, source);
    sort_by_k(entries, role);
    SortedOperand out = sort_kblocks_by_norm(std::move(entries), role);
    out.structure = q.structure_id();
    out.rows = q.rows();
    out.cols = q.cols();
    return out;
}

MultiplyPlan convolve(const SortedOperand& a, const SortedOperand& b, double tau) {
    MultiplyPlan plan = empty_plan(a, b, tau);
    for (const BlockPair& pair : matching_blocks(a, b)) {
        convolve_block(a.block(*pair.a), b.block(*pair.b), tau, plan.tasks, plan.stats);
    }
    return plan;
}

MultiplyPlan convolve_parallel(const SortedOperand& a, const SortedOperand& b, double tau) {
    MultiplyPlan plan = empty_plan(a, b, tau);
    const std::vector<BlockPair> pairs = matching_blocks(a, b);
    std::vector<std::vector<ProductTask>> partial(pairs.size());
    std::vector<PlanStats> partial_stats(pairs.size());
    const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t p = 0; p < count; ++p) {
        const auto idx = static_cast<std::size_t>(p);
        convolve_block(a.block(*pairs[idx].a), b.block(*pairs[idx].b), tau, partial[idx], partial_stats[idx]);
    }
    std::size_t total = 0;
    for (const auto& part : partial) {
        total += part.size();
    }
    plan.tasks.reserve(total);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        plan.tasks.insert(plan.tasks.end(), partial[p].begin(), partial[p].end());
        plan.stats.emitted += partial_stats[p].emitted;
        plan.stats.examined += partial_stats[p].examined;
        plan.stats.pruned += partial_stats[p].pruned;
        plan.stats.candidate_pairs += partial_stats[p].candidate_pairs;
    }
    return plan;
}

MultiplyPlan plan_multiply(const QuadtreeMatrix& a, const QuadtreeMatrix& b, double tau, bool parallel) {
    if (a.cols() != b.rows()) {
        throw ValidationError("plan_multiply: inner dimensions do not match");
    }
    if (a.leaf_size() != b.leaf_size()) {
        throw ValidationError("plan_multiply: operands use different leaf sizes");
    }
    const SortedOperand sa = prepare_operand(a, OperandRole::a);
    const SortedOperand sb = prepare_operand(b, OperandRole::b);
    return parallel ? convolve_parallel(sa, sb, tau) : convolve(sa, sb, tau);
}

void write_plan(std::ostream& out, const MultiplyPlan& plan) {
    const auto precision = out.precision(17);
    for (const ProductTask& t : plan.tasks) {
        out << t.a_key << ' ' << t.b_key << ' ' << t.c_key << ' ' << t.norm_product << '\n';
    }
    out.precision(precision);
}

} // namespace spamm
