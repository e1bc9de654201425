#include "spamm/numeric.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace spamm {

namespace {

using Clock = std::chrono::steady_clock;

// c += a * b over the full block, i-k-j order; used by LeafKernel::dense.
void dense_block_product(const float* a, const float* b, float* c, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        float* crow = c + i * n;
        for (std::size_t k = 0; k < n; ++k) {
            const float aik = a[i * n + k];
            const float* brow = b + k * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

void validate(const MultiplyPlan& plan, const QuadtreeMatrix& a, const QuadtreeMatrix& b, const QuadtreeMatrix& c,
              const MultiplyConfig& cfg) {
    if (&c == &a || &c == &b) {
        throw ValidationError("execute_plan: result must not alias an operand");
    }
    if (a.cols() != b.rows()) {
        throw ValidationError("execute_plan: inner dimensions do not match");
    }
    if (a.leaf_size() != b.leaf_size() || a.leaf_size() < kSubBlockSize) {
        throw ValidationError("execute_plan: operands need equal leaf sizes of at least 4");
    }
    if (plan.a_structure != a.structure_id() || plan.b_structure != b.structure_id() || plan.rows != a.rows() ||
        plan.inner != a.cols() || plan.cols != b.cols()) {
        throw ValidationError("execute_plan: plan was built for different operands");
    }
    if (plan.tau != cfg.tau) {
        throw ValidationError("execute_plan: plan tolerance differs from the configuration");
    }
    const bool unset = c.rows() == 0 && c.cols() == 0;
    if (!unset && (c.rows() != a.rows() || c.cols() != b.cols() || c.leaf_size() != a.leaf_size())) {
        throw ValidationError("execute_plan: result has an incompatible shape");
    }
}

// Task indices grouped by destination leaf; plan order is kept inside a group.
struct TaskGroups {
    std::vector<std::size_t> order;
    std::vector<std::size_t> starts;  // group g spans order[starts[g] .. starts[g+1])
    std::vector<LeafHandle> c_leaf;   // destination handle per group
};

TaskGroups group_tasks(const MultiplyPlan& plan, QuadtreeMatrix& c) {
    TaskGroups groups;
    // Allocation follows the first appearance of each destination in plan order.
    for (const ProductTask& t : plan.tasks) {
        c.ensure_leaf(t.c_key);
    }
    groups.order.resize(plan.tasks.size());
    std::iota(groups.order.begin(), groups.order.end(), std::size_t{0});
    std::stable_sort(groups.order.begin(), groups.order.end(), [&plan](std::size_t x, std::size_t y) {
        return plan.tasks[x].c_key < plan.tasks[y].c_key;
    });
    for (std::size_t i = 0; i < groups.order.size(); ++i) {
        const Key key = plan.tasks[groups.order[i]].c_key;
        if (i == 0 || key != plan.tasks[groups.order[i - 1]].c_key) {
            groups.starts.push_back(i);
            groups.c_leaf.push_back(*c.find_leaf(key));
        }
    }
    groups.starts.push_back(groups.order.size());
    return groups;
}

struct GroupContext {
    const MultiplyPlan& plan;
    const QuadtreeMatrix& a;
    const QuadtreeMatrix& b;
    QuadtreeMatrix& c;
    const MultiplyConfig& cfg;
    const TaskGroups& groups;
};

// Accumulates one group into a zeroed scratch block, then adds alpha * scratch to C.
ExecCounters run_group(const GroupContext& ctx, std::size_t g, std::vector<float>& scratch) {
    const std::size_t nb = ctx.a.leaf_size();
    std::fill(scratch.begin(), scratch.end(), 0.0F);
    ExecCounters counters;
    for (std::size_t i = ctx.groups.starts[g]; i < ctx.groups.starts[g + 1]; ++i) {
        const ProductTask& t = ctx.plan.tasks[ctx.groups.order[i]];
        counters += block_multiply(ctx.a.leaf_values(t.a).data(), ctx.a.leaf_subnorms(t.a).data(),
                                   ctx.b.leaf_values(t.b).data(), ctx.b.leaf_subnorms(t.b).data(), scratch.data(), nb,
                                   ctx.cfg);
    }
    const auto dst = ctx.c.leaf_values(ctx.groups.c_leaf[g]);
    if (ctx.cfg.alpha == 1.0F) {
        for (std::size_t k = 0; k < dst.size(); ++k) {
            dst[k] = flush_subnormal(dst[k] + scratch[k]);
        }
    } else {
        for (std::size_t k = 0; k < dst.size(); ++k) {
            dst[k] = flush_subnormal(dst[k] + ctx.cfg.alpha * scratch[k]);
        }
    }
    return counters;
}

} // namespace

void micro_kernel_4(const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                    std::size_t ldc) noexcept {
    for (std::size_t i = 0; i < 4; ++i) {
        float* crow = c + i * ldc;
        float c0 = crow[0];
        float c1 = crow[1];
        float c2 = crow[2];
        float c3 = crow[3];
        for (std::size_t k = 0; k < 4; ++k) {
            const float aik = a[i * lda + k];
            const float* brow = b + k * ldb;
            c0 += aik * brow[0];
            c1 += aik * brow[1];
            c2 += aik * brow[2];
            c3 += aik * brow[3];
        }
        crow[0] = c0;
        crow[1] = c1;
        crow[2] = c2;
        crow[3] = c3;
    }
}

ExecCounters block_multiply(const float* a, const float* a_subnorms, const float* b, const float* b_subnorms,
                            float* c, std::size_t leaf_size, const MultiplyConfig& cfg) noexcept {
    ExecCounters counters;
    const std::size_t grid = leaf_size / kSubBlockSize;
    if (cfg.kernel == LeafKernel::dense) {
        dense_block_product(a, b, c, leaf_size);
        counters.products4 = grid * grid * grid;
        return counters;
    }
    const bool gated = cfg.granularity == Granularity::fine4;
    for (std::size_t p = 0; p < grid; ++p) {
        for (std::size_t q = 0; q < grid; ++q) {
            float* ctile = c + p * kSubBlockSize * leaf_size + q * kSubBlockSize;
            for (std::size_t r = 0; r < grid; ++r) {
                if (gated && static_cast<double>(a_subnorms[p * grid + r]) * b_subnorms[r * grid + q] < cfg.tau) {
                    ++counters.skipped4;
                    continue;
                }
                micro_kernel_4(a + p * kSubBlockSize * leaf_size + r * kSubBlockSize, leaf_size,
                               b + r * kSubBlockSize * leaf_size + q * kSubBlockSize, leaf_size, ctile, leaf_size);
                ++counters.products4;
            }
        }
    }
    return counters;
}

ExecCounters block_multiply_16(const LeafBlock& a, const LeafBlock& b, LeafBlock& c, const MultiplyConfig& cfg) {
    return block_multiply(a.values.data(), a.subnorms.data(), b.values.data(), b.subnorms.data(), c.values.data(),
                          LeafBlock::kSize, cfg);
}

ExecCounters execute_plan(const MultiplyPlan& plan, const QuadtreeMatrix& a, const QuadtreeMatrix& b,
                          QuadtreeMatrix& c, const MultiplyConfig& cfg) {
    validate(plan, a, b, c, cfg);
    const auto start = Clock::now();
    if (c.rows() == 0 && c.cols() == 0) {
        c = QuadtreeMatrix(a.rows(), b.cols(), a.leaf_size());
    } else if (cfg.beta == 0.0F) {
        c.clear();
    } else if (cfg.beta != 1.0F) {
        c.scale(cfg.beta);
    }

    ExecCounters total;
    if (cfg.alpha != 0.0F && !plan.tasks.empty()) {
        const TaskGroups groups = group_tasks(plan, c);
        const GroupContext ctx{plan, a, b, c, cfg, groups};
        const std::size_t group_count = groups.c_leaf.size();
        const std::size_t block_elements = a.leaf_elements();

        if (cfg.execution == Execution::serial) {
            std::vector<float> scratch(block_elements);
            for (std::size_t g = 0; g < group_count; ++g) {
                total += run_group(ctx, g, scratch);
            }
        } else {
            std::uint64_t products = 0;
            std::uint64_t skipped = 0;
            const auto count = static_cast<std::ptrdiff_t>(group_count);
#pragma omp parallel reduction(+ : products, skipped)
            {
                std::vector<float> scratch(block_elements);
#pragma omp for schedule(dynamic, 8)
                for (std::ptrdiff_t g = 0; g < count; ++g) {
                    const ExecCounters part = run_group(ctx, static_cast<std::size_t>(g), scratch);
                    products += part.products4;
                    skipped += part.skipped4;
                }
            }
            total.products4 = products;
            total.skipped4 = skipped;
        }
    }
    c.compute_norms();
    total.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return total;
}

ExecCounters spamm_multiply(const QuadtreeMatrix& a, const QuadtreeMatrix& b, QuadtreeMatrix& c,
                            const MultiplyConfig& cfg, PlanStats* stats) {
    const auto start = Clock::now();
    const MultiplyPlan plan = plan_multiply(a, b, cfg.tau, cfg.execution == Execution::parallel);
    ExecCounters counters = execute_plan(plan, a, b, c, cfg);
    counters.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (stats != nullptr) {
        *stats = plan.stats;
    }
    return counters;
}

} // namespace spamm
