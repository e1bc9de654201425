#pragma once

// Numeric phase: executes a MultiplyPlan. Every leaf product is split into
// 4x4x4 micro-multiplications; with fine4 granularity each one is gated by
// the product of its 4x4 sub-block norms.

#include <cstddef>
#include <cstdint>

#include "spamm/execution.hpp"
#include "spamm/quadtree.hpp"
#include "spamm/symbolic.hpp"

namespace spamm {

enum class Granularity {
    fine4,     // condition applied to every 4x4 sub-block product
    coarse16,  // condition applied only to whole leaves (symbolic phase)
};

enum class LeafKernel {
    micro4,  // 4x4 micro-kernels (gated for fine4)
    dense,   // plain row-major leaf product, no gating
};

struct MultiplyConfig {
    double tau = 0.0;
    Granularity granularity = Granularity::fine4;
    float alpha = 1.0F;
    float beta = 0.0F;
    LeafKernel kernel = LeafKernel::micro4;
    Execution execution = Execution::serial;
};

/// One complexity unit is one 4x4x4 micro-multiplication; a full 16^3 leaf
/// product is 64 units.
struct ExecCounters {
    std::uint64_t products4 = 0;
    std::uint64_t skipped4 = 0;
    double seconds = 0.0;

    [[nodiscard]] std::uint64_t complexity() const noexcept { return products4; }
    /// Multiply-add count of the executed micro-products (2 * 4^3 each).
    [[nodiscard]] std::uint64_t flops() const noexcept { return 128 * products4; }

    ExecCounters& operator+=(const ExecCounters& o) noexcept {
        products4 += o.products4;
        skipped4 += o.skipped4;
        seconds += o.seconds;
        return *this;
    }
};

/// c += a * b on 4x4 row-major tiles with leading dimensions lda, ldb, ldc.
/// Each output row accumulates rank-1 updates in ascending k.
void micro_kernel_4(const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc) noexcept;

/// c += a * b for leaf_size x leaf_size row-major blocks (leaf_size a multiple
/// of 4) with per-4x4 subnorm grids. Output sub-block (p,q) accumulates
/// r = 0, 1, ... in order.
ExecCounters block_multiply(const float* a, const float* a_subnorms, const float* b, const float* b_subnorms,
                            float* c, std::size_t leaf_size, const MultiplyConfig& cfg) noexcept;

ExecCounters block_multiply_16(const LeafBlock& a, const LeafBlock& b, LeafBlock& c, const MultiplyConfig& cfg);

/// C := alpha * (sum of the plan's products) + beta * C.
/// C must be m x n with the operands' leaf size, or default-constructed (it
/// is then shaped). C leaves are created at the first contributing task and
/// all C norms are recomputed once at the end. Throws ValidationError on
/// shape mismatch or when the plan was built for other operands or another
/// tolerance.
ExecCounters execute_plan(const MultiplyPlan& plan, const QuadtreeMatrix& a, const QuadtreeMatrix& b,
                          QuadtreeMatrix& c, const MultiplyConfig& cfg);

/// Symbolic plus numeric phase.
ExecCounters spamm_multiply(const QuadtreeMatrix& a, const QuadtreeMatrix& b, QuadtreeMatrix& c,
                            const MultiplyConfig& cfg, PlanStats* stats = nullptr);

} // namespace spamm
