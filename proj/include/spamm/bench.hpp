#pragma once

// Benchmark harness: scenario runs of C = A * B (self-products for the
// sweeps), CSV reporting, size/tolerance sweeps with C16/C4 and T16/T4
// ratios, and tolerance calibration against a max-norm error target.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spamm/dense_matrix.hpp"
#include "spamm/generators.hpp"
#include "spamm/symbolic.hpp"

namespace spamm {

enum class Scenario {
    spamm4,            // fine4 gating
    spamm16,           // coarse16, micro-kernels without gating
    spamm_dense_leaf,  // coarse16 plan, plain dense leaf products
    dense_single,      // naive single-precision triple loop
    dense_double,      // double-precision oracle
};

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);
/// "4x4", "16x16", "16x16-dense" or "dense".
std::string_view granularity_label(Scenario s);

struct RunOptions {
    std::size_t repeats = 1;  // timing is the median over repeats
    bool parallel = false;
    std::size_t leaf_size = 16;
    float alpha = 1.0F;
    float beta = 0.0F;
    bool measure_error = true;
};

struct RunReport {
    std::string scenario;
    std::size_t n = 0;
    double tau = 0.0;
    std::string granularity;
    double seconds = 0.0;
    std::uint64_t products4 = 0;
    std::uint64_t complexity = 0;
    std::uint64_t flops_model = 0;
    double effective_rate = 0.0;
    double max_norm_error = 0.0;  // NaN when not measured
    PlanStats plan;
};

struct ProductResult {
    DenseMatrixF c;
    RunReport report;
};

/// alpha * A * B + beta * C0 in double precision (C0 may be null when beta is 0).
DenseMatrixD oracle_product(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, double alpha,
                            double beta);

/// Runs C = alpha * A * B + beta * C0 under a scenario. `oracle`, when
/// given, must equal oracle_product(a, b, c0, alpha, beta); otherwise it is
/// computed when error measurement is on.
ProductResult run_product(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, Scenario scenario,
                          double tau, const RunOptions& options, const DenseMatrixD* oracle = nullptr);

/// Self-product benchmark: C = alpha * A * A + beta * A. A must be square.
RunReport run_scenario(const DenseMatrixF& a, Scenario scenario, double tau, const RunOptions& options,
                       const DenseMatrixD* oracle = nullptr);

std::string csv_header();
std::string csv_row(const RunReport& r);
void write_csv(std::ostream& out, std::span<const RunReport> rows);

struct RatioRow {
    std::size_t n = 0;
    double tau = 0.0;
    double c16_over_c4 = 0.0;
    double t16_over_t4 = 0.0;
};

struct SweepResult {
    std::vector<RunReport> rows;  // n-major, tau-minor, scenarios in given order
    std::vector<RatioRow> ratios;
};

/// Generates family(n) for every n and runs every (tau, scenario).
SweepResult sweep(const GeneratorSpec& family, std::span<const std::size_t> sizes, std::span<const double> taus,
                  std::span<const Scenario> scenarios, const RunOptions& options);

/// Same as sweep() for a fixed input matrix.
SweepResult sweep_matrix(const DenseMatrixF& a, std::span<const double> taus, std::span<const Scenario> scenarios,
                         const RunOptions& options);

/// Ratios from spamm4/spamm16 row pairs sharing n and tau.
std::vector<RatioRow> granularity_ratios(std::span<const RunReport> rows);
void write_ratio_csv(std::ostream& out, std::span<const RatioRow> ratios);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct CalibrationOptions {
    double tau_low = 1e-14;
    double tau_high = 1e-2;
    int iterations = 8;  // geometric bisection steps
};

struct Calibration {
    Scenario scenario = Scenario::spamm4;
    std::size_t n = 0;
    double target = 0.0;
    double tau = 0.0;  // largest tolerance found whose error meets the target
    double achieved_error = 0.0;
    std::uint64_t complexity = 0;
    bool reached = false;  // false when even tau_low misses the target
};

/// Geometric bisection for the largest tau with max-norm error <= target on
/// the self-product of `a`. `oracle` is the double-precision A * A.
Calibration calibrate_tau(const DenseMatrixF& a, const DenseMatrixD& oracle, Scenario scenario, double target,
                          const CalibrationOptions& options = {}, const RunOptions& run = {});

std::string calibration_csv_header();
std::string calibration_csv_row(const Calibration& c);

} // namespace spamm
