#include "spamm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "spamm/numeric.hpp"
#include "spamm/quadtree.hpp"
#include "spamm/reference.hpp"

namespace spamm {

namespace {

using Clock = std::chrono::steady_clock;

constexpr Scenario kAllScenarios[] = {Scenario::spamm4, Scenario::spamm16, Scenario::spamm_dense_leaf,
                                      Scenario::dense_single, Scenario::dense_double};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::uint64_t ceil4(std::size_t x) { return (x + 3) / 4; }

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

bool is_spamm(Scenario s) {
    return s == Scenario::spamm4 || s == Scenario::spamm16 || s == Scenario::spamm_dense_leaf;
}

MultiplyConfig config_for(Scenario s, double tau, const RunOptions& options) {
    MultiplyConfig cfg;
    cfg.tau = tau;
    cfg.alpha = options.alpha;
    cfg.beta = options.beta;
    cfg.execution = options.parallel ? Execution::parallel : Execution::serial;
    cfg.granularity = s == Scenario::spamm4 ? Granularity::fine4 : Granularity::coarse16;
    cfg.kernel = s == Scenario::spamm_dense_leaf ? LeafKernel::dense : LeafKernel::micro4;
    return cfg;
}

// Quadtree operands built once and reused across repeats and calibration steps.
struct PreparedOperands {
    QuadtreeMatrix a;
    QuadtreeMatrix b;
    std::optional<QuadtreeMatrix> c0;
    bool self_product = false;

    [[nodiscard]] const QuadtreeMatrix& right() const { return self_product ? a : b; }
};

PreparedOperands prepare(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, std::size_t leaf_size,
                         bool need_c0) {
    PreparedOperands ops;
    ops.a = QuadtreeMatrix::from_dense(a, leaf_size);
    ops.self_product = &a == &b;
    if (!ops.self_product) {
        ops.b = QuadtreeMatrix::from_dense(b, leaf_size);
    }
    if (need_c0 && c0 != nullptr) {
        ops.c0 = QuadtreeMatrix::from_dense(*c0, leaf_size);
    }
    return ops;
}

ProductResult run_spamm(const PreparedOperands& ops, Scenario scenario, double tau, const RunOptions& options) {
    const MultiplyConfig cfg = config_for(scenario, tau, options);
    std::vector<double> times;
    ProductResult result;
    QuadtreeMatrix c;
    ExecCounters counters;
    PlanStats stats;
    for (std::size_t r = 0; r < std::max<std::size_t>(options.repeats, 1); ++r) {
        c = ops.c0 && cfg.beta != 0.0F ? *ops.c0 : QuadtreeMatrix();
        counters = spamm_multiply(ops.a, ops.right(), c, cfg, &stats);
        times.push_back(counters.seconds);
    }
    result.c = c.to_dense();
    result.report.seconds = median(times);
    result.report.products4 = counters.products4;
    result.report.complexity = counters.complexity();
    result.report.plan = stats;
    return result;
}

ProductResult run_dense(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, Scenario scenario,
                        const RunOptions& options) {
    std::vector<double> times;
    ProductResult result;
    const Execution exec = options.parallel ? Execution::parallel : Execution::serial;
    for (std::size_t r = 0; r < std::max<std::size_t>(options.repeats, 1); ++r) {
        const auto start = Clock::now();
        if (scenario == Scenario::dense_single) {
            DenseMatrixF c = dense_multiply_single(a, b, exec);
            if (options.alpha != 1.0F || options.beta != 0.0F) {
                for (std::size_t k = 0; k < c.size(); ++k) {
                    const float prior = (c0 != nullptr && options.beta != 0.0F) ? c0->values()[k] : 0.0F;
                    c.values()[k] = options.alpha * c.values()[k] + options.beta * prior;
                }
            }
            result.c = std::move(c);
        } else {
            result.c = oracle_product(a, b, c0, options.alpha, options.beta).cast<float>();
        }
        times.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    }
    result.report.seconds = median(times);
    result.report.products4 = ceil4(a.rows()) * ceil4(a.cols()) * ceil4(b.cols());
    result.report.complexity = result.report.products4;
    return result;
}

void finish_report(RunReport& r, const DenseMatrixF& a, const DenseMatrixF& b, Scenario scenario, double tau) {
    r.scenario = std::string(to_string(scenario));
    r.n = a.rows();
    r.tau = tau;
    r.granularity = std::string(granularity_label(scenario));
    r.flops_model = flop_model(a.rows(), a.cols(), b.cols());
    r.effective_rate = r.seconds > 0.0 ? effective_performance(r.flops_model, r.seconds) : 0.0;
}

} // namespace

std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::spamm4:
        return "spamm4";
    case Scenario::spamm16:
        return "spamm16";
    case Scenario::spamm_dense_leaf:
        return "spamm-dense-leaf";
    case Scenario::dense_single:
        return "dense-single";
    case Scenario::dense_double:
        return "dense-double";
    }
    return "unknown";
}

Scenario parse_scenario(std::string_view name) {
    for (const Scenario s : kAllScenarios) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw ValidationError("unknown scenario: " + std::string(name));
}

std::string_view granularity_label(Scenario s) {
    switch (s) {
    case Scenario::spamm4:
        return "4x4";
    case Scenario::spamm16:
        return "16x16";
    case Scenario::spamm_dense_leaf:
        return "16x16-dense";
    case Scenario::dense_single:
    case Scenario::dense_double:
        return "dense";
    }
    return "unknown";
}

DenseMatrixD oracle_product(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, double alpha,
                            double beta) {
    if (a.cols() != b.rows()) {
        throw ValidationError("oracle_product: inner dimensions do not match");
    }
    DenseMatrixD c(a.rows(), b.cols());
    if (beta != 0.0) {
        if (c0 == nullptr || c0->rows() != a.rows() || c0->cols() != b.cols()) {
            throw ValidationError("oracle_product: beta needs a conformable initial C");
        }
        c = c0->cast<double>();
    }
    dense_gemm_double(alpha, a.cast<double>(), b.cast<double>(), beta, c, Execution::parallel);
    return c;
}

ProductResult run_product(const DenseMatrixF& a, const DenseMatrixF& b, const DenseMatrixF* c0, Scenario scenario,
                          double tau, const RunOptions& options, const DenseMatrixD* oracle) {
    if (a.cols() != b.rows()) {
        throw ValidationError("run_product: inner dimensions do not match");
    }
    if (!(tau >= 0.0)) {
        throw ValidationError("run_product: tolerance must be nonnegative");
    }
    if (options.beta != 0.0F && (c0 == nullptr || c0->rows() != a.rows() || c0->cols() != b.cols())) {
        throw ValidationError("run_product: beta needs a conformable initial C");
    }
    ProductResult result;
    if (is_spamm(scenario)) {
        const PreparedOperands ops = prepare(a, b, c0, options.leaf_size, options.beta != 0.0F);
        result = run_spamm(ops, scenario, tau, options);
    } else {
        result = run_dense(a, b, c0, scenario, options);
    }
    finish_report(result.report, a, b, scenario, tau);
    result.report.max_norm_error = std::numeric_limits<double>::quiet_NaN();
    if (options.measure_error) {
        if (oracle != nullptr) {
            result.report.max_norm_error = max_norm_error(result.c, *oracle).max_abs;
        } else {
            const DenseMatrixD ref = oracle_product(a, b, c0, options.alpha, options.beta);
            result.report.max_norm_error = max_norm_error(result.c, ref).max_abs;
        }
    }
    return result;
}

RunReport run_scenario(const DenseMatrixF& a, Scenario scenario, double tau, const RunOptions& options,
                       const DenseMatrixD* oracle) {
    if (a.rows() != a.cols()) {
        throw ValidationError("run_scenario: the self-product benchmark needs a square matrix");
    }
    return run_product(a, a, &a, scenario, tau, options, oracle).report;
}

std::string csv_header() {
    return "scenario,n,tau,granularity,seconds,products4,complexity,flops_model,effective_rate,max_norm_error";
}

std::string csv_row(const RunReport& r) {
    return r.scenario + ',' + std::to_string(r.n) + ',' + fmt_double(r.tau) + ',' + r.granularity + ',' +
           fmt_double(r.seconds) + ',' + std::to_string(r.products4) + ',' + std::to_string(r.complexity) + ',' +
           std::to_string(r.flops_model) + ',' + fmt_double(r.effective_rate) + ',' + fmt_double(r.max_norm_error);
}

void write_csv(std::ostream& out, std::span<const RunReport> rows) {
    out << csv_header() << '\n';
    for (const RunReport& r : rows) {
        out << csv_row(r) << '\n';
    }
}

std::vector<RatioRow> granularity_ratios(std::span<const RunReport> rows) {
    std::vector<RatioRow> ratios;
    for (const RunReport& r4 : rows) {
        if (r4.scenario != to_string(Scenario::spamm4)) {
            continue;
        }
        for (const RunReport& r16 : rows) {
            if (r16.scenario != to_string(Scenario::spamm16) || r16.n != r4.n || r16.tau != r4.tau) {
                continue;
            }
            RatioRow row{r4.n, r4.tau, 1.0, 0.0};
            if (r4.complexity > 0) {
                row.c16_over_c4 = static_cast<double>(r16.complexity) / static_cast<double>(r4.complexity);
            } else if (r16.complexity > 0) {
                row.c16_over_c4 = std::numeric_limits<double>::infinity();
            }
            row.t16_over_t4 = r4.seconds > 0.0 ? r16.seconds / r4.seconds : std::numeric_limits<double>::quiet_NaN();
            ratios.push_back(row);
            break;
        }
    }
    return ratios;
}

void write_ratio_csv(std::ostream& out, std::span<const RatioRow> ratios) {
    out << "n,tau,c16_over_c4,t16_over_t4\n";
    for (const RatioRow& r : ratios) {
        out << r.n << ',' << fmt_double(r.tau) << ',' << fmt_double(r.c16_over_c4) << ','
            << fmt_double(r.t16_over_t4) << '\n';
    }
}

SweepResult sweep_matrix(const DenseMatrixF& a, std::span<const double> taus, std::span<const Scenario> scenarios,
                         const RunOptions& options) {
    if (taus.empty() || scenarios.empty()) {
        throw ValidationError("sweep: tolerance and scenario lists must be nonempty");
    }
    if (a.rows() != a.cols()) {
        throw ValidationError("sweep: the self-product benchmark needs a square matrix");
    }
    SweepResult result;
    std::optional<DenseMatrixD> oracle;
    if (options.measure_error) {
        oracle = oracle_product(a, a, &a, options.alpha, options.beta);
    }
    std::optional<PreparedOperands> ops;
    for (const double tau : taus) {
        for (const Scenario s : scenarios) {
            ProductResult run;
            if (is_spamm(s)) {
                if (!ops) {
                    ops = prepare(a, a, &a, options.leaf_size, options.beta != 0.0F);
                }
                run = run_spamm(*ops, s, tau, options);
                finish_report(run.report, a, a, s, tau);
                run.report.max_norm_error =
                    oracle ? max_norm_error(run.c, *oracle).max_abs : std::numeric_limits<double>::quiet_NaN();
            } else {
                run = run_product(a, a, &a, s, tau, options, oracle ? &*oracle : nullptr);
            }
            result.rows.push_back(std::move(run.report));
        }
    }
    result.ratios = granularity_ratios(result.rows);
    return result;
}

SweepResult sweep(const GeneratorSpec& family, std::span<const std::size_t> sizes, std::span<const double> taus,
                  std::span<const Scenario> scenarios, const RunOptions& options) {
    if (sizes.empty()) {
        throw ValidationError("sweep: size list must be nonempty");
    }
    SweepResult result;
    for (const std::size_t n : sizes) {
        GeneratorSpec spec = family;
        spec.n = n;
        const DenseMatrixF a = generate(spec);
        SweepResult part = sweep_matrix(a, taus, scenarios, options);
        result.rows.insert(result.rows.end(), part.rows.begin(), part.rows.end());
        result.ratios.insert(result.ratios.end(), part.ratios.begin(), part.ratios.end());
    }
    return result;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("loglog_slope: need at least two paired points");
    }
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw ValidationError("loglog_slope: values must be positive");
        }
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double count = static_cast<double>(x.size());
    const double denom = count * sxx - sx * sx;
    if (denom == 0.0) {
        throw ValidationError("loglog_slope: x values are all equal");
    }
    return (count * sxy - sx * sy) / denom;
}

Calibration calibrate_tau(const DenseMatrixF& a, const DenseMatrixD& oracle, Scenario scenario, double target,
                          const CalibrationOptions& options, const RunOptions& run) {
    if (!is_spamm(scenario)) {
        throw ValidationError("calibrate_tau: scenario has no tolerance");
    }
    if (!(options.tau_low > 0.0) || !(options.tau_high > options.tau_low) || options.iterations < 0) {
        throw ValidationError("calibrate_tau: invalid bracket");
    }
    if (a.rows() != a.cols() || oracle.rows() != a.rows() || oracle.cols() != a.cols()) {
        throw ValidationError("calibrate_tau: needs a square matrix and its self-product oracle");
    }
    RunOptions single = run;
    single.repeats = 1;
    single.alpha = 1.0F;
    single.beta = 0.0F;
    const PreparedOperands ops = prepare(a, a, nullptr, single.leaf_size, false);

    Calibration cal;
    cal.scenario = scenario;
    cal.n = a.rows();
    cal.target = target;
    auto evaluate = [&](double tau) {
        const ProductResult r = run_spamm(ops, scenario, tau, single);
        return std::pair{max_norm_error(r.c, oracle).max_abs, r.report.complexity};
    };
    auto accept = [&](double tau, const std::pair<double, std::uint64_t>& e) {
        cal.tau = tau;
        cal.achieved_error = e.first;
        cal.complexity = e.second;
    };

    double lo = options.tau_low;
    double hi = options.tau_high;
    if (const auto e = evaluate(hi); e.first <= target) {
        accept(hi, e);
        cal.reached = true;
        return cal;
    }
    const auto e_lo = evaluate(lo);
    accept(lo, e_lo);
    if (e_lo.first > target) {
        return cal;
    }
    cal.reached = true;
    for (int it = 0; it < options.iterations; ++it) {
        const double mid = std::sqrt(lo * hi);
        const auto e = evaluate(mid);
        if (e.first <= target) {
            lo = mid;
            accept(mid, e);
        } else {
            hi = mid;
        }
    }
    return cal;
}

std::string calibration_csv_header() { return "scenario,n,target_error,tau,achieved_error,complexity,reached"; }

std::string calibration_csv_row(const Calibration& c) {
    return std::string(to_string(c.scenario)) + ',' + std::to_string(c.n) + ',' + fmt_double(c.target) + ',' +
           fmt_double(c.tau) + ',' + fmt_double(c.achieved_error) + ',' + std::to_string(c.complexity) + ',' +
           (c.reached ? "1" : "0");
}

} // namespace spamm
