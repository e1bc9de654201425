// spamm command-line driver: generate, multiply, verify, bench, sweep-tau.
//
// Exit codes: 0 success, 2 validation error, 3 I/O error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spamm/bench.hpp"
#include "spamm/generators.hpp"
#include "spamm/matrix_market.hpp"
#include "spamm/reference.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct GeneratorFlags {
    std::string kind = "blocked-decay";
    std::size_t n = 256;
    double lambda = 0.5;
    double c = 1.0;
    std::string blocks = "5,15";
    std::uint64_t seed = 1;
    bool no_symmetrize = false;
};

void add_generator_flags(CLI::App* app, GeneratorFlags& g) {
    app->add_option("--kind", g.kind, "exponential | algebraic | blocked-decay | random-dense")->capture_default_str();
    app->add_option("--lambda", g.lambda, "decay parameter")->capture_default_str();
    app->add_option("--c", g.c, "envelope magnitude")->capture_default_str();
    app->add_option("--blocks", g.blocks, "comma-separated diagonal block sizes")->capture_default_str();
    app->add_option("--seed", g.seed, "random seed")->capture_default_str();
    app->add_flag("--no-symmetrize", g.no_symmetrize, "do not mirror the upper triangle");
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof()) {
            throw spamm::ValidationError("cannot parse list item '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw spamm::ValidationError("empty list '" + text + "'");
    }
    return out;
}

spamm::GeneratorSpec to_spec(const GeneratorFlags& g, std::size_t n) {
    spamm::GeneratorSpec spec;
    spec.kind = spamm::parse_decay_kind(g.kind);
    spec.n = n;
    spec.lambda = g.lambda;
    spec.c = g.c;
    spec.blocks = parse_list<std::size_t>(g.blocks);
    spec.seed = g.seed;
    spec.symmetrize = !g.no_symmetrize;
    spamm::validate(spec);
    return spec;
}

std::vector<spamm::Scenario> parse_scenarios(const std::string& text) {
    std::vector<spamm::Scenario> out;
    for (const auto& name : parse_list<std::string>(text)) {
        out.push_back(spamm::parse_scenario(name));
    }
    return out;
}

// --granularity 4|16 selects spamm4 / spamm16 and overrides --scenario.
spamm::Scenario resolve_scenario(const std::string& scenario, const std::string& granularity) {
    if (granularity.empty()) {
        return spamm::parse_scenario(scenario);
    }
    if (granularity == "4" || granularity == "4x4" || granularity == "fine4") {
        return spamm::Scenario::spamm4;
    }
    if (granularity == "16" || granularity == "16x16" || granularity == "coarse16") {
        return spamm::Scenario::spamm16;
    }
    throw spamm::ValidationError("unknown granularity '" + granularity + "'");
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) {
                throw spamm::IoError("cannot open " + path + " for writing");
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse approximate matrix multiply for matrices with decay"};
    app.require_subcommand(1);

    // generate
    GeneratorFlags gen_flags;
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "write a synthetic decay matrix as MatrixMarket");
    add_generator_flags(gen, gen_flags);
    gen->add_option("--n", gen_flags.n, "matrix dimension")->capture_default_str();
    gen->add_option("--out", gen_out, "output file")->required();

    // multiply
    std::string mul_a;
    std::string mul_b;
    std::string mul_out;
    std::string mul_scenario = "spamm4";
    std::string mul_granularity;
    double mul_tau = 0.0;
    float mul_alpha = 1.0F;
    float mul_beta = 0.0F;
    std::string mul_c0;
    std::size_t mul_repeats = 1;
    bool mul_no_verify = false;
    auto* mul = app.add_subcommand("multiply", "C = alpha*A*B + beta*C0 under a scenario; prints a CSV report");
    mul->add_option("a", mul_a, "MatrixMarket file for A")->required();
    mul->add_option("b", mul_b, "MatrixMarket file for B")->required();
    mul->add_option("--tau", mul_tau, "product tolerance")->capture_default_str();
    mul->add_option("--scenario", mul_scenario, "spamm4 | spamm16 | spamm-dense-leaf | dense-single | dense-double")
        ->capture_default_str();
    mul->add_option("--granularity", mul_granularity, "4 or 16 (overrides --scenario)");
    mul->add_option("--alpha", mul_alpha)->capture_default_str();
    mul->add_option("--beta", mul_beta)->capture_default_str();
    mul->add_option("--c0", mul_c0, "MatrixMarket file for the initial C (needed when beta != 0)");
    mul->add_option("--repeats", mul_repeats)->capture_default_str();
    mul->add_option("--out", mul_out, "result MatrixMarket file");
    mul->add_flag("--no-verify", mul_no_verify, "skip the double-precision error check");

    // verify
    std::string ver_file;
    std::string ver_scenario = "spamm4";
    std::string ver_granularity;
    double ver_tau = 0.0;
    auto* ver = app.add_subcommand("verify", "error of the self-product A*A against the double-precision oracle");
    ver->add_option("file", ver_file, "MatrixMarket file")->required();
    ver->add_option("--tau", ver_tau)->capture_default_str();
    ver->add_option("--scenario", ver_scenario)->capture_default_str();
    ver->add_option("--granularity", ver_granularity, "4 or 16 (overrides --scenario)");

    // bench
    GeneratorFlags bench_gen;
    std::string bench_sizes = "256,512";
    std::string bench_taus = "0,1e-8";
    std::string bench_scenarios = "spamm4,spamm16,dense-single";
    std::string bench_input;
    std::string bench_out;
    std::string bench_ratios;
    std::size_t bench_repeats = 5;
    bool bench_no_error = false;
    bool bench_parallel = false;
    float bench_alpha = 1.0F;
    float bench_beta = 0.0F;
    auto* bench = app.add_subcommand("bench", "self-product benchmark sweep, CSV to stdout or --out");
    add_generator_flags(bench, bench_gen);
    bench->add_option("--n", bench_sizes, "comma-separated sizes")->capture_default_str();
    bench->add_option("--tau", bench_taus, "comma-separated tolerances")->capture_default_str();
    bench->add_option("--scenario", bench_scenarios, "comma-separated scenarios")->capture_default_str();
    bench->add_option("--input", bench_input, "MatrixMarket file instead of a generator");
    bench->add_option("--repeats", bench_repeats, "timing repetitions (median)")->capture_default_str();
    bench->add_option("--alpha", bench_alpha)->capture_default_str();
    bench->add_option("--beta", bench_beta)->capture_default_str();
    bench->add_option("--out", bench_out, "CSV output file");
    bench->add_option("--ratios-out", bench_ratios, "CSV file for C16/C4 and T16/T4 ratios");
    bench->add_flag("--no-error", bench_no_error, "skip the double-precision oracle");
    bench->add_flag("--parallel", bench_parallel, "use the OpenMP kernels");

    // sweep-tau
    GeneratorFlags cal_gen;
    std::string cal_sizes = "1024";
    std::string cal_targets = "1e-6,1e-5";
    std::string cal_scenarios = "spamm4,spamm16";
    std::string cal_input;
    std::string cal_out;
    double cal_low = 1e-14;
    double cal_high = 1e-2;
    int cal_iterations = 8;
    auto* cal = app.add_subcommand("sweep-tau", "calibrate tau to max-norm error targets by bisection");
    add_generator_flags(cal, cal_gen);
    cal->add_option("--n", cal_sizes, "comma-separated sizes")->capture_default_str();
    cal->add_option("--target", cal_targets, "comma-separated error targets")->capture_default_str();
    cal->add_option("--scenario", cal_scenarios, "comma-separated spamm scenarios")->capture_default_str();
    cal->add_option("--input", cal_input, "MatrixMarket file instead of a generator");
    cal->add_option("--tau-low", cal_low)->capture_default_str();
    cal->add_option("--tau-high", cal_high)->capture_default_str();
    cal->add_option("--iterations", cal_iterations)->capture_default_str();
    cal->add_option("--out", cal_out, "CSV output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (gen->parsed()) {
            spamm::save_matrix(gen_out, spamm::generate(to_spec(gen_flags, gen_flags.n)));
        } else if (mul->parsed()) {
            const auto scenario = resolve_scenario(mul_scenario, mul_granularity);
            const spamm::DenseMatrixF a = spamm::load_matrix(mul_a);
            const spamm::DenseMatrixF b = spamm::load_matrix(mul_b);
            std::optional<spamm::DenseMatrixF> c0;
            if (!mul_c0.empty()) {
                c0 = spamm::load_matrix(mul_c0);
            }
            spamm::RunOptions options;
            options.repeats = mul_repeats;
            options.alpha = mul_alpha;
            options.beta = mul_beta;
            options.measure_error = !mul_no_verify;
            const auto result = spamm::run_product(a, b, c0 ? &*c0 : nullptr, scenario, mul_tau, options);
            if (!mul_out.empty()) {
                spamm::save_matrix(mul_out, result.c);
            }
            std::cout << spamm::csv_header() << '\n' << spamm::csv_row(result.report) << '\n';
        } else if (ver->parsed()) {
            const auto scenario = resolve_scenario(ver_scenario, ver_granularity);
            const spamm::DenseMatrixF a = spamm::load_matrix(ver_file);
            if (a.rows() != a.cols()) {
                throw spamm::ValidationError("verify: the self-product needs a square matrix");
            }
            const auto result = spamm::run_product(a, a, nullptr, scenario, ver_tau, spamm::RunOptions{});
            const auto oracle = spamm::dense_multiply_double(a, a);
            const auto err = spamm::max_norm_error(result.c, oracle);
            std::cout << "scenario,tau,max_norm_error,row,col,products4\n"
                      << spamm::to_string(scenario) << ',' << ver_tau << ',' << err.max_abs << ',' << err.row << ','
                      << err.col << ',' << result.report.products4 << '\n';
        } else if (bench->parsed()) {
            spamm::RunOptions options;
            options.repeats = bench_repeats;
            options.measure_error = !bench_no_error;
            options.parallel = bench_parallel;
            options.alpha = bench_alpha;
            options.beta = bench_beta;
            const auto taus = parse_list<double>(bench_taus);
            const auto scenarios = parse_scenarios(bench_scenarios);
            spamm::SweepResult result;
            if (!bench_input.empty()) {
                result = spamm::sweep_matrix(spamm::load_matrix(bench_input), taus, scenarios, options);
            } else {
                const auto sizes = parse_list<std::size_t>(bench_sizes);
                result = spamm::sweep(to_spec(bench_gen, sizes.front()), sizes, taus, scenarios, options);
            }
            Output out(bench_out);
            spamm::write_csv(out.stream(), result.rows);
            if (!bench_ratios.empty()) {
                Output ratios(bench_ratios);
                spamm::write_ratio_csv(ratios.stream(), result.ratios);
            } else if (!result.ratios.empty()) {
                spamm::write_ratio_csv(std::cerr, result.ratios);
            }
        } else if (cal->parsed()) {
            const auto targets = parse_list<double>(cal_targets);
            const auto scenarios = parse_scenarios(cal_scenarios);
            spamm::CalibrationOptions copts{cal_low, cal_high, cal_iterations};
            std::vector<spamm::DenseMatrixF> inputs;
            if (!cal_input.empty()) {
                inputs.push_back(spamm::load_matrix(cal_input));
            } else {
                for (const std::size_t n : parse_list<std::size_t>(cal_sizes)) {
                    inputs.push_back(spamm::generate(to_spec(cal_gen, n)));
                }
            }
            Output out(cal_out);
            out.stream() << spamm::calibration_csv_header() << '\n';
            for (const auto& a : inputs) {
                if (a.rows() != a.cols()) {
                    throw spamm::ValidationError("sweep-tau: the self-product needs a square matrix");
                }
                const auto oracle = spamm::dense_multiply_double(a, a);
                for (const double target : targets) {
                    for (const auto s : scenarios) {
                        out.stream() << spamm::calibration_csv_row(spamm::calibrate_tau(a, oracle, s, target, copts))
                                     << '\n';
                    }
                }
            }
        }
    } catch (const spamm::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::overflow_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return EXIT_SUCCESS;
}
