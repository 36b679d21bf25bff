// app.hpp: config-driven experiment runner behind the nmflow command line.
//
// Config files are INI-style. Sections:
//   [model]       kind = jc | two-band | custom, plus parameters
//   [channelN]    custom models: operator matrix and rate function
//   [stateN]      initial decomposition: block, amplitudes, probability
//   [solver]      dt, t_max, record_stride, renormalize, match_tol, state_cap, oracle_refinement
//   [stochastic]  particles, seed
//   [run]         methods (comma separated)
//   [output]      dir, prefix, precision
//   [bench]       repeats
// Complex numbers are written "re,im"; vectors and row-major matrices are
// whitespace-separated lists of them.

#pragma once

#include "nmflow/detsolver.hpp"
#include "nmflow/ensemble.hpp"
#include "nmflow/models.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nmflow::app {

inline constexpr const char* kVersion = "1.0.0";

enum class ExitCode : int { ok = 0, validation = 1, numeric = 2, io = 3 };

// Method names accepted in [run] methods and --method.
inline constexpr const char* kMethodNames[] = {"det-euler", "det-rk4", "nmqj", "mc-unravel", "oracle",
                                               "closed-form"};

struct Overrides {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::vector<std::string> methods;
};

// Ordered section -> key -> value text; kept so the run can be echoed back.
using ConfigEcho = std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>;

struct RunConfig {
    std::string model_kind;  // "jc" | "two-band" | "custom"
    JCParams jc;
    TwoBandParams two_band;
    TimeLocalModel custom;
    std::vector<InitialComponent> initial;
    SolverConfig solver;
    std::size_t oracle_refinement = 50;  // reference dt = solver dt / refinement
    std::size_t particles = 10000;
    std::uint64_t seed = 1;
    std::vector<std::string> methods;
    std::filesystem::path out_dir = "out";
    std::string prefix = "run";
    int precision = 15;
    std::size_t bench_repeats = 3;
    ConfigEcho echo;

    bool generalized() const { return model_kind == "two-band"; }
};

// Throws IoError if the file cannot be read, ValidationError on bad content.
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

Model build_model(const RunConfig& config);

// Sampled output of one method on the shared record grid.
struct MethodResult {
    std::string method;
    std::vector<double> times;
    std::vector<std::vector<double>> probabilities;  // empty for oracle and closed-form
    std::vector<DensityMatrix> density;
    std::vector<std::vector<double>> block_traces;
    std::vector<double> rate;  // channel-0 rate (standard models)
    std::size_t n_eff = 0;
    std::vector<std::string> warnings;
};

MethodResult execute_method(const RunConfig& config, const Model& model, const std::string& method);

// Per-sample headline quantity: rho_ee for standard models, P1 for block models.
std::vector<double> headline(const MethodResult& r);

// The reference used by compare and bench: closed-form when the model has one, else the dense oracle.
MethodResult reference_result(const RunConfig& config, const Model& model);

std::string format_number(double v, int precision);
std::string method_csv(const RunConfig& config, const MethodResult& r);

// Each writes into config.out_dir and returns the paths written.
std::vector<std::filesystem::path> run_experiment(const RunConfig& config, std::ostream& log);
std::filesystem::path compare(const RunConfig& config, std::ostream& log);

struct BenchRow {
    std::string method;
    double wall_seconds = 0.0;
    double steps_per_second = 0.0;
    std::size_t memory_bytes = 0;  // working-set estimate
    double max_deviation = 0.0;    // against the reference
    std::size_t n_eff = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::vector<std::string> notes;
};

BenchReport bench(const RunConfig& config, std::ostream& log);

// Full command line: nmflow (run | compare | bench) --config PATH [--out DIR]
// [--seed INT] [--dt FLOAT] [--method NAME]...
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace nmflow::app
