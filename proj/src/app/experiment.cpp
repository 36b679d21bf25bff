#include "nmflow/app.hpp"

#include "nmflow/errors.hpp"
#include "nmflow/oracle.hpp"
#include "nmflow/stochastic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace nmflow::app {

namespace {

// Record grid shared by every method: every record_stride steps plus the last step.
std::vector<double> record_grid(const SolverConfig& s) {
    const std::size_t steps = s.steps();
    std::vector<double> t{0.0};
    for (std::size_t k = 1; k <= steps; ++k) {
        if (k % s.record_stride == 0 || k == steps) t.push_back(static_cast<double>(k) * s.dt);
    }
    return t;
}

void align_times(MethodResult& r, const SolverConfig& s) {
    auto grid = record_grid(s);
    if (grid.size() != r.times.size()) {
        throw NumericError(r.method + ": produced " + std::to_string(r.times.size()) + " samples, expected " +
                           std::to_string(grid.size()));
    }
    r.times = std::move(grid);
}

std::vector<DensityMatrix> initial_blocks(const RunConfig& c, std::size_t blocks, std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    std::vector<DensityMatrix> out(blocks, DensityMatrix::Zero(d, d));
    for (const auto& comp : c.initial) out[comp.block] += comp.probability * projector(comp.psi);
    return out;
}

MethodResult from_trajectory(const std::string& name, Trajectory&& traj) {
    MethodResult r;
    r.method = name;
    r.times = std::move(traj.times);
    r.probabilities = std::move(traj.probabilities);
    r.density = std::move(traj.density);
    r.block_traces = std::move(traj.block_traces);
    for (const auto& w : traj.channel_weights) r.rate.push_back(w.empty() ? 0.0 : w[0]);
    r.n_eff = traj.final_registry.size();
    r.warnings = std::move(traj.warnings);
    return r;
}

StochasticConfig stochastic_config(const RunConfig& c) {
    StochasticConfig s;
    s.particles = c.particles;
    s.seed = c.seed;
    s.dt = c.solver.dt;
    s.t_max = c.solver.t_max;
    s.record_stride = c.solver.record_stride;
    s.renormalize_each_step = c.solver.renormalize_each_step;
    s.match_tol = c.solver.match_tol;
    s.state_cap = c.solver.state_cap;
    return s;
}

double standard_rate(const Model& model, double t) {
    const auto& m = std::get<TimeLocalModel>(model);
    return m.channels.empty() ? 0.0 : m.channels.front().rate(t);
}

MethodResult oracle_result(const RunConfig& c, const Model& model) {
    const std::size_t blocks = model_blocks(model);
    const auto ref = static_cast<double>(c.oracle_refinement);
    auto dense = oracle::dense_integrate(model, initial_blocks(c, blocks, model_dim(model)), c.solver.dt / ref,
                                         c.solver.t_max, c.solver.record_stride * c.oracle_refinement);
    MethodResult r;
    r.method = "oracle";
    r.times = std::move(dense.times);
    r.density = std::move(dense.total);
    for (const auto& sample : dense.blocks) {
        std::vector<double> traces;
        for (const auto& b : sample) traces.push_back(b.trace().real());
        r.block_traces.push_back(std::move(traces));
    }
    align_times(r, c.solver);
    if (!c.generalized()) {
        for (double t : r.times) r.rate.push_back(standard_rate(model, t));
    }
    return r;
}

bool is_basis_state(const StateVector& psi, Eigen::Index index) { return std::abs(std::abs(psi(index)) - 1.0) < 1e-12; }

MethodResult closed_form_result(const RunConfig& c) {
    MethodResult r;
    r.method = "closed-form";
    r.times = record_grid(c.solver);
    if (c.model_kind == "jc") {
        const DensityMatrix rho0 = initial_blocks(c, 1, 2).front();
        for (double t : r.times) {
            const auto coh = oracle::jc_closed_form(t, c.jc, rho0);
            DensityMatrix rho(2, 2);
            rho(0, 0) = coh.rho_ee;
            rho(0, 1) = coh.rho_eg;
            rho(1, 0) = std::conj(coh.rho_eg);
            rho(1, 1) = rho0.trace().real() - coh.rho_ee;
            r.density.push_back(rho);
            r.block_traces.push_back({rho0.trace().real()});
            r.rate.push_back(jc_decay_rate(t, c.jc));
        }
        return r;
    }
    if (c.model_kind != "two-band") throw ValidationError("closed-form is only available for jc and two-band models");
    double p0 = 0.0;
    for (const auto& comp : c.initial) {
        const bool ok = comp.block == 0 ? is_basis_state(comp.psi, 0) : is_basis_state(comp.psi, 1);
        if (!ok) {
            throw ValidationError("two-band closed form needs |e> in block 1 and |g> in block 2 initially");
        }
        if (comp.block == 0) p0 += comp.probability;
    }
    for (double t : r.times) {
        const double p1 = oracle::two_band_closed_form(t, c.two_band, p0);
        DensityMatrix rho = DensityMatrix::Zero(2, 2);
        rho(0, 0) = p1;
        rho(1, 1) = 1.0 - p1;
        r.density.push_back(rho);
        r.block_traces.push_back({p1, 1.0 - p1});
    }
    return r;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

void prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

std::string sidecar(const RunConfig& c, const std::vector<MethodResult>& results) {
    std::ostringstream out;
    out << "# nmflow run metadata; usable as a config file\n";
    for (const auto& [section, keys] : c.echo) {
        out << "[" << section << "]\n";
        for (const auto& [k, v] : keys) out << k << " = " << v << "\n";
        out << "\n";
    }
    out << "[meta]\nversion = " << kVersion << "\nrng = " << kRngName << "\n";
    for (const auto& r : results) {
        out << r.method << ".n_eff = " << r.n_eff << "\n";
        for (std::size_t w = 0; w < r.warnings.size(); ++w) {
            out << r.method << ".warning" << (w + 1) << " = " << r.warnings[w] << "\n";
        }
    }
    return out.str();
}

double max_abs_deviation(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool is_stochastic(const std::string& m) { return m == "nmqj" || m == "mc-unravel"; }

// Working-set estimate in bytes: propagated states and the recorded series.
std::size_t memory_estimate(const RunConfig& c, const MethodResult& r, std::size_t dim) {
    const std::size_t complex_bytes = sizeof(Complex);
    const std::size_t samples = r.times.size();
    std::size_t bytes = samples * (dim * dim * complex_bytes + sizeof(double) * (2 + r.n_eff));
    if (r.method == "oracle") {
        bytes += 6 * (c.generalized() ? 2 : 1) * dim * dim * complex_bytes;
    } else if (r.method != "closed-form") {
        bytes += 6 * r.n_eff * dim * complex_bytes + r.n_eff * sizeof(double);
    }
    if (is_stochastic(r.method)) bytes += c.particles * sizeof(std::size_t);
    return bytes;
}

}  // namespace

std::string format_number(double v, int precision) {
    if (v == 0.0) v = 0.0;  // folds -0 into 0
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

MethodResult execute_method(const RunConfig& config, const Model& model, const std::string& method) {
    MethodResult r;
    if (method == "det-euler" || method == "det-rk4") {
        SolverConfig s = config.solver;
        s.method = method == "det-euler" ? Method::euler : Method::rk4;
        r = from_trajectory(method, run(model, config.initial, s));
    } else if (method == "nmqj") {
        const auto* m = std::get_if<TimeLocalModel>(&model);
        if (!m) throw ValidationError("nmqj needs a time-local model");
        r = from_trajectory(method, nmqj_run(*m, config.initial, stochastic_config(config)).trajectory);
    } else if (method == "mc-unravel") {
        const auto* m = std::get_if<GeneralizedModel>(&model);
        if (!m) throw ValidationError("mc-unravel needs a block model");
        r = from_trajectory(method, mc_unravel_run(*m, config.initial, stochastic_config(config)).trajectory);
    } else if (method == "oracle") {
        return oracle_result(config, model);
    } else if (method == "closed-form") {
        return closed_form_result(config);
    } else {
        throw ValidationError("unknown method '" + method + "'");
    }
    align_times(r, config.solver);
    return r;
}

std::vector<double> headline(const MethodResult& r) {
    std::vector<double> out;
    out.reserve(r.times.size());
    for (const auto& rho : r.density) out.push_back(rho(0, 0).real());
    return out;
}

MethodResult reference_result(const RunConfig& config, const Model& model) {
    if (config.model_kind == "jc" || config.model_kind == "two-band") return closed_form_result(config);
    return oracle_result(config, model);
}

std::string method_csv(const RunConfig& c, const MethodResult& r) {
    const int prec = c.precision;
    std::ostringstream out;
    const bool with_p = !r.probabilities.empty();
    out << "t";
    if (c.generalized()) {
        out << ",P1,P2,trace_rho1,trace_rho2\n";
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            const auto& tr = r.block_traces[i];
            const double p1 = with_p ? r.probabilities[i].at(0) : tr.at(0);
            const double p2 = with_p ? r.probabilities[i].at(1) : tr.at(1);
            out << format_number(r.times[i], prec) << ',' << format_number(p1, prec) << ','
                << format_number(p2, prec) << ',' << format_number(tr.at(0), prec) << ','
                << format_number(tr.at(1), prec) << '\n';
        }
        return out.str();
    }
    const std::size_t n_p = with_p ? r.probabilities.front().size() : 0;
    for (std::size_t a = 0; a < n_p; ++a) out << ",p_" << (a + 1);
    out << ",rho_ee,abs_rho_eg,rate_gamma\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        out << format_number(r.times[i], prec);
        for (std::size_t a = 0; a < n_p; ++a) out << ',' << format_number(r.probabilities[i][a], prec);
        const auto& rho = r.density[i];
        out << ',' << format_number(rho(0, 0).real(), prec) << ',' << format_number(std::abs(rho(0, 1)), prec)
            << ',' << format_number(r.rate.at(i), prec) << '\n';
    }
    return out.str();
}

std::vector<std::filesystem::path> run_experiment(const RunConfig& config, std::ostream& log) {
    const Model model = build_model(config);
    std::vector<MethodResult> results;
    std::vector<std::string> csv;
    for (const auto& m : config.methods) {
        results.push_back(execute_method(config, model, m));
        csv.push_back(method_csv(config, results.back()));
        for (const auto& w : results.back().warnings) log << "warning (" << m << "): " << w << "\n";
    }
    prepare_dir(config.out_dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto path = config.out_dir / (config.prefix + "_" + results[i].method + ".csv");
        write_file(path, csv[i]);
        written.push_back(path);
        log << "wrote " << path.string() << " (" << results[i].times.size() << " samples)\n";
    }
    const auto meta = config.out_dir / (config.prefix + ".meta.ini");
    write_file(meta, sidecar(config, results));
    written.push_back(meta);
    log << "wrote " << meta.string() << "\n";
    return written;
}

std::filesystem::path compare(const RunConfig& config, std::ostream& log) {
    if (config.methods.size() < 2) {
        throw ValidationError("compare needs at least 2 methods, got " + std::to_string(config.methods.size()));
    }
    const Model model = build_model(config);
    const MethodResult reference = reference_result(config, model);
    const std::vector<double> ref = headline(reference);
    std::vector<std::vector<double>> series;
    for (const auto& m : config.methods) series.push_back(headline(execute_method(config, model, m)));

    const std::string quantity = config.generalized() ? "P1" : "rho_ee";
    const int prec = config.precision;
    std::ostringstream out;
    out << "t";
    for (const auto& m : config.methods) out << ',' << m << '_' << quantity;
    out << ",oracle";
    for (const auto& m : config.methods) out << ',' << m << "_absdev";
    out << '\n';
    std::vector<double> mean_dev(series.size(), 0.0);
    for (std::size_t i = 0; i < reference.times.size(); ++i) {
        out << format_number(reference.times[i], prec);
        for (const auto& s : series) out << ',' << format_number(s[i], prec);
        out << ',' << format_number(ref[i], prec);
        for (std::size_t k = 0; k < series.size(); ++k) {
            const double d = std::abs(series[k][i] - ref[i]);
            mean_dev[k] += d / static_cast<double>(reference.times.size());
            out << ',' << format_number(d, prec);
        }
        out << '\n';
    }
    prepare_dir(config.out_dir);
    const auto path = config.out_dir / (config.prefix + "_compare.csv");
    write_file(path, out.str());
    log << "reference: " << reference.method << "\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        log << config.methods[k] << ": mean |dev| = " << format_number(mean_dev[k], 6)
            << ", max |dev| = " << format_number(max_abs_deviation(series[k], ref), 6) << "\n";
    }
    log << "wrote " << path.string() << "\n";
    return path;
}

BenchReport bench(const RunConfig& config, std::ostream& log) {
    using clock = std::chrono::steady_clock;
    const Model model = build_model(config);
    const std::vector<double> ref = headline(reference_result(config, model));
    const std::size_t steps = config.solver.steps();
    BenchReport report;
    for (const auto& m : config.methods) {
        if (is_stochastic(m) && config.particles == 0) {
            report.notes.push_back(m + " skipped: stochastic particle count is 0");
            continue;
        }
        MethodResult result = execute_method(config, model, m);  // warm-up, excluded from timing
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < config.bench_repeats; ++k) {
            const auto start = clock::now();
            result = execute_method(config, model, m);
            best = std::min(best, std::chrono::duration<double>(clock::now() - start).count());
        }
        best = std::max(best, 1e-9);
        BenchRow row;
        row.method = m;
        row.wall_seconds = best;
        row.steps_per_second = static_cast<double>(steps) / best;
        row.memory_bytes = memory_estimate(config, result, model_dim(model));
        row.max_deviation = max_abs_deviation(headline(result), ref);
        row.n_eff = result.n_eff;
        report.rows.push_back(row);
    }

    std::ostringstream csv;
    csv << "method,wall_seconds,steps_per_second,memory_bytes,max_deviation,n_eff\n";
    log << std::left << std::setw(14) << "method" << std::right << std::setw(14) << "wall [s]" << std::setw(16)
        << "steps/s" << std::setw(14) << "memory [B]" << std::setw(14) << "max |dev|" << std::setw(7) << "N_eff"
        << "\n";
    for (const auto& r : report.rows) {
        csv << r.method << ',' << format_number(r.wall_seconds, config.precision) << ','
            << format_number(r.steps_per_second, config.precision) << ',' << r.memory_bytes << ','
            << format_number(r.max_deviation, config.precision) << ',' << r.n_eff << '\n';
        log << std::left << std::setw(14) << r.method << std::right << std::setw(14) << format_number(r.wall_seconds, 4)
            << std::setw(16) << format_number(r.steps_per_second, 4) << std::setw(14) << r.memory_bytes
            << std::setw(14) << format_number(r.max_deviation, 3) << std::setw(7) << r.n_eff << "\n";
    }
    for (const auto& n : report.notes) {
        csv << "# " << n << '\n';
        log << "note: " << n << "\n";
    }
    prepare_dir(config.out_dir);
    const auto path = config.out_dir / (config.prefix + "_bench.csv");
    write_file(path, csv.str());
    log << "wrote " << path.string() << "\n";
    return report;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"nmflow: deterministic probability-flow solver for time-local master equations"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::filesystem::path config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<std::string> methods;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
        sub->add_option("--seed", seed, "stochastic seed (overrides [stochastic] seed)");
        sub->add_option("--dt", dt, "time step (overrides [solver] dt)");
        sub->add_option("--method", methods, "method to run; repeatable (overrides [run] methods)");
    };
    CLI::App* run_cmd = app.add_subcommand("run", "run each method and write one CSV per method");
    CLI::App* compare_cmd = app.add_subcommand("compare", "align methods against the reference in one CSV");
    CLI::App* bench_cmd = app.add_subcommand("bench", "time each method and report deviations");
    for (auto* sub : {run_cmd, compare_cmd, bench_cmd}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::validation);
    }

    try {
        Overrides o;
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--out")) o.out_dir = out_dir;
        if (sub->count("--seed")) o.seed = seed;
        if (sub->count("--dt")) o.dt = dt;
        o.methods = methods;
        const RunConfig config = load_config(config_path, o);
        if (sub == run_cmd) {
            run_experiment(config, out);
        } else if (sub == compare_cmd) {
            compare(config, out);
        } else {
            bench(config, out);
        }
        return static_cast<int>(ExitCode::ok);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::validation);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return static_cast<int>(ExitCode::numeric);
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::io);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::numeric);
    }
}

}  // namespace nmflow::app
