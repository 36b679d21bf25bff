#include "nmflow/app.hpp"

#include "nmflow/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nmflow::app {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (trim(text.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(where + ": '" + text + "' is not a number");
}

Complex parse_complex(const std::string& text, const std::string& where) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) return {parse_double(text, where), 0.0};
    return {parse_double(text.substr(0, comma), where), parse_double(text.substr(comma + 1), where)};
}

std::vector<Complex> parse_complex_list(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    std::vector<Complex> out;
    for (std::string tok; in >> tok;) out.push_back(parse_complex(tok, where));
    return out;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& where) {
    std::string cleaned = text;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    std::vector<double> out;
    for (std::string tok; in >> tok;) out.push_back(parse_double(tok, where));
    return out;
}

// One INI section with typed getters; every key read is recorded for the echo.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    bool present() const { return tree_ != nullptr; }
    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string text(const std::string& key) const {
        if (!has(key)) throw ValidationError("[" + name_ + "] missing key '" + key + "'");
        return trim(tree_->find(key)->second.data());
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    double real(const std::string& key) const { return parse_double(text(key), where(key)); }
    double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            throw ValidationError(where(key) + ": '" + s + "' is not a non-negative integer");
        }
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw ValidationError(where(key) + ": '" + s + "' is out of range");
        }
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
        if (s == "false" || s == "no" || s == "0" || s == "off") return false;
        throw ValidationError(where(key) + ": '" + s + "' is not a boolean");
    }
    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
    const pt::ptree* tree_;
    std::string name_;
};

Section section(const pt::ptree& root, const std::string& name) {
    auto it = root.find(name);
    return Section(it == root.not_found() ? nullptr : &it->second, name);
}

Operator parse_matrix(const Section& s, const std::string& key, std::size_t dim) {
    const auto values = parse_complex_list(s.text(key), s.where(key));
    if (values.size() != dim * dim) {
        throw ValidationError(s.where(key) + ": expected " + std::to_string(dim * dim) + " entries, got " +
                              std::to_string(values.size()));
    }
    const auto d = static_cast<Eigen::Index>(dim);
    Operator m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = values[static_cast<std::size_t>(r * d + c)];
    return m;
}

// Piecewise-linear interpolation on a uniform table.
ScalarFunction tabulated(double t0, double dt, std::vector<double> values, const std::string& where) {
    if (values.size() < 2) throw ValidationError(where + ": a rate table needs at least 2 values");
    if (!(dt > 0.0)) throw ValidationError(where + ": table step must be > 0");
    const double t_end = t0 + dt * static_cast<double>(values.size() - 1);
    return [t0, dt, t_end, values = std::move(values), where](double t) {
        if (t < t0 - 1e-12 || t > t_end + 1e-9 * std::max(1.0, t_end)) {
            throw ValidationError(where + ": rate table does not cover t = " + std::to_string(t));
        }
        const double x = std::clamp((t - t0) / dt, 0.0, static_cast<double>(values.size() - 1));
        const auto k = std::min(static_cast<std::size_t>(x), values.size() - 2);
        const double frac = x - static_cast<double>(k);
        return values[k] + frac * (values[k + 1] - values[k]);
    };
}

ScalarFunction parse_rate(const Section& s, const std::filesystem::path& base_dir, double t_max) {
    const std::string kind = s.text("rate", "constant");
    if (kind == "constant") {
        const double v = s.real("value");
        return [v](double) { return v; };
    }
    if (kind == "harmonic") {
        const double offset = s.real("offset", 0.0);
        const double amplitude = s.real("amplitude");
        const double omega = s.real("omega");
        const double phase = s.real("phase", 0.0);
        return [=](double t) { return offset + amplitude * std::cos(omega * t + phase); };
    }
    ScalarFunction f;
    double t_end = 0.0;
    if (kind == "table") {
        const double t0 = s.real("t0", 0.0);
        const double dt = s.real("table_dt");
        const auto values = parse_real_list(s.text("values"), s.where("values"));
        t_end = t0 + dt * static_cast<double>(values.size() - 1);
        f = tabulated(t0, dt, values, s.where("values"));
    } else if (kind == "file") {
        const std::filesystem::path file = base_dir / s.text("file");
        std::ifstream in(file);
        if (!in) throw IoError("cannot open rate table " + file.string());
        std::vector<double> times, values;
        for (std::string line; std::getline(in, line);) {
            line = trim(line);
            if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
            const auto row = parse_real_list(line, file.string());
            if (row.size() != 2) throw ValidationError(file.string() + ": expected rows 't,value'");
            times.push_back(row[0]);
            values.push_back(row[1]);
        }
        if (times.size() < 2) throw ValidationError(file.string() + ": need at least 2 rows");
        const double dt = times[1] - times[0];
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
                throw ValidationError(file.string() + ": rate table grid must be uniform");
            }
        }
        t_end = times.back();
        f = tabulated(times.front(), dt, values, file.string());
    } else {
        throw ValidationError(s.where("rate") + ": unknown rate kind '" + kind +
                              "' (constant, harmonic, table, file)");
    }
    // The solver evaluates rates up to t_max (RK4 stages included).
    if (t_end + 1e-9 < t_max) {
        throw ValidationError(s.where("rate") + ": rate table ends at t = " + std::to_string(t_end) +
                              " before t_max = " + std::to_string(t_max));
    }
    return f;
}

void apply_overrides(pt::ptree& root, const Overrides& o) {
    if (o.out_dir) root.put_child("output.dir", pt::ptree(o.out_dir->string()));
    if (o.seed) root.put_child("stochastic.seed", pt::ptree(std::to_string(*o.seed)));
    if (o.dt) {
        std::ostringstream s;
        s.precision(17);
        s << *o.dt;
        root.put_child("solver.dt", pt::ptree(s.str()));
    }
    if (!o.methods.empty()) {
        std::string joined;
        for (const auto& m : o.methods) joined += (joined.empty() ? "" : ", ") + m;
        root.put_child("run.methods", pt::ptree(joined));
    }
}

bool known_method(const std::string& m) {
    return std::find(std::begin(kMethodNames), std::end(kMethodNames), m) != std::end(kMethodNames);
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    pt::ptree root;
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path.string());
        try {
            pt::read_ini(in, root);
        } catch (const pt::ini_parser_error& e) {
            throw ValidationError("config " + path.string() + ": " + e.message() + " (line " +
                                  std::to_string(e.line()) + ")");
        }
    }
    apply_overrides(root, overrides);
    const std::filesystem::path base_dir = path.parent_path();

    RunConfig cfg;
    for (const auto& [name, sec] : root) {
        if (name == "meta") continue;  // written by a previous run's sidecar
        std::vector<std::pair<std::string, std::string>> kv;
        for (const auto& [key, value] : sec) {
            std::string text = value.data();
            // Rate files are echoed as absolute paths so a sidecar re-runs from any directory.
            if (name.rfind("channel", 0) == 0 && key == "file") {
                text = std::filesystem::absolute(base_dir / trim(text)).lexically_normal().string();
            }
            kv.emplace_back(key, std::move(text));
        }
        cfg.echo.emplace_back(name, std::move(kv));
    }

    const Section solver = section(root, "solver");
    cfg.solver.dt = solver.real("dt");
    cfg.solver.t_max = solver.real("t_max");
    cfg.solver.record_stride = solver.count("record_stride", 1);
    cfg.solver.renormalize_each_step = solver.flag("renormalize", true);
    cfg.solver.match_tol = solver.real("match_tol", kDefaultMatchTol);
    cfg.solver.state_cap = solver.count("state_cap", kDefaultStateCap);
    cfg.oracle_refinement = solver.count("oracle_refinement", 50);
    cfg.solver.validate();
    if (cfg.oracle_refinement == 0) throw ValidationError("[solver] oracle_refinement must be >= 1");

    const Section model = section(root, "model");
    cfg.model_kind = model.text("kind");
    if (cfg.model_kind == "jc") {
        cfg.jc = JCParams{model.real("gamma0"), model.real("lambda"), model.real("delta")};
        cfg.jc.validate();
    } else if (cfg.model_kind == "two-band") {
        cfg.two_band = TwoBandParams{model.real("delta_eps"), model.real("gamma1"), model.real("gamma2")};
        cfg.two_band.validate();
    } else if (cfg.model_kind == "custom") {
        const auto dim = model.count("dim", 0);
        if (dim == 0) throw ValidationError("[model] dim must be >= 1");
        cfg.custom.hamiltonian = Hamiltonian::zero(dim);
        if (model.has("hamiltonian")) cfg.custom.hamiltonian.constant = parse_matrix(model, "hamiltonian", dim);
        const auto n_channels = model.count("channels", 0);
        for (std::size_t c = 1; c <= n_channels; ++c) {
            const std::string name = "channel" + std::to_string(c);
            const Section ch = section(root, name);
            if (!ch.present()) throw ValidationError("missing section [" + name + "]");
            cfg.custom.channels.push_back(
                JumpChannel{parse_matrix(ch, "operator", dim), parse_rate(ch, base_dir, cfg.solver.t_max),
                            ch.text("label", name)});
        }
        cfg.custom.validate();
    } else {
        throw ValidationError("[model] kind must be jc, two-band or custom (got '" + cfg.model_kind + "')");
    }

    const std::size_t dim = cfg.model_kind == "custom" ? cfg.custom.dim() : 2;
    const std::size_t blocks = cfg.generalized() ? 2 : 1;
    for (std::size_t k = 1;; ++k) {
        const Section st = section(root, "state" + std::to_string(k));
        if (!st.present()) break;
        const auto block = st.count("block", 1);
        if (block < 1 || block > blocks) {
            throw ValidationError(st.where("block") + ": must be between 1 and " + std::to_string(blocks));
        }
        const auto amps = parse_complex_list(st.text("amplitudes"), st.where("amplitudes"));
        if (amps.size() != dim) {
            throw ValidationError(st.where("amplitudes") + ": expected " + std::to_string(dim) + " amplitudes");
        }
        StateVector psi(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) psi(static_cast<Eigen::Index>(i)) = amps[i];
        auto n = normalize(psi);
        if (!n) throw ValidationError(st.where("amplitudes") + ": zero state");
        cfg.initial.push_back({block - 1, n->state, st.real("probability")});
    }
    if (cfg.initial.empty()) throw ValidationError("no [state1] section: the initial decomposition is required");

    const Section stoch = section(root, "stochastic");
    cfg.particles = stoch.count("particles", 10000);
    cfg.seed = stoch.count("seed", 1);

    const Section run = section(root, "run");
    const std::string methods = run.text("methods", "det-euler");
    std::string cleaned = methods;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    for (std::string m; in >> m;) {
        if (!known_method(m)) throw ValidationError("[run] methods: unknown method '" + m + "'");
        if (m == "nmqj" && cfg.generalized()) throw ValidationError("nmqj needs a time-local (jc/custom) model");
        if (m == "mc-unravel" && !cfg.generalized()) throw ValidationError("mc-unravel needs a block model");
        if (m == "closed-form" && cfg.model_kind == "custom") {
            throw ValidationError("closed-form is only available for jc and two-band models");
        }
        if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) cfg.methods.push_back(m);
    }
    if (cfg.methods.empty()) throw ValidationError("[run] methods is empty");

    const Section output = section(root, "output");
    cfg.out_dir = output.text("dir", "out");
    cfg.prefix = output.text("prefix", cfg.model_kind);
    cfg.precision = static_cast<int>(output.count("precision", 15));
    if (cfg.precision < 1 || cfg.precision > 17) throw ValidationError("[output] precision must be 1..17");

    cfg.bench_repeats = section(root, "bench").count("repeats", 3);
    if (cfg.bench_repeats == 0) throw ValidationError("[bench] repeats must be >= 1");
    return cfg;
}

Model build_model(const RunConfig& config) {
    if (config.model_kind == "jc") return make_jc_model(config.jc);
    if (config.model_kind == "two-band") {
        return make_two_band_model(config.two_band, config.solver.dt, config.solver.t_max);
    }
    return config.custom;
}

}  // namespace nmflow::app
