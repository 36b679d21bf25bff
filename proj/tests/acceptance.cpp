// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include "nmflow/app.hpp"
#include "nmflow/detsolver.hpp"
#include "nmflow/oracle.hpp"
#include "nmflow/stochastic.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

using namespace nmflow;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

template <class F>
double seconds(F&& f) {
    const auto start = clock_type::now();
    f();
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

template <class F>
double best_of(int repeats, F&& f) {
    f();  // warm-up
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < repeats; ++k) best = std::min(best, seconds(f));
    return best;
}

SolverConfig jc_solver(double dt, double t_max, Method m, std::size_t stride = 1) {
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.t_max = t_max;
    cfg.method = m;
    cfg.record_stride = stride;
    return cfg;
}

double jc_max_error(const Trajectory& traj, const JCParams& p) {
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double exact = 0.64 * std::exp(-jc_decay_rate_integral(traj.times[k], p));
        worst = std::max(worst, std::abs(traj.density[k](0, 0).real() - exact));
    }
    return worst;
}

Outcome jc_accuracy() {
    const JCParams p = test::figure1_params();
    const Model m{make_jc_model(p)};
    Trajectory euler, rk4;
    const double t_euler = seconds([&] { euler = run(m, test::jc_initial(), jc_solver(0.005, 5.0, Method::euler)); });
    const double t_rk4 = seconds([&] { rk4 = run(m, test::jc_initial(), jc_solver(0.001, 5.0, Method::rk4)); });
    const double e_euler = jc_max_error(euler, p);
    const double e_rk4 = jc_max_error(rk4, p);
    return {e_euler <= 5e-3 && e_rk4 <= 1e-6 && t_euler < 1.0 && t_rk4 < 1.0,
            "euler max err " + fmt(e_euler) + " (<= 5e-3), rk4 max err " + fmt(e_rk4) + " (<= 1e-6), runtimes " +
                fmt(t_euler) + " s / " + fmt(t_rk4) + " s (< 1 s)"};
}

Outcome conservation() {
    const Model m{make_jc_model(test::figure1_params())};
    const SolverConfig cfg = jc_solver(0.005, 0.005 * 1e6, Method::euler, 100000);
    const Trajectory traj = run(m, test::jc_initial(), cfg);
    const double final_drift = std::abs(traj.final_registry.probability_sum() - 1.0);
    const double drift = std::max(traj.max_probability_drift, final_drift);
    return {traj.steps == 1000000 && drift <= 1e-10,
            std::to_string(traj.steps) + " steps, max |sum p - 1| = " + fmt(drift) + " (<= 1e-10)"};
}

Outcome flow_reversal() {
    const JCParams p = test::figure1_params();
    const Model m{make_jc_model(p)};
    const Trajectory traj = run(m, test::jc_initial(), jc_solver(0.005, 5.0, Method::euler));
    // Negative-rate intervals are runs of samples with gamma < 0.
    struct Interval {
        std::size_t first, last;
    };
    std::vector<Interval> intervals;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        if (traj.channel_weights[k][0] >= 0.0) continue;
        if (!intervals.empty() && intervals.back().last + 1 == k) {
            intervals.back().last = k;
        } else {
            intervals.push_back({k, k});
        }
    }
    std::size_t in_unit = 0;
    bool monotone = true;
    std::ostringstream where;
    for (const auto& iv : intervals) {
        // Probabilities respond on the step after the rate is sampled.
        for (std::size_t k = iv.first; k + 1 <= iv.last + 1 && k + 1 < traj.times.size(); ++k) {
            const auto& a = traj.probabilities[k];
            const auto& b = traj.probabilities[k + 1];
            if (b[0] < a[0] || b[1] > a[1]) monotone = false;
        }
        if (traj.times[iv.first] <= 1.0) {
            ++in_unit;
            where << " [" << fmt(traj.times[iv.first]) << ", " << fmt(std::min(traj.times[iv.last], 1.0)) << "]";
        }
    }
    return {in_unit >= 3 && monotone,
            std::to_string(in_unit) + " interval(s) with gamma < 0 in [0,1] (need >= 3):" + where.str() +
                "; p1 non-decreasing / p2 non-increasing on all " + std::to_string(intervals.size()) +
                " intervals in [0,5]: " + (monotone ? "yes" : "no")};
}

Outcome nmqj_statistics() {
    const JCParams p = test::figure1_params();
    const TimeLocalModel model = make_jc_model(p);
    const Trajectory det = run(Model{model}, test::jc_initial(), jc_solver(0.005, 3.0, Method::euler, 200));
    // Record stride 200 at dt 0.005 samples t = 0, 1, 2, 3.
    auto config = [](std::size_t n, std::uint64_t seed) {
        StochasticConfig c;
        c.particles = n;
        c.seed = seed;
        c.dt = 0.005;
        c.t_max = 3.0;
        c.record_stride = 200;
        return c;
    };
    int seeds_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto res = nmqj_run(model, test::jc_initial(), config(10000, seed)).trajectory;
        bool ok = true;
        for (std::size_t k = 1; k <= 3; ++k) {
            const double ref = det.density[k](0, 0).real();
            const double sigma = std::sqrt(ref * (1.0 - ref) / 10000.0);
            ok = ok && std::abs(res.density[k](0, 0).real() - ref) <= 4.0 * sigma;
        }
        seeds_ok += ok ? 1 : 0;
    }

    // RMS deviation over 64 seeds and t = 1, 2, 3 for each N; slope of log error vs log N.
    const std::vector<double> ns{100.0, 1000.0, 10000.0};
    std::vector<double> log_n, log_err;
    for (double n : ns) {
        double sum_sq = 0.0;
        int count = 0;
        for (std::uint64_t seed = 1; seed <= 64; ++seed) {
            const auto res = nmqj_run(model, test::jc_initial(), config(static_cast<std::size_t>(n), 1000 + seed))
                                 .trajectory;
            for (std::size_t k = 1; k <= 3; ++k) {
                const double d = res.density[k](0, 0).real() - det.density[k](0, 0).real();
                sum_sq += d * d;
                ++count;
            }
        }
        log_n.push_back(std::log(n));
        log_err.push_back(0.5 * std::log(sum_sq / count));
    }
    const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / 3.0;
    const double my = std::accumulate(log_err.begin(), log_err.end(), 0.0) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        sxy += (log_n[i] - mx) * (log_err[i] - my);
        sxx += (log_n[i] - mx) * (log_n[i] - mx);
    }
    const double slope = sxy / sxx;
    return {seeds_ok >= 9 && std::abs(slope + 0.5) <= 0.15,
            std::to_string(seeds_ok) + "/10 seeds within 4 sigma at t = 1, 2, 3 (need >= 9); convergence slope " +
                fmt(slope) + " (-0.5 +- 0.15)"};
}

Outcome two_band_accuracy() {
    const TwoBandParams p{0.31, 1.0, 1.0};
    SolverConfig cfg = jc_solver(0.01, 20.0, Method::euler);
    const Model m{make_two_band_model(p, cfg.dt, cfg.t_max)};
    const Trajectory traj = run(m, {{0, two_level::excited(), 1.0}}, cfg);
    double err = 0.0, trace = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double exact = 0.5 * (1.0 + std::exp(-4.0 * oracle::two_band_kernel_double_integral(traj.times[k], p)));
        err = std::max(err, std::abs(traj.block_traces[k][0] - exact));
        trace = std::max(trace, std::abs(traj.block_traces[k][0] + traj.block_traces[k][1] - 1.0));
    }
    return {err <= 1e-3 && trace <= 1e-10,
            "max |P1 - exact| = " + fmt(err) + " (<= 1e-3), max |sum tr rho_i - 1| = " + fmt(trace) + " (<= 1e-10)"};
}

Outcome degeneration() {
    const TimeLocalModel jc = make_jc_model(JCParams{4.0, 1.0, 0.0});
    double worst = 0.0;
    for (Method method : {Method::euler, Method::rk4}) {
        const SolverConfig cfg = jc_solver(0.005, 5.0, method);
        const Trajectory a = run(Model{jc}, test::jc_initial(), cfg);
        const Trajectory b = run(Model{as_generalized(jc)}, test::jc_initial(), cfg);
        if (a.times.size() != b.times.size()) return {false, "sample counts differ"};
        for (std::size_t k = 0; k < a.times.size(); ++k) {
            worst = std::max(worst, (a.density[k] - b.density[k]).cwiseAbs().maxCoeff());
            for (std::size_t s = 0; s < a.probabilities[k].size(); ++s) {
                worst = std::max(worst, std::abs(a.probabilities[k][s] - b.probabilities[k][s]));
            }
        }
    }
    return {worst <= 1e-12, "max pointwise difference " + fmt(worst) + " (<= 1e-12), Euler and RK4"};
}

Outcome three_level() {
    std::ostringstream detail;
    bool pass = true;
    for (std::uint64_t seed : {11u, 22u, 33u}) {
        const auto c = test::random_three_level(seed);
        auto error_at = [&](double dt) {
            SolverConfig cfg = jc_solver(dt, 3.0, Method::euler, static_cast<std::size_t>(std::lround(0.01 / dt)));
            const Trajectory traj = run(Model{c.model}, {{0, c.initial, 1.0}}, cfg);
            const auto dense = oracle::dense_integrate(Model{c.model}, {projector(c.initial)}, dt / 50.0, 3.0,
                                                       cfg.record_stride * 50);
            double worst = 0.0;
            for (std::size_t k = 0; k < traj.times.size(); ++k) {
                worst = std::max(worst, (traj.density[k] - dense.total[k]).cwiseAbs().maxCoeff());
            }
            return worst;
        };
        const double coarse = error_at(2e-3);
        const double fine = error_at(1e-3);
        const double ratio = fine / coarse;
        const bool ok = fine <= 1e-3 && ratio >= 0.4 && ratio <= 0.6;
        pass = pass && ok;
        detail << (detail.tellp() > 0 ? "; " : "") << "seed " << seed << ": err(1e-3) " << fmt(fine) << ", ratio "
               << fmt(ratio);
    }
    return {pass, detail.str() + " (err <= 1e-3, ratio 0.5 +- 20%)"};
}

Outcome performance() {
    const TimeLocalModel model = make_jc_model(test::figure1_params());
    const SolverConfig det_cfg = jc_solver(0.005, 5.0, Method::euler);
    StochasticConfig st;
    st.particles = 10000;
    st.seed = 1;
    st.dt = 0.005;
    st.t_max = 5.0;
    const double det = best_of(5, [&] { run(Model{model}, test::jc_initial(), det_cfg); });
    const double nmqj = best_of(3, [&] { nmqj_run(model, test::jc_initial(), st); });
    const double speedup = nmqj / det;
    return {speedup >= 50.0, "det-euler " + fmt(det) + " s, nmqj(N=1e4) " + fmt(nmqj) + " s, speed-up " +
                                 fmt(speedup) + "x (>= 50x)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome reproducibility() {
    const fs::path root = fs::temp_directory_path() / "nmflow_acceptance_repro";
    fs::remove_all(root);
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const char* name : {"jc.config", "two-band.config", "three-level.config"}) {
        std::ostringstream log;
        std::vector<fs::path> first;
        for (const char* run_dir : {"a", "b"}) {
            app::Overrides o;
            o.out_dir = root / run_dir;
            const auto files = app::run_experiment(app::load_config(fs::path(NMFLOW_CONFIG_DIR) / name, o), log);
            if (first.empty()) first = files;
        }
        for (const auto& f : first) {
            if (f.extension() != ".csv") continue;
            ++compared;
            if (slurp(f) != slurp(root / "b" / f.filename())) differing.push_back(f.filename().string());
        }
    }
    fs::remove_all(root);
    std::string detail = std::to_string(compared) + " CSV files from 3 bundled configs, " +
                         std::to_string(differing.size()) + " differ";
    for (const auto& d : differing) detail += " " + d;
    return {compared > 0 && differing.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"JC deterministic accuracy", jc_accuracy},
        {"Probability conservation", conservation},
        {"Flow reversal", flow_reversal},
        {"NMQJ statistical agreement", nmqj_statistics},
        {"Two-band accuracy", two_band_accuracy},
        {"Generalized-to-standard degeneration", degeneration},
        {"Oracle equivalence on a three-level model", three_level},
        {"Performance", performance},
        {"Reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
