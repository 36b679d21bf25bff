#include "nmflow/stochastic.hpp"

#include "nmflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace nmflow {

void StochasticConfig::validate() const {
    if (particles == 0) throw ValidationError("stochastic: particle count must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("stochastic: dt must be > 0");
    if (!(t_max >= dt)) throw ValidationError("stochastic: t_max must be >= dt");
    if (record_stride == 0) throw ValidationError("stochastic: record_stride must be >= 1");
}

std::vector<std::size_t> initial_occupancy(const std::vector<double>& probabilities, std::size_t particles) {
    const auto n = static_cast<double>(particles);
    std::vector<std::size_t> counts(probabilities.size());
    std::vector<double> remainder(probabilities.size());
    std::size_t assigned = 0;
    for (std::size_t a = 0; a < probabilities.size(); ++a) {
        const double exact = std::max(0.0, probabilities[a]) * n;
        counts[a] = static_cast<std::size_t>(std::floor(exact));
        remainder[a] = exact - static_cast<double>(counts[a]);
        assigned += counts[a];
    }
    std::vector<std::size_t> order(probabilities.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
    for (std::size_t k = 0; assigned < particles && k < order.size(); ++k, ++assigned) ++counts[order[k]];
    // Only reachable through rounding of an initial sum slightly above 1.
    for (std::size_t k = order.size(); assigned > particles && k-- > 0;) {
        if (counts[order[k]] > 0) {
            --counts[order[k]];
            --assigned;
        }
    }
    return counts;
}

namespace {

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Move {
    double cumulative = 0.0;
    std::size_t destination = 0;
};

StochasticResult particle_run(const FlowSystem& system, const std::vector<InitialComponent>& initial,
                              const StochasticConfig& config, const std::vector<Operator>& observables) {
    config.validate();
    StochasticResult result;
    Trajectory& traj = result.trajectory;
    EnsembleRegistry reg = build_closure(initial, system, config.state_cap, config.match_tol);
    const std::size_t n_states = reg.size();
    const std::size_t n_channels = system.channels.size();
    const std::size_t n_particles = config.particles;
    const double inv_n = 1.0 / static_cast<double>(n_particles);

    std::vector<std::size_t> counts = initial_occupancy(reg.probabilities, n_particles);
    std::vector<std::size_t> where;
    where.reserve(n_particles);
    for (std::size_t a = 0; a < n_states; ++a) where.insert(where.end(), counts[a], a);

    auto fractions = [&] {
        for (std::size_t a = 0; a < n_states; ++a) reg.probabilities[a] = static_cast<double>(counts[a]) * inv_n;
    };
    fractions();

    FlowEngine engine(system);
    StateStepper stepper(system, config.state_method, config.renormalize_each_step);
    TrajectoryRecorder recorder(system, observables, config.match_tol, traj, false);
    auto weights_now = [&] { return engine.weights(); };

    engine.resolve(0.0);
    recorder.record(0.0, reg, weights_now());

    RateTable rates(n_states, n_channels);
    std::vector<double> gammas(n_channels);
    StateVector dpsi(static_cast<Eigen::Index>(system.dim));
    // moves[a * n_channels + c]: cumulative jump probabilities for a particle in a, channel c.
    std::vector<std::vector<Move>> moves(n_states * n_channels);
    std::vector<std::size_t> next_counts(n_states);

    const auto n_steps = static_cast<std::size_t>(std::llround(config.t_max / config.dt));
    traj.steps = n_steps;
    std::mt19937_64 rng(config.seed);

    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * config.dt;
        engine.resolve(t);
        for (std::size_t a = 0; a < n_states; ++a) {
            engine.derivative(reg.states[a].psi, reg.states[a].block, dpsi, gammas.data());
            for (std::size_t c = 0; c < n_channels; ++c) rates(a, c) = gammas[c];
        }
        for (auto& m : moves) m.clear();
        for (const auto& e : reg.transitions) {
            if (e.source == e.target) continue;
            const double gamma = rates(e.source, e.channel);
            if (engine.weights()[e.channel] >= 0.0) {
                auto& list = moves[e.source * n_channels + e.channel];
                const double prev = list.empty() ? 0.0 : list.back().cumulative;
                list.push_back({prev + config.dt * gamma, e.target});
            } else if (counts[e.target] > 0) {
                auto& list = moves[e.target * n_channels + e.channel];
                const double ratio =
                    static_cast<double>(counts[e.source]) / static_cast<double>(counts[e.target]);
                const double prev = list.empty() ? 0.0 : list.back().cumulative;
                list.push_back({prev + config.dt * ratio * std::abs(gamma), e.source});
            }
        }
        for (const auto& list : moves) {
            if (!list.empty() && list.back().cumulative > 1.0) {
                throw NumericError("jump probability " + std::to_string(list.back().cumulative) +
                                   " exceeds 1 at t = " + std::to_string(t) + "; reduce dt");
            }
        }

        next_counts = counts;
        for (std::size_t i = 0; i < n_particles; ++i) {
            const std::size_t a = where[i];
            bool jumped = false;
            for (std::size_t c = 0; c < n_channels; ++c) {
                const double u = uniform01(rng);
                if (jumped) continue;
                for (const auto& mv : moves[a * n_channels + c]) {
                    if (u < mv.cumulative) {
                        where[i] = mv.destination;
                        --next_counts[a];
                        ++next_counts[mv.destination];
                        jumped = true;
                        break;
                    }
                }
            }
        }
        counts.swap(next_counts);

        stepper.step(reg.states, t, config.dt);
        fractions();

        if ((k + 1) % config.record_stride == 0 || k + 1 == n_steps) {
            const double t_next = static_cast<double>(k + 1) * config.dt;
            engine.resolve(t_next);
            recorder.record(t_next, reg, weights_now());
        }
    }
    result.final_ensemble = ParticleEnsemble{n_particles, counts, config.seed};
    traj.final_registry = std::move(reg);
    return result;
}

}  // namespace

StochasticResult nmqj_run(const TimeLocalModel& model, const std::vector<InitialComponent>& initial,
                          const StochasticConfig& config, const std::vector<Operator>& observables) {
    return particle_run(flow_system(model), initial, config, observables);
}

StochasticResult mc_unravel_run(const GeneralizedModel& model, const std::vector<InitialComponent>& initial,
                                const StochasticConfig& config, const std::vector<Operator>& observables) {
    return particle_run(flow_system(model), initial, config, observables);
}

}  // namespace nmflow
