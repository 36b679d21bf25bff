#include "nmflow/detsolver.hpp"

#include "nmflow/errors.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <utility>

namespace nmflow {

std::string to_string(Method m) { return m == Method::euler ? "euler" : "rk4"; }

Method parse_method(const std::string& name) {
    if (name == "euler") return Method::euler;
    if (name == "rk4") return Method::rk4;
    throw ValidationError("unknown integration method '" + name + "' (expected euler or rk4)");
}

std::size_t SolverConfig::steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

void SolverConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("solver: dt must be > 0");
    if (!(t_max >= dt) || !std::isfinite(t_max)) throw ValidationError("solver: t_max must be >= dt");
    if (record_stride == 0) throw ValidationError("solver: record_stride must be >= 1");
    if (!(match_tol > 0.0)) throw ValidationError("solver: match tolerance must be > 0");
    if (state_cap == 0) throw ValidationError("solver: state cap must be >= 1");
}

// ---------------------------------------------------------------------------

FlowEngine::FlowEngine(const FlowSystem& system)
    : system_(&system), weights_(system.channels.size(), 0.0), outgoing_(system.blocks()) {
    const auto d = static_cast<Eigen::Index>(system.dim);
    effective_.assign(system.blocks(), Operator::Zero(d, d));
    scratch_ = StateVector::Zero(d);
    for (std::size_t c = 0; c < system.channels.size(); ++c) {
        outgoing_.at(system.channels[c].source_block).push_back(c);
    }
}

void FlowEngine::resolve(double t) {
    t_ = t;
    const auto& sys = *system_;
    for (std::size_t c = 0; c < sys.channels.size(); ++c) weights_[c] = sys.channels[c].weight(t);
    for (std::size_t b = 0; b < sys.blocks(); ++b) {
        const auto& h = sys.hamiltonians[b];
        Operator& k = effective_[b];
        k = h.constant;
        for (const auto& term : h.modulated) {
            k += (term.coefficient ? term.coefficient(t) : 1.0) * term.matrix;
        }
        for (std::size_t c : outgoing_[b]) k -= Complex(0.0, 0.5 * weights_[c]) * sys.channels[c].gram;
    }
}

void FlowEngine::derivative(const StateVector& psi, std::size_t block, StateVector& dpsi, double* gammas) {
    const auto& sys = *system_;
    for (std::size_t c = 0; c < sys.channels.size(); ++c) gammas[c] = 0.0;
    double compensation = 0.0;
    for (std::size_t c : outgoing_[block]) {
        scratch_.noalias() = sys.channels[c].direction * psi;
        const double g = weights_[c] * scratch_.squaredNorm();
        gammas[c] = g;
        compensation += g;
    }
    dpsi.noalias() = effective_[block] * psi;
    dpsi *= Complex(0.0, -1.0);
    dpsi += (0.5 * compensation) * psi;
}

// ---------------------------------------------------------------------------

StateStepper::StateStepper(const FlowSystem& system, Method method, bool renormalize)
    : engine_(system), method_(method), renormalize_(renormalize),
      gamma_scratch_(system.channels.size(), 0.0) {}

double StateStepper::step(std::vector<EnsembleState>& states, double t, double dt) {
    const std::size_t n = states.size();
    const auto d = static_cast<Eigen::Index>(engine_.system().dim);
    if (k1_.size() != n) {
        k1_.assign(n, StateVector::Zero(d));
        k2_ = k3_ = k4_ = stage_ = k1_;
    }
    double* g = gamma_scratch_.data();
    if (method_ == Method::euler) {
        engine_.resolve(t);
        for (std::size_t a = 0; a < n; ++a) engine_.derivative(states[a].psi, states[a].block, k1_[a], g);
        for (std::size_t a = 0; a < n; ++a) states[a].psi += dt * k1_[a];
    } else {
        engine_.resolve(t);
        for (std::size_t a = 0; a < n; ++a) engine_.derivative(states[a].psi, states[a].block, k1_[a], g);
        engine_.resolve(t + 0.5 * dt);
        for (std::size_t a = 0; a < n; ++a) {
            stage_[a] = states[a].psi + (0.5 * dt) * k1_[a];
            engine_.derivative(stage_[a], states[a].block, k2_[a], g);
        }
        for (std::size_t a = 0; a < n; ++a) {
            stage_[a] = states[a].psi + (0.5 * dt) * k2_[a];
            engine_.derivative(stage_[a], states[a].block, k3_[a], g);
        }
        engine_.resolve(t + dt);
        for (std::size_t a = 0; a < n; ++a) {
            stage_[a] = states[a].psi + dt * k3_[a];
            engine_.derivative(stage_[a], states[a].block, k4_[a], g);
        }
        for (std::size_t a = 0; a < n; ++a) {
            states[a].psi += (dt / 6.0) * (k1_[a] + 2.0 * k2_[a] + 2.0 * k3_[a] + k4_[a]);
        }
    }
    double drift = 0.0;
    for (auto& s : states) {
        const double norm = s.psi.norm();
        drift = std::max(drift, std::abs(norm - 1.0));
        if (renormalize_) s.psi /= norm;
    }
    if (!renormalize_ && drift > kNormDriftLimit) {
        throw NumericError("state norm drifted by " + std::to_string(drift) + " in one step at t = " +
                           std::to_string(t) + "; reduce dt or enable renormalization");
    }
    return drift;
}

// ---------------------------------------------------------------------------

namespace {

// out = probs moved along every edge for a time dt. Fixed ascending edge order.
void apply_flow(const std::vector<double>& probs, const RateTable& rates,
                const std::vector<TransitionEdge>& edges, double dt, std::vector<double>& out) {
    out = probs;
    for (const auto& e : edges) {
        const double flow = dt * rates(e.source, e.channel) * probs[e.source];
        out[e.source] -= flow;
        out[e.target] += flow;
    }
}

// t < 0: time unknown to the caller.
void check_probabilities(const std::vector<double>& probs, double t) {
    for (std::size_t a = 0; a < probs.size(); ++a) {
        if (probs[a] < -kNegativeProbabilityTol) {
            std::ostringstream msg;
            msg << "probability of state " << a << " became " << probs[a];
            if (t >= 0.0) msg << " at t = " << t;
            msg << "; the step is too large for the current rates, reduce dt";
            throw NumericError(msg.str());
        }
    }
}

double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

StateVector drift_generator(const StateVector& psi, std::size_t block, const FlowSystem& system, double t) {
    if (static_cast<std::size_t>(psi.size()) != system.dim) {
        throw ValidationError("drift_generator: state dimension mismatch");
    }
    if (block >= system.blocks()) throw ValidationError("drift_generator: block out of range");
    FlowEngine engine(system);
    engine.resolve(t);
    StateVector dpsi(psi.size());
    std::vector<double> gammas(system.channels.size());
    engine.derivative(psi, block, dpsi, gammas.data());
    return dpsi;
}

RateTable compute_rates(const EnsembleRegistry& registry, const FlowSystem& system, double t) {
    FlowEngine engine(system);
    engine.resolve(t);
    RateTable table(registry.size(), system.channels.size());
    StateVector dpsi(static_cast<Eigen::Index>(system.dim));
    std::vector<double> gammas(system.channels.size());
    for (std::size_t a = 0; a < registry.size(); ++a) {
        engine.derivative(registry.states[a].psi, registry.states[a].block, dpsi, gammas.data());
        for (std::size_t c = 0; c < gammas.size(); ++c) table(a, c) = gammas[c];
    }
    return table;
}

std::vector<double> step_probabilities(const std::vector<double>& probs, const RateTable& rates,
                                       const std::vector<TransitionEdge>& transitions, double dt) {
    if (rates.states() != probs.size()) {
        throw ValidationError("step_probabilities: rate table does not match the probability vector");
    }
    std::vector<double> out;
    apply_flow(probs, rates, transitions, dt, out);
    check_probabilities(out, -1.0);
    return out;
}

double step_states(EnsembleRegistry& registry, const FlowSystem& system, double t, const SolverConfig& config) {
    StateStepper stepper(system, config.method, config.renormalize_each_step);
    return stepper.step(registry.states, t, config.dt);
}

// ---------------------------------------------------------------------------

TrajectoryRecorder::TrajectoryRecorder(const FlowSystem& system, const std::vector<Operator>& observables,
                                       double match_tol, Trajectory& out, bool check_edges)
    : system_(system), observables_(observables), match_tol_(match_tol), out_(out),
      check_edges_(check_edges) {}

void TrajectoryRecorder::record(double t, const EnsembleRegistry& reg, const std::vector<double>& weights) {
    out_.times.push_back(t);
    out_.probabilities.push_back(reg.probabilities);
    auto rho = assemble_density(reg, system_.blocks(), system_.dim);
    std::vector<double> traces;
    traces.reserve(rho.blocks.size());
    for (const auto& b : rho.blocks) traces.push_back(b.trace().real());
    out_.block_traces.push_back(std::move(traces));
    std::vector<Complex> obs;
    obs.reserve(observables_.size());
    for (const auto& o : observables_) obs.push_back((rho.total * o).trace());
    out_.observables.push_back(std::move(obs));
    out_.density.push_back(std::move(rho.total));
    out_.channel_weights.push_back(weights);

    if (!check_edges_) return;
    const double mismatch = max_edge_mismatch(reg, system_);
    out_.max_edge_mismatch = std::max(out_.max_edge_mismatch, mismatch);
    if (mismatch > 10.0 * match_tol_ && !edge_warned_) {
        edge_warned_ = true;
        out_.warnings.push_back("transition edge no longer maps onto its target state at t = " +
                                std::to_string(t) + " (mismatch " + std::to_string(mismatch) + ")");
    }
    for (const auto& [a, b] : coincident_states(reg, match_tol_)) {
        if (coincident_.insert({a, b}).second) {
            out_.warnings.push_back("states " + std::to_string(a) + " and " + std::to_string(b) +
                                    " coincide at t = " + std::to_string(t) + " (not merged)");
        }
    }
}

namespace {

std::vector<double> weights_at(const FlowSystem& system, double t) {
    std::vector<double> w(system.channels.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = system.channels[c].weight(t);
    return w;
}

}  // namespace

Trajectory run(const FlowSystem& system, const std::vector<InitialComponent>& initial,
               const SolverConfig& config, const std::vector<Operator>& observables) {
    config.validate();
    for (const auto& o : observables) {
        if (static_cast<std::size_t>(o.rows()) != system.dim || o.rows() != o.cols()) {
            throw ValidationError("run: observable dimension mismatch");
        }
    }
    Trajectory traj;
    EnsembleRegistry reg = build_closure(initial, system, config.state_cap, config.match_tol);
    const std::size_t n_states = reg.size();
    const std::size_t n_channels = system.channels.size();
    const auto d = static_cast<Eigen::Index>(system.dim);
    const double dt = config.dt;
    const std::size_t n_steps = config.steps();
    traj.steps = n_steps;

    TrajectoryRecorder recorder(system, observables, config.match_tol, traj);
    recorder.record(0.0, reg, weights_at(system, 0.0));

    FlowEngine engine(system);
    RateTable rates(n_states, n_channels);
    std::vector<double> next(n_states), gammas(n_channels);
    std::vector<StateVector> k1(n_states, StateVector::Zero(d)), k2 = k1, k3 = k1, k4 = k1, stage = k1;
    std::vector<double> p_stage(n_states), dp1(n_states), dp2(n_states), dp3(n_states), dp4(n_states);

    auto flow_derivative = [&](const std::vector<double>& p, std::vector<double>& dp) {
        std::fill(dp.begin(), dp.end(), 0.0);
        for (const auto& e : reg.transitions) {
            const double f = rates(e.source, e.channel) * p[e.source];
            dp[e.source] -= f;
            dp[e.target] += f;
        }
    };
    auto evaluate = [&](const std::vector<StateVector>& psi, std::vector<StateVector>& dpsi) {
        for (std::size_t a = 0; a < n_states; ++a) {
            engine.derivative(psi[a], reg.states[a].block, dpsi[a], gammas.data());
            for (std::size_t c = 0; c < n_channels; ++c) rates(a, c) = gammas[c];
        }
    };
    std::vector<StateVector> psi(n_states);
    for (std::size_t a = 0; a < n_states; ++a) psi[a] = reg.states[a].psi;

    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (config.method == Method::euler) {
            engine.resolve(t);
            evaluate(psi, k1);
            apply_flow(reg.probabilities, rates, reg.transitions, dt, next);
            std::swap(reg.probabilities, next);
            for (std::size_t a = 0; a < n_states; ++a) psi[a] += dt * k1[a];
        } else {
            const auto& p = reg.probabilities;
            engine.resolve(t);
            evaluate(psi, k1);
            flow_derivative(p, dp1);
            engine.resolve(t + 0.5 * dt);
            for (std::size_t a = 0; a < n_states; ++a) {
                stage[a] = psi[a] + (0.5 * dt) * k1[a];
                p_stage[a] = p[a] + 0.5 * dt * dp1[a];
            }
            evaluate(stage, k2);
            flow_derivative(p_stage, dp2);
            for (std::size_t a = 0; a < n_states; ++a) {
                stage[a] = psi[a] + (0.5 * dt) * k2[a];
                p_stage[a] = p[a] + 0.5 * dt * dp2[a];
            }
            evaluate(stage, k3);
            flow_derivative(p_stage, dp3);
            engine.resolve(t + dt);
            for (std::size_t a = 0; a < n_states; ++a) {
                stage[a] = psi[a] + dt * k3[a];
                p_stage[a] = p[a] + dt * dp3[a];
            }
            evaluate(stage, k4);
            flow_derivative(p_stage, dp4);
            for (std::size_t a = 0; a < n_states; ++a) {
                psi[a] += (dt / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                next[a] = p[a] + (dt / 6.0) * (dp1[a] + 2.0 * dp2[a] + 2.0 * dp3[a] + dp4[a]);
            }
            std::swap(reg.probabilities, next);
        }
        const double t_next = static_cast<double>(k + 1) * dt;
        check_probabilities(reg.probabilities, t_next);
        traj.max_probability_drift =
            std::max(traj.max_probability_drift, std::abs(sum_of(reg.probabilities) - 1.0));

        double drift = 0.0;
        for (auto& v : psi) {
            const double norm = v.norm();
            drift = std::max(drift, std::abs(norm - 1.0));
            if (config.renormalize_each_step) v /= norm;
        }
        traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
        if (!config.renormalize_each_step && drift > kNormDriftLimit) {
            throw NumericError("state norm drifted by " + std::to_string(drift) + " at t = " +
                               std::to_string(t_next) + "; reduce dt or enable renormalization");
        }

        if ((k + 1) % config.record_stride == 0 || k + 1 == n_steps) {
            for (std::size_t a = 0; a < n_states; ++a) reg.states[a].psi = psi[a];
            recorder.record(t_next, reg, weights_at(system, t_next));
        }
    }
    for (std::size_t a = 0; a < n_states; ++a) reg.states[a].psi = psi[a];
    traj.final_registry = std::move(reg);
    return traj;
}

Trajectory run(const Model& model, const std::vector<InitialComponent>& initial, const SolverConfig& config,
               const std::vector<Operator>& observables) {
    return run(flow_system(model), initial, config, observables);
}

}  // namespace nmflow
