// detsolver.hpp: deterministic probability-flow solver.
//
// Each effective state follows the norm-preserving nonlinear drift
//   d psi/dt = -i K(t) psi + 1/2 sum_c w_c(t) ||M_c psi||^2 psi,
//   K(t) = H_b(t) - i/2 sum_c w_c(t) M_c^+ M_c   (channels leaving block b),
// while probabilities move along the transition edges:
//   dp_a/dt = -sum_c Gamma_a^c p_a + sum_{(a',c) -> a} Gamma_{a'}^c p_{a'},
//   Gamma_a^c = w_c(t) ||M_c psi_a||^2.
// A negative standard-model rate simply reverses the flow along its edges.

#pragma once

#include "nmflow/ensemble.hpp"
#include "nmflow/models.hpp"
#include "nmflow/qcore.hpp"

#include <cstddef>
#include <set>
#include <utility>
#include <string>
#include <vector>

namespace nmflow {

enum class Method { euler, rk4 };

std::string to_string(Method m);
Method parse_method(const std::string& name);  // "euler" | "rk4"

struct SolverConfig {
    double dt = 0.005;
    double t_max = 5.0;
    Method method = Method::euler;
    bool renormalize_each_step = true;
    std::size_t record_stride = 1;
    double match_tol = kDefaultMatchTol;
    std::size_t state_cap = kDefaultStateCap;

    std::size_t steps() const;
    void validate() const;
};

inline constexpr double kNegativeProbabilityTol = 1e-9;
inline constexpr double kNormDriftLimit = 1e-6;

// Gamma per (state, channel); zero where the channel does not leave the state's block.
class RateTable {
public:
    RateTable() = default;
    RateTable(std::size_t states, std::size_t channels)
        : states_(states), channels_(channels), values_(states * channels, 0.0) {}

    double operator()(std::size_t state, std::size_t channel) const {
        return values_[state * channels_ + channel];
    }
    double& operator()(std::size_t state, std::size_t channel) {
        return values_[state * channels_ + channel];
    }
    std::size_t states() const noexcept { return states_; }
    std::size_t channels() const noexcept { return channels_; }

private:
    std::size_t states_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> probabilities;    // [sample][state]
    std::vector<DensityMatrix> density;                // total rho per sample
    std::vector<std::vector<double>> block_traces;     // [sample][block]
    std::vector<std::vector<double>> channel_weights;  // [sample][channel]
    std::vector<std::vector<Complex>> observables;     // [sample][observable]

    EnsembleRegistry final_registry;
    std::size_t steps = 0;
    double max_probability_drift = 0.0;  // max |sum p - 1| over all steps
    double max_norm_drift = 0.0;         // max | ||psi|| - 1 | before renormalization
    double max_edge_mismatch = 0.0;      // over sampled times
    std::vector<std::string> warnings;
};

// Time-resolved generator: caches K_b(t) and w_c(t) so that per-state work is
// a handful of small mat-vecs without allocation.
class FlowEngine {
public:
    explicit FlowEngine(const FlowSystem& system);

    void resolve(double t);
    double time() const noexcept { return t_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    // d psi/dt at the resolved time, plus Gamma for every channel (0 where the
    // channel does not leave `block`). `gammas` must hold channels() entries.
    void derivative(const StateVector& psi, std::size_t block, StateVector& dpsi, double* gammas);

    std::size_t channels() const noexcept { return system_->channels.size(); }
    const FlowSystem& system() const noexcept { return *system_; }

private:
    const FlowSystem* system_;
    double t_ = 0.0;
    std::vector<Operator> effective_;
    std::vector<double> weights_;
    std::vector<std::vector<std::size_t>> outgoing_;
    StateVector scratch_;
};

// Advances a list of states by one Euler or RK4 step with reusable buffers.
class StateStepper {
public:
    StateStepper(const FlowSystem& system, Method method, bool renormalize);

    // Returns the largest | ||psi|| - 1 | before renormalization.
    double step(std::vector<EnsembleState>& states, double t, double dt);

private:
    FlowEngine engine_;
    Method method_;
    bool renormalize_;
    std::vector<double> gamma_scratch_;
    std::vector<StateVector> k1_, k2_, k3_, k4_, stage_;
};

// Appends samples (probabilities, assembled rho, block traces, observables,
// channel weights) to a trajectory. With check_edges it also tracks the edge
// mismatch and warns once about coinciding states.
class TrajectoryRecorder {
public:
    TrajectoryRecorder(const FlowSystem& system, const std::vector<Operator>& observables, double match_tol,
                       Trajectory& out, bool check_edges = true);

    void record(double t, const EnsembleRegistry& reg, const std::vector<double>& weights);

private:
    const FlowSystem& system_;
    const std::vector<Operator>& observables_;
    double match_tol_;
    Trajectory& out_;
    bool check_edges_;
    bool edge_warned_ = false;
    std::set<std::pair<std::size_t, std::size_t>> coincident_;
};

StateVector drift_generator(const StateVector& psi, std::size_t block, const FlowSystem& system, double t);

RateTable compute_rates(const EnsembleRegistry& registry, const FlowSystem& system, double t);

// Explicit flow step; edges are summed in ascending order. Throws NumericError
// if any probability drops below -kNegativeProbabilityTol.
std::vector<double> step_probabilities(const std::vector<double>& probs, const RateTable& rates,
                                       const std::vector<TransitionEdge>& transitions, double dt);

// Advances every state by one step of config.method starting at time t.
// Returns the largest norm deviation seen before renormalization; throws
// NumericError if it exceeds kNormDriftLimit while renormalization is off.
double step_states(EnsembleRegistry& registry, const FlowSystem& system, double t,
                   const SolverConfig& config);

Trajectory run(const FlowSystem& system, const std::vector<InitialComponent>& initial,
               const SolverConfig& config, const std::vector<Operator>& observables = {});
Trajectory run(const Model& model, const std::vector<InitialComponent>& initial,
               const SolverConfig& config, const std::vector<Operator>& observables = {});

}  // namespace nmflow
