// ensemble.hpp: the effective pure-state ensemble: registered states, their
// probabilities, and the jump transition map between them.

#pragma once

#include "nmflow/models.hpp"
#include "nmflow/qcore.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace nmflow {

inline constexpr double kDefaultMatchTol = 1e-8;
inline constexpr std::size_t kDefaultStateCap = 64;

struct EnsembleState {
    std::size_t block = 0;
    StateVector psi;
};

// (source, channel) -> target: channel maps states[source] onto the ray of states[target].
struct TransitionEdge {
    std::size_t source = 0;
    std::size_t channel = 0;
    std::size_t target = 0;
};

struct EnsembleRegistry {
    std::vector<EnsembleState> states;
    std::vector<double> probabilities;
    std::vector<TransitionEdge> transitions;

    std::size_t size() const noexcept { return states.size(); }
    double probability_sum() const;
};

struct InitialComponent {
    std::size_t block = 0;
    StateVector psi;
    double probability = 0.0;
};

// Index of the state in `block` equal to `candidate` up to a global phase,
// i.e. |1 - |<psi_k|candidate>|| <= tol. Throws std::logic_error if two
// registered states match (corrupt registry).
std::optional<std::size_t> match_state(const StateVector& candidate, const EnsembleRegistry& registry,
                                       std::size_t block, double tol = kDefaultMatchTol);

// Closes the initial decomposition under every channel direction. New targets
// enter with probability 0. Throws ValidationError on bad input and
// NumericError if more than `cap` states are needed.
EnsembleRegistry build_closure(const std::vector<InitialComponent>& initial, const FlowSystem& system,
                               std::size_t cap = kDefaultStateCap, double tol = kDefaultMatchTol);

struct AssembledDensity {
    std::vector<DensityMatrix> blocks;
    DensityMatrix total;
};

AssembledDensity assemble_density(const EnsembleRegistry& registry, std::size_t blocks, std::size_t dim);

// Largest |1 - |<target|normalize(C source)>|| over edges whose image is not annihilated.
double max_edge_mismatch(const EnsembleRegistry& registry, const FlowSystem& system);

// Pairs (a, b), a < b, of same-block states that coincide up to phase.
std::vector<std::pair<std::size_t, std::size_t>> coincident_states(const EnsembleRegistry& registry,
                                                                   double tol = kDefaultMatchTol);

}  // namespace nmflow
