// stochastic.hpp: particle-ensemble baselines: non-Markovian quantum jumps
// (NMQJ) for time-local models and the Monte Carlo unraveling of the
// generalized block equation.

#pragma once

#include "nmflow/detsolver.hpp"
#include "nmflow/ensemble.hpp"
#include "nmflow/models.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nmflow {

// Name of the generator behind every stochastic run; goes into run metadata.
inline constexpr const char* kRngName = "std::mt19937_64";

struct StochasticConfig {
    std::size_t particles = 10000;
    std::uint64_t seed = 1;
    double dt = 0.005;
    double t_max = 5.0;
    std::size_t record_stride = 1;
    Method state_method = Method::euler;
    bool renormalize_each_step = true;
    double match_tol = kDefaultMatchTol;
    std::size_t state_cap = kDefaultStateCap;

    void validate() const;
};

struct ParticleEnsemble {
    std::size_t particles = 0;
    std::vector<std::size_t> occupancy;  // particles per registry state
    std::uint64_t seed = 0;
};

struct StochasticResult {
    Trajectory trajectory;  // probabilities hold occupancy fractions n_a / N
    ParticleEnsemble final_ensemble;
    std::string rng = kRngName;
};

// Initial occupancy round(N p_a), fixed up by largest remainder so the counts sum to N.
std::vector<std::size_t> initial_occupancy(const std::vector<double>& probabilities, std::size_t particles);

// Positive rates: a particle in a jumps along (a, j) with probability dt Gamma_a^j.
// Negative rates: a particle in target a' of edge (a, j) -> a' returns to a
// with probability dt (n_a / n_a') |Gamma_a^j|, zero when n_a' = 0.
StochasticResult nmqj_run(const TimeLocalModel& model, const std::vector<InitialComponent>& initial,
                          const StochasticConfig& config, const std::vector<Operator>& observables = {});

// Particles carry (block, state); coupling R^{ij} moves a particle from block j
// to the block-i image of its state with probability dt ||R psi||^2.
StochasticResult mc_unravel_run(const GeneralizedModel& model, const std::vector<InitialComponent>& initial,
                                const StochasticConfig& config, const std::vector<Operator>& observables = {});

}  // namespace nmflow
