#include "nmflow/ensemble.hpp"

#include "nmflow/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace nmflow {

namespace {

double phase_free_distance(const StateVector& a, const StateVector& b) {
    return std::abs(1.0 - std::abs(a.dot(b)));
}

}  // namespace

double EnsembleRegistry::probability_sum() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s;
}

std::optional<std::size_t> match_state(const StateVector& candidate, const EnsembleRegistry& registry,
                                       std::size_t block, double tol) {
    std::optional<std::size_t> found;
    for (std::size_t k = 0; k < registry.states.size(); ++k) {
        const auto& s = registry.states[k];
        if (s.block != block || s.psi.size() != candidate.size()) continue;
        if (phase_free_distance(s.psi, candidate) <= tol) {
            if (found) {
                throw std::logic_error("match_state: states " + std::to_string(*found) + " and " +
                                       std::to_string(k) + " both match the candidate");
            }
            found = k;
        }
    }
    return found;
}

EnsembleRegistry build_closure(const std::vector<InitialComponent>& initial, const FlowSystem& system,
                               std::size_t cap, double tol) {
    if (initial.empty()) throw ValidationError("build_closure: empty initial decomposition");
    EnsembleRegistry reg;
    double total = 0.0;
    for (const auto& c : initial) {
        if (c.block >= system.blocks()) throw ValidationError("build_closure: initial block out of range");
        if (static_cast<std::size_t>(c.psi.size()) != system.dim) {
            throw ValidationError("build_closure: initial state has wrong dimension");
        }
        if (std::abs(c.psi.norm() - 1.0) > 1e-10) {
            throw ValidationError("build_closure: initial state is not normalized");
        }
        if (c.probability < 0.0) throw ValidationError("build_closure: negative initial probability");
        total += c.probability;
        if (auto k = match_state(c.psi, reg, c.block, tol)) {
            reg.probabilities[*k] += c.probability;
        } else {
            reg.states.push_back(EnsembleState{c.block, c.psi});
            reg.probabilities.push_back(c.probability);
        }
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw ValidationError("build_closure: initial probabilities sum to " + std::to_string(total));
    }
    if (reg.size() > cap) throw NumericError("build_closure: initial decomposition exceeds state cap");

    for (std::size_t s = 0; s < reg.size(); ++s) {
        for (std::size_t c = 0; c < system.channels.size(); ++c) {
            const auto& ch = system.channels[c];
            if (ch.source_block != reg.states[s].block) continue;
            auto image = normalize(nmflow::apply(ch.direction, reg.states[s].psi));
            if (!image) continue;
            auto target = match_state(image->state, reg, ch.target_block, tol);
            if (!target) {
                if (reg.size() >= cap) {
                    throw NumericError("build_closure: more than " + std::to_string(cap) +
                                       " effective states; the channel set does not close at this cap");
                }
                reg.states.push_back(EnsembleState{ch.target_block, std::move(image->state)});
                reg.probabilities.push_back(0.0);
                target = reg.size() - 1;
            }
            reg.transitions.push_back(TransitionEdge{s, c, *target});
        }
    }
    return reg;
}

AssembledDensity assemble_density(const EnsembleRegistry& registry, std::size_t blocks, std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    AssembledDensity out;
    out.blocks.assign(blocks, DensityMatrix::Zero(d, d));
    for (std::size_t k = 0; k < registry.size(); ++k) {
        const auto& s = registry.states[k];
        out.blocks.at(s.block).noalias() += registry.probabilities[k] * (s.psi * s.psi.adjoint());
    }
    out.total = DensityMatrix::Zero(d, d);
    for (const auto& b : out.blocks) out.total += b;
    return out;
}

double max_edge_mismatch(const EnsembleRegistry& registry, const FlowSystem& system) {
    double worst = 0.0;
    for (const auto& e : registry.transitions) {
        auto image = normalize(system.channels[e.channel].direction * registry.states[e.source].psi);
        if (!image) continue;
        worst = std::max(worst, phase_free_distance(registry.states[e.target].psi, image->state));
    }
    return worst;
}

std::vector<std::pair<std::size_t, std::size_t>> coincident_states(const EnsembleRegistry& registry,
                                                                   double tol) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < registry.size(); ++a) {
        for (std::size_t b = a + 1; b < registry.size(); ++b) {
            if (registry.states[a].block != registry.states[b].block) continue;
            if (phase_free_distance(registry.states[a].psi, registry.states[b].psi) <= tol) {
                out.emplace_back(a, b);
            }
        }
    }
    return out;
}

}  // namespace nmflow
