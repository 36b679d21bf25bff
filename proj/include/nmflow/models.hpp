// models.hpp: time-local and generalized (block) master-equation models,
// plus the detuned Jaynes-Cummings and two-band example models.

#pragma once

#include "nmflow/qcore.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace nmflow {

using ScalarFunction = std::function<double(double)>;

// c(t) * matrix; an empty coefficient means c = 1.
struct OperatorTerm {
    Operator matrix;
    ScalarFunction coefficient;
};

// H(t) = constant + sum_k c_k(t) H_k
struct Hamiltonian {
    Operator constant;
    std::vector<OperatorTerm> modulated;

    static Hamiltonian zero(std::size_t dim);
    std::size_t dim() const noexcept { return static_cast<std::size_t>(constant.rows()); }
    Operator at(double t) const;
};

// Jump operator C_j with a signed rate gamma_j(t).
struct JumpChannel {
    Operator op;
    ScalarFunction rate;
    std::string label;
};

// d rho/dt = -i[H, rho] + sum_j gamma_j(t) (C_j rho C_j^+ - 1/2 {C_j^+ C_j, rho})
struct TimeLocalModel {
    Hamiltonian hamiltonian;
    std::vector<JumpChannel> channels;

    std::size_t dim() const noexcept { return hamiltonian.dim(); }
    void validate() const;
};

// R^{ij}(t) = magnitude(t) * direction, mapping block `source` (j) into block `target` (i).
// The direction is fixed; only the scalar magnitude may depend on time.
struct BlockCoupling {
    std::size_t source = 0;
    std::size_t target = 0;
    Operator direction;
    ScalarFunction magnitude;
    std::string label;

    Operator at(double t) const;
};

// d rho_i/dt = -i[H_i, rho_i] + sum_{j,l} (R_l^{ij} rho_j R_l^{ij}+ - 1/2 {R_l^{ji}+ R_l^{ji}, rho_i})
struct GeneralizedModel {
    std::vector<Hamiltonian> block_hamiltonians;
    std::vector<BlockCoupling> couplings;

    std::size_t blocks() const noexcept { return block_hamiltonians.size(); }
    std::size_t dim() const noexcept {
        return block_hamiltonians.empty() ? 0 : block_hamiltonians.front().dim();
    }
    void validate() const;
};

using Model = std::variant<TimeLocalModel, GeneralizedModel>;

std::size_t model_dim(const Model& m);
std::size_t model_blocks(const Model& m);

// n = 1 recast of a standard model: R = sqrt(gamma(t)) C. Evaluating the
// magnitude where gamma(t) < 0 throws NumericError.
GeneralizedModel as_generalized(const TimeLocalModel& m);

// ---------------------------------------------------------------------------
// Unified channel view consumed by the ensemble and the deterministic solver.
// Gamma = weight(t) * ||direction psi||^2 for both model kinds: weight is the
// signed rate for standard models and magnitude(t)^2 for block couplings.

struct FlowChannel {
    std::size_t source_block = 0;
    std::size_t target_block = 0;
    Operator direction;
    Operator gram;  // direction^+ direction
    ScalarFunction weight;
    std::string label;
};

struct FlowSystem {
    std::size_t dim = 0;
    std::vector<Hamiltonian> hamiltonians;  // one per block
    std::vector<FlowChannel> channels;
    bool signed_weights = false;

    std::size_t blocks() const noexcept { return hamiltonians.size(); }
};

FlowSystem flow_system(const TimeLocalModel& m);
FlowSystem flow_system(const GeneralizedModel& m);
FlowSystem flow_system(const Model& m);

// ---------------------------------------------------------------------------
// Detuned Jaynes-Cummings model with a Lorentzian cavity (second-order TCL).

struct JCParams {
    double gamma0 = 4.0;
    double lambda = 1.0;
    double delta = 12.0;

    void validate() const;
};

// gamma(t) = g0 l^2/(l^2+D^2) {1 - e^{-l t}[cos(D t) - (D/l) sin(D t)]}; may be negative.
double jc_decay_rate(double t, const JCParams& p);
// S(t) = g0 l D/(l^2+D^2) {1 - e^{-l t}[cos(D t) + (l/D) sin(D t)]}; 0 on resonance.
double jc_lamb_shift(double t, const JCParams& p);
// Exact integrals from 0 to t of the two rates above.
double jc_decay_rate_integral(double t, const JCParams& p);
double jc_lamb_shift_integral(double t, const JCParams& p);
// J as a function of the offset x = w0 - D - w: g0 l^2 / (2 pi (x^2 + l^2)).
double jc_spectral_density(double omega_offset, const JCParams& p);

// H = S(t)/2 sigma+ sigma-, one channel sigma- with rate gamma(t).
TimeLocalModel make_jc_model(const JCParams& p);

// ---------------------------------------------------------------------------
// Two-state system coupled to two finite energy bands.

struct TwoBandParams {
    double delta_eps = 0.31;
    double gamma1 = 1.0;
    double gamma2 = 1.0;

    void validate() const;
};

// h(t) = de sin^2(de t/2) / (2 pi (de t/2)^2), h(0) = de/(2 pi).
double two_band_kernel(double t, const TwoBandParams& p);

// F(t) = int_0^t h, tabulated once by the trapezoid rule on a uniform grid.
// Between grid nodes the last partial trapezoid is used.
class KernelIntegral {
public:
    KernelIntegral(const TwoBandParams& p, double grid_dt, double t_max);

    double operator()(double t) const;
    const SampledFunction& table() const noexcept { return cumulative_; }

private:
    TwoBandParams params_;
    SampledFunction kernel_;
    SampledFunction cumulative_;
};

// Blocks 0 and 1 stand for rho_1 and rho_2. Couplings:
//   R^{12} = sqrt(2 g1 F(t)) sigma+  (block 1 -> block 0)
//   R^{21} = sqrt(2 g2 F(t)) sigma-  (block 0 -> block 1)
GeneralizedModel make_two_band_model(const TwoBandParams& p, double grid_dt, double t_max);

}  // namespace nmflow
