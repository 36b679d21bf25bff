// oracle.hpp: ground truth for the ensemble solvers: direct RK4 on the full
// (block) density matrices and closed forms for the two example models.

#pragma once

#include "nmflow/models.hpp"
#include "nmflow/qcore.hpp"

#include <cstddef>
#include <vector>

namespace nmflow::oracle {

inline constexpr double kTraceDriftLimit = 1e-8;

// -i[H, rho] + sum_j gamma_j (C rho C^+ - 1/2 {C^+ C, rho})
DensityMatrix dense_rhs_standard(const DensityMatrix& rho, const TimeLocalModel& model, double t);

// Block right-hand sides, one per block.
std::vector<DensityMatrix> dense_rhs_generalized(const std::vector<DensityMatrix>& blocks,
                                                 const GeneralizedModel& model, double t);

struct DenseTrajectory {
    std::vector<double> times;
    std::vector<std::vector<DensityMatrix>> blocks;  // [sample][block]
    std::vector<DensityMatrix> total;                // [sample]
    double max_trace_drift = 0.0;
};

// Classical fixed-step RK4. `initial` holds one matrix per block (a single
// matrix for standard models). Samples every `record_stride` steps and at the
// end. Throws NumericError when |sum_i tr rho_i - tr rho(0)| exceeds kTraceDriftLimit.
DenseTrajectory dense_integrate(const Model& model, const std::vector<DensityMatrix>& initial, double dt,
                                double t_max, std::size_t record_stride = 1);

struct JCCoherences {
    double rho_ee = 0.0;
    Complex rho_eg;
};

// rho_ee(t) = rho_ee(0) e^{-G(t)}, rho_eg(t) = rho_eg(0) e^{-G(t)/2 - i Sig(t)/2},
// G = int gamma, Sig = int S (evaluated exactly).
JCCoherences jc_closed_form(double t, const JCParams& p, const DensityMatrix& rho0);

// int_0^t F(s) ds with F the exact cumulative kernel, via sine/cosine integrals.
double two_band_kernel_double_integral(double t, const TwoBandParams& p);
// Exact F(t) = int_0^t h via the sine integral.
double two_band_kernel_integral_exact(double t, const TwoBandParams& p);

// Excited population (= tr rho_1) for rho_1(0) = p0 |e><e|, rho_2(0) = (1 - p0)|g><g|:
// p(t) = g1/(g1+g2) + (p0 - g1/(g1+g2)) exp(-2 (g1+g2) int_0^t F).
double two_band_closed_form(double t, const TwoBandParams& p, double p0 = 1.0);

}  // namespace nmflow::oracle
