// qcore.hpp: dense complex state/operator primitives and grid quadrature.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

namespace nmflow {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using Operator = Eigen::MatrixXcd;
using DensityMatrix = Eigen::MatrixXcd;

inline constexpr double kZeroNormThreshold = 1e-14;

// Two-level conventions used throughout: index 0 = |e>, index 1 = |g>.
namespace two_level {
inline constexpr std::size_t kExcited = 0;
inline constexpr std::size_t kGround = 1;
StateVector excited();
StateVector ground();
Operator sigma_minus();  // |g><e|
Operator sigma_plus();   // |e><g|
}  // namespace two_level

// op * s. Throws ValidationError on dimension mismatch.
// Call as nmflow::apply: unqualified calls also find std::apply through ADL.
StateVector apply(const Operator& op, const StateVector& s);

struct Normalized {
    StateVector state;
    double norm = 0.0;
};

// Returns nullopt when ||s|| < kZeroNormThreshold: the jump channel annihilated
// the state and callers treat it as closed.
std::optional<Normalized> normalize(const StateVector& s);

bool is_hermitian(const Operator& m, double tol);

// Outer product |s><s|.
DensityMatrix projector(const StateVector& s);

// Samples on a uniform time grid.
struct SampledFunction {
    std::vector<double> times;
    std::vector<double> values;

    double step() const;
    std::size_t size() const noexcept { return times.size(); }
};

// Samples f on {0, dt, 2dt, ...} up to and including t_max (within dt/2).
template <class F>
SampledFunction sample_uniform(F&& f, double dt, double t_max) {
    SampledFunction out;
    const auto n = static_cast<std::size_t>(t_max / dt + 0.5);
    out.times.reserve(n + 1);
    out.values.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        out.times.push_back(t);
        out.values.push_back(f(t));
    }
    return out;
}

// Running trapezoid integral on the same grid, first value 0.
// Throws ValidationError for < 2 samples or a non-uniform grid.
SampledFunction trapezoid_cumulative(const SampledFunction& f);

}  // namespace nmflow
