#include "nmflow/qcore.hpp"

#include "nmflow/errors.hpp"

#include <cmath>
#include <string>

namespace nmflow {

namespace two_level {

StateVector excited() {
    StateVector s = StateVector::Zero(2);
    s(kExcited) = 1.0;
    return s;
}

StateVector ground() {
    StateVector s = StateVector::Zero(2);
    s(kGround) = 1.0;
    return s;
}

Operator sigma_minus() {
    Operator m = Operator::Zero(2, 2);
    m(kGround, kExcited) = 1.0;
    return m;
}

Operator sigma_plus() {
    Operator m = Operator::Zero(2, 2);
    m(kExcited, kGround) = 1.0;
    return m;
}

}  // namespace two_level

StateVector apply(const Operator& op, const StateVector& s) {
    if (op.cols() != s.size() || op.rows() != op.cols()) {
        throw ValidationError("apply: operator " + std::to_string(op.rows()) + "x" +
                              std::to_string(op.cols()) + " vs state of dimension " +
                              std::to_string(s.size()));
    }
    return op * s;
}

std::optional<Normalized> normalize(const StateVector& s) {
    const double n = s.norm();
    if (!(n >= kZeroNormThreshold)) return std::nullopt;
    return Normalized{s / n, n};
}

bool is_hermitian(const Operator& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

DensityMatrix projector(const StateVector& s) { return s * s.adjoint(); }

double SampledFunction::step() const {
    if (times.size() < 2) return 0.0;
    return times[1] - times[0];
}

SampledFunction trapezoid_cumulative(const SampledFunction& f) {
    if (f.times.size() < 2 || f.values.size() != f.times.size()) {
        throw ValidationError("trapezoid_cumulative: need at least 2 aligned samples");
    }
    const double h = f.step();
    if (!(h > 0.0)) throw ValidationError("trapezoid_cumulative: grid not increasing");
    for (std::size_t k = 1; k < f.times.size(); ++k) {
        const double dk = f.times[k] - f.times[k - 1];
        if (std::abs(dk - h) > 1e-9 * std::max(1.0, std::abs(h))) {
            throw ValidationError("trapezoid_cumulative: non-uniform grid at sample " +
                                  std::to_string(k));
        }
    }
    SampledFunction out;
    out.times = f.times;
    out.values.resize(f.values.size());
    out.values[0] = 0.0;
    for (std::size_t k = 1; k < f.values.size(); ++k) {
        out.values[k] = out.values[k - 1] + 0.5 * h * (f.values[k - 1] + f.values[k]);
    }
    return out;
}

}  // namespace nmflow
