#include "nmflow/oracle.hpp"

#include "nmflow/errors.hpp"

#include <gsl/gsl_sf_expint.h>

#include <cmath>
#include <numbers>
#include <string>
#include <variant>

namespace nmflow::oracle {

namespace {

constexpr Complex kMinusI{0.0, -1.0};

DensityMatrix anticommutator(const Operator& a, const DensityMatrix& b) { return a * b + b * a; }

}  // namespace

DensityMatrix dense_rhs_standard(const DensityMatrix& rho, const TimeLocalModel& model, double t) {
    const Operator h = model.hamiltonian.at(t);
    DensityMatrix out = kMinusI * (h * rho - rho * h);
    for (const auto& ch : model.channels) {
        const double g = ch.rate(t);
        const Operator& c = ch.op;
        out += g * (c * rho * c.adjoint() - 0.5 * anticommutator(c.adjoint() * c, rho));
    }
    return out;
}

std::vector<DensityMatrix> dense_rhs_generalized(const std::vector<DensityMatrix>& blocks,
                                                 const GeneralizedModel& model, double t) {
    if (blocks.size() != model.blocks()) throw ValidationError("dense_rhs_generalized: block count mismatch");
    std::vector<DensityMatrix> out(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const Operator h = model.block_hamiltonians[i].at(t);
        out[i] = kMinusI * (h * blocks[i] - blocks[i] * h);
    }
    for (const auto& r : model.couplings) {
        const Operator op = r.at(t);
        out[r.target] += op * blocks[r.source] * op.adjoint();
        out[r.source] -= 0.5 * anticommutator(op.adjoint() * op, blocks[r.source]);
    }
    return out;
}

namespace {

using Blocks = std::vector<DensityMatrix>;

Blocks rhs(const Model& model, const Blocks& rho, double t) {
    if (const auto* s = std::get_if<TimeLocalModel>(&model)) return {dense_rhs_standard(rho[0], *s, t)};
    return dense_rhs_generalized(rho, std::get<GeneralizedModel>(model), t);
}

Blocks axpy(const Blocks& x, double a, const Blocks& k) {
    Blocks out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
    return out;
}

double total_trace(const Blocks& rho) {
    double tr = 0.0;
    for (const auto& b : rho) tr += b.trace().real();
    return tr;
}

}  // namespace

DenseTrajectory dense_integrate(const Model& model, const std::vector<DensityMatrix>& initial, double dt,
                                double t_max, std::size_t record_stride) {
    if (!(dt > 0.0) || !(t_max >= dt)) throw ValidationError("dense_integrate: need dt > 0 and t_max >= dt");
    if (record_stride == 0) throw ValidationError("dense_integrate: record_stride must be >= 1");
    std::visit([](const auto& m) { m.validate(); }, model);
    const std::size_t n_blocks = model_blocks(model);
    const auto d = static_cast<Eigen::Index>(model_dim(model));
    if (initial.size() != n_blocks) throw ValidationError("dense_integrate: wrong number of initial blocks");
    for (const auto& b : initial) {
        if (b.rows() != d || b.cols() != d) throw ValidationError("dense_integrate: initial block dimension");
    }

    DenseTrajectory out;
    Blocks rho = initial;
    const double trace0 = total_trace(rho);
    auto record = [&](double t) {
        out.times.push_back(t);
        DensityMatrix total = DensityMatrix::Zero(d, d);
        for (const auto& b : rho) total += b;
        out.blocks.push_back(rho);
        out.total.push_back(std::move(total));
        const double drift = std::abs(total_trace(rho) - trace0);
        out.max_trace_drift = std::max(out.max_trace_drift, drift);
        if (drift > kTraceDriftLimit) {
            throw NumericError("dense_integrate: trace drifted by " + std::to_string(drift) + " at t = " +
                               std::to_string(t));
        }
    };
    record(0.0);
    const auto n_steps = static_cast<std::size_t>(std::llround(t_max / dt));
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Blocks k1 = rhs(model, rho, t);
        const Blocks k2 = rhs(model, axpy(rho, 0.5 * dt, k1), t + 0.5 * dt);
        const Blocks k3 = rhs(model, axpy(rho, 0.5 * dt, k2), t + 0.5 * dt);
        const Blocks k4 = rhs(model, axpy(rho, dt, k3), t + dt);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            rho[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if ((k + 1) % record_stride == 0 || k + 1 == n_steps) record(static_cast<double>(k + 1) * dt);
    }
    return out;
}

JCCoherences jc_closed_form(double t, const JCParams& p, const DensityMatrix& rho0) {
    if (rho0.rows() != 2 || rho0.cols() != 2) throw ValidationError("jc_closed_form: rho0 must be 2x2");
    const double decay = jc_decay_rate_integral(t, p);
    const double shift = jc_lamb_shift_integral(t, p);
    using two_level::kExcited, two_level::kGround;
    JCCoherences out;
    out.rho_ee = rho0(kExcited, kExcited).real() * std::exp(-decay);
    out.rho_eg = rho0(kExcited, kGround) * std::exp(Complex(-0.5 * decay, -0.5 * shift));
    return out;
}

namespace {

// Cin(z) = int_0^z (1 - cos s)/s ds
double cin(double z) {
    if (z < 0.5) {
        // Alternating series; terms fall off like z^{2k}/(2k (2k)!).
        double sum = 0.0, term_pow = 1.0, fact = 1.0;
        for (int k = 1; k <= 12; ++k) {
            term_pow *= z * z;
            fact *= static_cast<double>((2 * k - 1) * (2 * k));
            const double term = term_pow / (2.0 * k * fact);
            sum += (k % 2 == 1) ? term : -term;
        }
        return sum;
    }
    return std::numbers::egamma + std::log(z) - gsl_sf_Ci(z);
}

}  // namespace

double two_band_kernel_integral_exact(double t, const TwoBandParams& p) {
    const double x = 0.5 * p.delta_eps * t;
    if (x <= 0.0) return 0.0;
    const double s = std::sin(x);
    return (gsl_sf_Si(2.0 * x) - s * s / x) / std::numbers::pi;
}

double two_band_kernel_double_integral(double t, const TwoBandParams& p) {
    const double x = 0.5 * p.delta_eps * t;
    if (x <= 0.0) return 0.0;
    const double s = std::sin(x);
    const double inner = x * gsl_sf_Si(2.0 * x) - s * s - 0.5 * cin(2.0 * x);
    return 2.0 * inner / (std::numbers::pi * p.delta_eps);
}

double two_band_closed_form(double t, const TwoBandParams& p, double p0) {
    const double total = p.gamma1 + p.gamma2;
    if (total == 0.0) return p0;
    const double plateau = p.gamma1 / total;
    return plateau + (p0 - plateau) * std::exp(-2.0 * total * two_band_kernel_double_integral(t, p));
}

}  // namespace nmflow::oracle
