#include "nmflow/models.hpp"

#include "nmflow/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace nmflow {

namespace {

constexpr double kHermitianTol = 1e-12;

void require_square(const Operator& m, std::size_t dim, const std::string& what) {
    if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
        throw ValidationError(what + ": expected " + std::to_string(dim) + "x" +
                              std::to_string(dim) + " matrix");
    }
}

void validate_hamiltonian(const Hamiltonian& h, std::size_t dim, const std::string& what) {
    require_square(h.constant, dim, what);
    if (!is_hermitian(h.constant, kHermitianTol)) throw ValidationError(what + " is not Hermitian");
    for (const auto& term : h.modulated) {
        require_square(term.matrix, dim, what + " term");
        if (!is_hermitian(term.matrix, kHermitianTol)) {
            throw ValidationError(what + " term is not Hermitian");
        }
    }
}

}  // namespace

Hamiltonian Hamiltonian::zero(std::size_t dim) {
    return Hamiltonian{Operator::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)), {}};
}

Operator Hamiltonian::at(double t) const {
    Operator h = constant;
    for (const auto& term : modulated) {
        h += (term.coefficient ? term.coefficient(t) : 1.0) * term.matrix;
    }
    return h;
}

void TimeLocalModel::validate() const {
    const std::size_t d = dim();
    if (d == 0) throw ValidationError("model: Hilbert dimension must be >= 1");
    validate_hamiltonian(hamiltonian, d, "hamiltonian");
    if (channels.empty()) throw ValidationError("model: at least one jump channel required");
    for (std::size_t j = 0; j < channels.size(); ++j) {
        require_square(channels[j].op, d, "channel " + std::to_string(j));
        if (!channels[j].rate) throw ValidationError("channel " + std::to_string(j) + " has no rate");
    }
}

Operator BlockCoupling::at(double t) const {
    return magnitude ? Operator(magnitude(t) * direction) : direction;
}

void GeneralizedModel::validate() const {
    const std::size_t n = blocks();
    if (n == 0) throw ValidationError("generalized model: need at least one block");
    const std::size_t d = dim();
    if (d == 0) throw ValidationError("generalized model: Hilbert dimension must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        validate_hamiltonian(block_hamiltonians[i], d, "block hamiltonian " + std::to_string(i));
    }
    for (std::size_t c = 0; c < couplings.size(); ++c) {
        const auto& r = couplings[c];
        if (r.source >= n || r.target >= n) {
            throw ValidationError("coupling " + std::to_string(c) + " references a missing block");
        }
        require_square(r.direction, d, "coupling " + std::to_string(c));
    }
}

std::size_t model_dim(const Model& m) {
    return std::visit([](const auto& x) { return x.dim(); }, m);
}

std::size_t model_blocks(const Model& m) {
    if (const auto* g = std::get_if<GeneralizedModel>(&m)) return g->blocks();
    return 1;
}

GeneralizedModel as_generalized(const TimeLocalModel& m) {
    GeneralizedModel g;
    g.block_hamiltonians.push_back(m.hamiltonian);
    for (const auto& ch : m.channels) {
        ScalarFunction rate = ch.rate;
        g.couplings.push_back(BlockCoupling{
            0, 0, ch.op,
            [rate](double t) {
                const double r = rate(t);
                if (r < 0.0) {
                    throw NumericError("as_generalized: negative rate at t = " + std::to_string(t) +
                                       " has no block-coupling form");
                }
                return std::sqrt(r);
            },
            ch.label});
    }
    return g;
}

FlowSystem flow_system(const TimeLocalModel& m) {
    m.validate();
    FlowSystem fs;
    fs.dim = m.dim();
    fs.hamiltonians.push_back(m.hamiltonian);
    fs.signed_weights = true;
    for (const auto& ch : m.channels) {
        fs.channels.push_back(FlowChannel{0, 0, ch.op, ch.op.adjoint() * ch.op, ch.rate, ch.label});
    }
    return fs;
}

FlowSystem flow_system(const GeneralizedModel& m) {
    m.validate();
    FlowSystem fs;
    fs.dim = m.dim();
    fs.hamiltonians = m.block_hamiltonians;
    fs.signed_weights = false;
    for (const auto& r : m.couplings) {
        ScalarFunction weight;
        if (r.magnitude) {
            weight = [mag = r.magnitude](double t) {
                const double a = mag(t);
                return a * a;
            };
        } else {
            weight = [](double) { return 1.0; };
        }
        fs.channels.push_back(FlowChannel{r.source, r.target, r.direction,
                                          r.direction.adjoint() * r.direction, std::move(weight),
                                          r.label});
    }
    return fs;
}

FlowSystem flow_system(const Model& m) {
    return std::visit([](const auto& x) { return flow_system(x); }, m);
}

// ---------------------------------------------------------------------------

void JCParams::validate() const {
    if (!(lambda > 0.0)) throw ValidationError("jc: lambda must be > 0");
    if (!(gamma0 >= 0.0)) throw ValidationError("jc: gamma0 must be >= 0");
    if (!std::isfinite(delta)) throw ValidationError("jc: delta must be finite");
}

double jc_decay_rate(double t, const JCParams& p) {
    const double l = p.lambda, d = p.delta;
    const double prefactor = p.gamma0 * l * l / (l * l + d * d);
    return prefactor * (1.0 - std::exp(-l * t) * (std::cos(d * t) - (d / l) * std::sin(d * t)));
}

double jc_lamb_shift(double t, const JCParams& p) {
    const double l = p.lambda, d = p.delta;
    if (d == 0.0) return 0.0;
    const double prefactor = p.gamma0 * l * d / (l * l + d * d);
    return prefactor * (1.0 - std::exp(-l * t) * (std::cos(d * t) + (l / d) * std::sin(d * t)));
}

namespace {

// int_0^t e^{-l s} cos(d s) ds and int_0^t e^{-l s} sin(d s) ds
double damped_cos_integral(double t, double l, double d) {
    return (l - std::exp(-l * t) * (l * std::cos(d * t) - d * std::sin(d * t))) / (l * l + d * d);
}

double damped_sin_integral(double t, double l, double d) {
    return (d - std::exp(-l * t) * (l * std::sin(d * t) + d * std::cos(d * t))) / (l * l + d * d);
}

}  // namespace

double jc_decay_rate_integral(double t, const JCParams& p) {
    const double l = p.lambda, d = p.delta;
    const double prefactor = p.gamma0 * l * l / (l * l + d * d);
    return prefactor *
           (t - damped_cos_integral(t, l, d) + (d / l) * damped_sin_integral(t, l, d));
}

double jc_lamb_shift_integral(double t, const JCParams& p) {
    const double l = p.lambda, d = p.delta;
    if (d == 0.0) return 0.0;
    const double prefactor = p.gamma0 * l * d / (l * l + d * d);
    return prefactor *
           (t - damped_cos_integral(t, l, d) - (l / d) * damped_sin_integral(t, l, d));
}

double jc_spectral_density(double omega_offset, const JCParams& p) {
    const double l = p.lambda;
    return p.gamma0 * l * l / (2.0 * std::numbers::pi * (omega_offset * omega_offset + l * l));
}

TimeLocalModel make_jc_model(const JCParams& p) {
    p.validate();
    using namespace two_level;
    TimeLocalModel m;
    m.hamiltonian = Hamiltonian::zero(2);
    m.hamiltonian.modulated.push_back(
        OperatorTerm{sigma_plus() * sigma_minus(), [p](double t) { return 0.5 * jc_lamb_shift(t, p); }});
    m.channels.push_back(JumpChannel{sigma_minus(), [p](double t) { return jc_decay_rate(t, p); },
                                     "sigma_minus"});
    return m;
}

// ---------------------------------------------------------------------------

void TwoBandParams::validate() const {
    if (!(delta_eps > 0.0)) throw ValidationError("two-band: delta_eps must be > 0");
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw ValidationError("two-band: gammas must be >= 0");
}

double two_band_kernel(double t, const TwoBandParams& p) {
    const double de = p.delta_eps;
    const double x = 0.5 * de * t;
    if (std::abs(x) < 1e-8) return de / (2.0 * std::numbers::pi);
    const double s = std::sin(x) / x;
    return de * s * s / (2.0 * std::numbers::pi);
}

KernelIntegral::KernelIntegral(const TwoBandParams& p, double grid_dt, double t_max)
    : params_(p) {
    p.validate();
    if (!(grid_dt > 0.0) || !(t_max >= grid_dt)) {
        throw ValidationError("kernel integral: need grid_dt > 0 and t_max >= grid_dt");
    }
    // One spare node so that RK4 stages near t_max stay inside the table.
    kernel_ = sample_uniform([&](double t) { return two_band_kernel(t, p); }, grid_dt,
                             t_max + 2.0 * grid_dt);
    cumulative_ = trapezoid_cumulative(kernel_);
}

double KernelIntegral::operator()(double t) const {
    if (t <= 0.0) return 0.0;
    const double h = kernel_.step();
    const auto k = static_cast<std::size_t>(t / h);
    if (k + 1 >= kernel_.size()) {
        throw ValidationError("kernel integral evaluated beyond its table at t = " + std::to_string(t));
    }
    const double tk = kernel_.times[k];
    const double rem = t - tk;
    if (rem <= 1e-12 * h) return cumulative_.values[k];
    return cumulative_.values[k] + 0.5 * rem * (kernel_.values[k] + two_band_kernel(t, params_));
}

GeneralizedModel make_two_band_model(const TwoBandParams& p, double grid_dt, double t_max) {
    using namespace two_level;
    auto F = std::make_shared<const KernelIntegral>(p, grid_dt, t_max);
    GeneralizedModel m;
    m.block_hamiltonians = {Hamiltonian::zero(2), Hamiltonian::zero(2)};
    m.couplings.push_back(BlockCoupling{
        1, 0, sigma_plus(), [F, g = p.gamma1](double t) { return std::sqrt(2.0 * g * (*F)(t)); },
        "R12_sigma_plus"});
    m.couplings.push_back(BlockCoupling{
        0, 1, sigma_minus(), [F, g = p.gamma2](double t) { return std::sqrt(2.0 * g * (*F)(t)); },
        "R21_sigma_minus"});
    return m;
}

}  // namespace nmflow
