// Shared fixtures for the unit and acceptance suites.

#pragma once

#include "nmflow/models.hpp"
#include "nmflow/ensemble.hpp"
#include "nmflow/qcore.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace nmflow::test {

inline StateVector random_state(std::mt19937_64& rng, Eigen::Index dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    StateVector s(dim);
    for (Eigen::Index i = 0; i < dim; ++i) s(i) = Complex(n(rng), n(rng));
    return s / s.norm();
}

inline Operator random_operator(std::mt19937_64& rng, Eigen::Index dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Operator m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = Complex(n(rng), n(rng));
    return m;
}

inline Operator random_hermitian(std::mt19937_64& rng, Eigen::Index dim) {
    const Operator a = random_operator(rng, dim);
    return 0.5 * (a + a.adjoint());
}

inline Operator random_unitary(std::mt19937_64& rng, Eigen::Index dim) {
    Eigen::HouseholderQR<Operator> qr(random_operator(rng, dim));
    return qr.householderQ() * Operator::Identity(dim, dim);
}

// Random density matrix: convex mix of random projectors.
inline DensityMatrix random_density(std::mt19937_64& rng, Eigen::Index dim, int terms = 3) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    DensityMatrix rho = DensityMatrix::Zero(dim, dim);
    double total = 0.0;
    for (int k = 0; k < terms; ++k) {
        const double w = u(rng);
        rho += w * projector(random_state(rng, dim));
        total += w;
    }
    return rho / total;
}

inline JCParams figure1_params() { return JCParams{4.0, 1.0, 12.0}; }

// (4|e> + 3|g>)/5
inline StateVector jc_initial_state() {
    StateVector s(2);
    s(two_level::kExcited) = 0.8;
    s(two_level::kGround) = 0.6;
    return s;
}

inline std::vector<InitialComponent> jc_initial() { return {{0, jc_initial_state(), 1.0}}; }

// Three-level V system in a randomly rotated basis: H diagonal in that basis,
// C1 = |0><1| with rate sin(2t), C2 = |0><2| with rate 0.5 cos(3t). Both
// rates take negative values on [0, 3]; the integrated rates keep every
// ensemble probability non-negative for the chosen amplitude ranges.
struct ThreeLevelCase {
    TimeLocalModel model;
    StateVector initial;
};

inline ThreeLevelCase random_three_level(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Operator rot = random_unitary(rng, 3);
    auto ket = [&](int k) -> StateVector { return rot.col(k); };

    Eigen::Vector3d energies(0.0, -1.0 + 2.0 * u(rng), -1.0 + 2.0 * u(rng));
    Operator h = Operator::Zero(3, 3);
    for (int k = 0; k < 3; ++k) h += energies(k) * projector(ket(k));
    h = 0.5 * (h + h.adjoint());

    const double r1 = 0.5 + 0.5 * u(rng);
    const double r2 = 0.4 * r1 * u(rng);
    const double r0 = 0.2 + 0.8 * u(rng);
    StateVector amp(3);
    amp(0) = std::polar(r0, 2.0 * M_PI * u(rng));
    amp(1) = std::polar(r1, 2.0 * M_PI * u(rng));
    amp(2) = std::polar(r2, 2.0 * M_PI * u(rng));
    amp /= amp.norm();

    ThreeLevelCase c;
    c.model.hamiltonian = Hamiltonian{h, {}};
    c.model.channels.push_back({ket(0) * ket(1).adjoint(), [](double t) { return std::sin(2.0 * t); }, "C1"});
    c.model.channels.push_back({ket(0) * ket(2).adjoint(), [](double t) { return 0.5 * std::cos(3.0 * t); }, "C2"});
    c.initial = rot * amp;
    return c;
}

}  // namespace nmflow::test
