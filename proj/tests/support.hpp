#pragma once

#include <cmath>
#include <random>

#include "ionwave/crystal_modes.hpp"
#include "ionwave/trap_model.hpp"
#include "ionwave/waveform_synth.hpp"

namespace ionwave::test {

// Single-"electrode" potentials built from exact polynomials; handy as
// oracles because every derivative is exact.
inline AxialPotential harmonic_potential(double upp, double z0 = 0.0,
                                         double half_span = 555e-6) {
    ElectrodeBasis b;
    b.electrode_names = {"H"};
    // U(z) = (upp/2) (z - z0)^2 = (upp/2) z^2 - upp z0 z + const
    b.basis_fns.push_back(BasisFunction::polynomial(
        {0.5 * upp * z0 * z0, -upp * z0, 0.5 * upp}));
    b.z_min = -half_span;
    b.z_max = half_span;
    return AxialPotential(b, Eigen::VectorXd::Ones(1));
}

// U(z) = a z^2 + b z^4 about z = 0.
inline AxialPotential quartic_potential(double a, double b, double half_span = 555e-6) {
    ElectrodeBasis eb;
    eb.electrode_names = {"Q"};
    eb.basis_fns.push_back(BasisFunction::polynomial({0.0, 0.0, a, 0.0, b}));
    eb.z_min = -half_span;
    eb.z_max = half_span;
    return AxialPotential(eb, Eigen::VectorXd::Ones(1));
}

// Moving constant-curvature well: electrodes {z^2, z} so that voltages
// (upp/2, -upp z0(t)) place the minimum at z0(t) with curvature upp.
inline ElectrodeBasis moving_harmonic_basis(double half_span = 2000e-6) {
    ElectrodeBasis b;
    b.electrode_names = {"C2", "C1"};
    b.basis_fns.push_back(BasisFunction::polynomial({0.0, 0.0, 1.0}));
    b.basis_fns.push_back(BasisFunction::polynomial({0.0, 1.0}));
    b.z_min = -half_span;
    b.z_max = half_span;
    return b;
}

template <typename PositionFn>
VoltageWaveform moving_harmonic_waveform(double upp, const PositionFn& z0_of_t, double t_end,
                                         double dac_period = 20e-9) {
    VoltageWaveform wf;
    wf.dac_period = dac_period;
    const auto n = static_cast<std::size_t>(std::llround(t_end / dac_period));
    wf.times.resize(n + 1);
    wf.samples.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dac_period;
        wf.times[k] = t;
        Eigen::VectorXd v(2);
        v[0] = 0.5 * upp;
        v[1] = -upp * z0_of_t(t);
        wf.samples[k] = v;
    }
    return wf;
}

inline std::mt19937_64 rng(std::uint64_t seed = 0xB0513ULL) { return std::mt19937_64(seed); }

} // namespace ionwave::test
