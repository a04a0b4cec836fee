#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionwave/constants.hpp"
#include "ionwave/crystal_modes.hpp"
#include "ionwave/waveform_synth.hpp"

namespace ionwave {

// Coherent amplitude in the frame of the instantaneous well center
// (positions relative to the center, velocities lab frame); nbar = |alpha|^2.
struct CoherentAmplitude {
    std::complex<double> alpha{0.0, 0.0};
    int mode_index = 0;
    std::string frame = "well-center";

    double nbar() const { return std::norm(alpha); }
};

struct TrajectoryState {
    double t = 0.0;
    Eigen::VectorXd positions;  // m, ordered for multi-ion states
    Eigen::VectorXd velocities; // m/s
};

// Uniform drive field E(t) = E0 cos(omega (t - t_start) + phi) applied for
// t in [t_start, t_start + t_E].
struct DrivePulse {
    double E0 = 0.0;    // V/m
    double t_E = 0.0;   // s
    double phi_E = 0.0; // rad
    double omega = 0.0; // rad/s
};

struct PulseWindow {
    DrivePulse pulse;
    double t_start = 0.0;
};

// ---------------------------------------------------------------------------
// Coherent-displacement predictions

// Closed form for a well that impulsively starts moving at velocity v and
// stops at t_T: alpha = sqrt(m w / 2 hbar) i (v/w) (1 - e^{-i w t_T}).
CoherentAmplitude alpha_impulsive(double v, double omega, double t_T,
                                  const PhysicalConstants& constants = {});

// Quadrature of the transport integral
// alpha(t_T) = sqrt(m w / 2 hbar) (-e^{-i w t_T} int_0^{t_T} z0'(t) e^{i w t} dt).
CoherentAmplitude alpha_transport_quadrature(const std::function<double(double)>& z0_dot,
                                             double omega, double t_T,
                                             const PhysicalConstants& constants = {},
                                             double rel_tol = 1e-10);

// Same integral for a DAC-sampled well path (piecewise-linear z0, so the
// velocity is piecewise constant and each interval integrates exactly).
CoherentAmplitude alpha_from_sampled_path(const std::vector<double>& z0_samples,
                                          double dac_period, double omega,
                                          const PhysicalConstants& constants = {});

// ---------------------------------------------------------------------------
// Classical trajectories

struct TrajectoryOptions {
    double rel_tol = 1e-10;
    double abs_tol_m = 1e-13;     // position scale
    std::vector<double> sample_times;
    std::optional<PulseWindow> drive;
    double min_ion_spacing = 1e-9; // collision threshold
};

struct TrajectoryResult {
    TrajectoryState final_state;
    std::vector<TrajectoryState> samples;
};

// Integrates m z'' = -q dU/dz(z, t) (plus pairwise Coulomb forces for more
// than one ion) with the waveform voltages piecewise-linear in time. The
// trajectory runs from init.t to t_end.
TrajectoryResult integrate_classical(const VoltageWaveform& wf, const ElectrodeBasis& basis,
                                     const TrajectoryState& init, double t_end,
                                     const PhysicalConstants& constants = {},
                                     const TrajectoryOptions& opts = {});

TrajectoryResult integrate_crystal(const VoltageWaveform& wf, const ElectrodeBasis& basis,
                                   const TrajectoryState& init, double t_end,
                                   const PhysicalConstants& constants = {},
                                   const TrajectoryOptions& opts = {});

// ---------------------------------------------------------------------------
// Mode-amplitude extraction

// Per mode k: alpha_k = sqrt(m w_k / 2 hbar) (u_k . dz + i u_k . v / w_k).
std::vector<CoherentAmplitude> extract_mode_alphas(const TrajectoryState& state,
                                                   const IonCrystal& equilibrium,
                                                   const ModeSpectrum& spectrum,
                                                   const PhysicalConstants& constants = {});

// Single-ion convenience, relative to a well center at rest.
CoherentAmplitude extract_alpha_single(const TrajectoryState& state, double well_center,
                                       double omega, const PhysicalConstants& constants = {},
                                       double center_velocity = 0.0);

// ---------------------------------------------------------------------------
// Drive pulses

// Exact displacement of the pulse in its own rotating frame (no
// rotating-wave approximation):
// alpha_E = (i / sqrt(2 m hbar w)) int_0^{t_E} q E0 cos(w t + phi) e^{i w t} dt.
CoherentAmplitude displacement_from_pulse(const DrivePulse& pulse, double well_omega,
                                          const PhysicalConstants& constants = {});

struct CompensationOptions {
    double target_periods = 16.0; // preferred pulse length
    double max_t_E = 2e-4;        // s
};

// Pulse with displacement_from_pulse == -alpha_target (|residual| < 1e-9).
DrivePulse compensation_pulse(const CoherentAmplitude& alpha_target, double well_omega,
                              double max_E0, const PhysicalConstants& constants = {},
                              const CompensationOptions& opts = {});

// ---------------------------------------------------------------------------
// Squeezing diagnostic

struct SqueezingOptions {
    std::vector<double> breakpoints; // known discontinuities of omega(t)
    double rel_tol = 1e-12;
};

// |beta| of the Bogoliubov transformation produced by omega(t) over
// [t0, t1]; squeezed quanta n_sq = |beta|^2.
double estimate_squeezing(const std::function<double(double)>& omega_of_t, double t0,
                          double t1, const SqueezingOptions& opts = {});

// ---------------------------------------------------------------------------
// Artifact I/O

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryState>& samples);
void write_excitation_json(const std::string& path,
                           const std::vector<CoherentAmplitude>& alphas,
                           const std::vector<double>& mode_omegas);

} // namespace ionwave
