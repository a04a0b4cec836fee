#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionwave/crystal_modes.hpp"
#include "ionwave/trap_model.hpp"

namespace ionwave {

struct VoltageWaveform {
    std::vector<double> times;            // uniform grid, starts at 0
    std::vector<Eigen::VectorXd> samples; // one voltage vector per time
    double dac_period = 20e-9;

    int n_samples() const { return static_cast<int>(times.size()); }
    int n_updates() const { return n_samples() - 1; }
    double duration() const { return times.empty() ? 0.0 : times.back(); }

    // Piecewise-linear interpolation; clamped to the end samples outside
    // the covered interval.
    Eigen::VectorXd voltages_at(double t) const;
};

enum class ProfileKind { constant_velocity, sine_squared, min_jerk_poly5 };

ProfileKind profile_kind_from_string(const std::string& s);
std::string to_string(ProfileKind k);

struct TransportProfile {
    ProfileKind kind = ProfileKind::sine_squared;
    double z_start = 0.0;
    double z_end = 0.0;
    double duration = 0.0; // t_T, seconds

    double position(double t) const;
    double velocity(double t) const;
};

struct VoltageBounds {
    double v_min = -10.0;
    double v_max = 10.0;
};

// Equality constraints A V = b on the voltage vector.
struct LinearConstraintSet {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    void append(const Eigen::RowVectorXd& row, double rhs);
};

// Rows for common constraint kinds.
Eigen::RowVectorXd basis_derivative_row(const ElectrodeBasis& basis, double z, int order);
// Per-electrode fitted quadratic/quartic coefficients at `center` (the same
// 33-point stencil as fit_quartic): fitted a = row_a * V, b = row_b * V.
void quartic_fit_rows(const ElectrodeBasis& basis, double center, double half_width,
                      Eigen::RowVectorXd& row_a, Eigen::RowVectorXd& row_b);

LinearConstraintSet well_constraints(const ElectrodeBasis& basis, double z0, double omega,
                                     const PhysicalConstants& constants);
LinearConstraintSet quartic_constraints(const ElectrodeBasis& basis, double center, double a,
                                        double b, double half_width);

// Minimum-norm-correction solve: min ||V - v_ref|| s.t. A V = b.
// Throws SynthError for inconsistent constraints, BoundError when the
// solution leaves [v_min, v_max] (offending electrodes listed).
Eigen::VectorXd solve_voltages(const ElectrodeBasis& basis, const LinearConstraintSet& cons,
                               const Eigen::VectorXd& v_ref, const VoltageBounds& bounds = {});

// Convenience overload for a {z0, omega} target.
Eigen::VectorXd solve_voltages(const ElectrodeBasis& basis, double z0, double omega,
                               const Eigen::VectorXd& v_ref,
                               const PhysicalConstants& constants,
                               const VoltageBounds& bounds = {});

struct TransportSynthOptions {
    int n_solver_steps = 0; // 0 = solve at every DAC sample
    VoltageBounds bounds{};
    double dac_period = 20e-9;
};

// Constant-curvature transport: at each step the voltages realize a well at
// z0(t) with frequency omega, warm-started from the previous solution.
VoltageWaveform synth_transport(const ElectrodeBasis& basis, const TransportProfile& profile,
                                double omega, const Eigen::VectorXd& v_ref0,
                                const PhysicalConstants& constants,
                                const TransportSynthOptions& opts = {});

// ---------------------------------------------------------------------------
// Adiabatic reparametrization

struct AdiabaticOptions {
    // Floor on the adiabatic load |dw/ds|/w^2 (seconds per unit s); keeps the
    // traversal rate finite across zero-slope spans and the total duration
    // exactly proportional to 1/eps.
    double min_load = 0.0;
    // Hard cap on ds/dt (1/s).
    double max_rate = std::numeric_limits<double>::infinity();
    int grid = 4096;
    // Explicit node list (ascending, spanning [s0, s1]); used instead of the
    // uniform grid when non-empty. Pass the knots of a piecewise-linear
    // omega model to make the certificate bound exact.
    std::vector<double> s_nodes;
};

struct TimeParametrization {
    std::vector<double> s_grid;
    std::vector<double> t_of_s; // monotone non-decreasing, t_of_s.front() == 0
    double duration = 0.0;

    double s_at_time(double t) const;
};

// Time law ds/dt = eps * w^2 / max(|dw/ds|, min_load * w^2), capped at
// max_rate, so that (1/w^2)|dw/dt| <= eps everywhere.
TimeParametrization reparametrize_adiabatic(const std::function<double(double)>& omega_of_s,
                                            double s0, double s1, double eps,
                                            const AdiabaticOptions& opts = {});

// Largest discrete (1/w^2)|dw/dt| over DAC-spaced samples of the mapping.
double adiabaticity_certificate(const TimeParametrization& param,
                                const std::function<double(double)>& omega_of_s,
                                double dac_period);

// ---------------------------------------------------------------------------
// Separation

struct SeparationRamp {
    double omega_start = 2.0 * M_PI * 2.6e6; // rad/s, merged well in zone X
    double omega_knee = 2.0 * M_PI * 0.3e6;  // rad/s, end of stage 1
    double omega_final = 2.0 * M_PI * 2.8e6; // rad/s, each final well
    double well_separation = 148e-6;         // m, final wells at +-this
    double b_knee = 0.0;                     // V/m^4; 0 = derived from the final wells
    double eps1 = 0.025;
    double eps2 = 0.015;
    // Asymmetry controls (all default 0 for a symmetric basis).
    double o2_compensation = 0.0; // V, ramped onto O2 across stage 1
    double x_quartic_tune = 0.0;  // V, ramped onto X across stage 2
    double ab_differential = 0.0; // V, +d/2 on A and -d/2 on B across stage 2
    VoltageBounds bounds{};
    double dac_period = 20e-9;
    double max_duration = 5e-3;      // s
    double min_load_fraction = 1e-3; // of the peak adiabatic load, per stage
    int path_grid = 4096;
};

struct SeparationResult {
    VoltageWaveform waveform;
    PotentialPath path; // geometric path, asymmetry controls included
    double s_star = 0.0;
    double stage1_duration = 0.0;
    double stage2_duration = 0.0;
    double cert_stage1 = 0.0; // max discrete (1/w^2)|dw/dt| in stage 1
    double cert_stage2 = 0.0;
    double a_crossing_s = 0.0;
    double b_at_crossing = 0.0;
    double omega_min = 0.0; // rad/s, lowest mode at s_star
    std::vector<double> s_samples, a_of_s, b_of_s, lowest_mode; // diagnostics
};

SeparationResult synth_separation(const ElectrodeBasis& basis, const SeparationRamp& ramp,
                                  int n_ions, const PhysicalConstants& constants = {});

// Geometric voltage path of the separation (start / knee / final anchors with
// the asymmetry controls applied), without time parametrization.
PotentialPath separation_path(const ElectrodeBasis& basis, const SeparationRamp& ramp,
                              const PhysicalConstants& constants = {});

// Lowest normal-mode frequency of an n-ion crystal tracked along the path;
// returns a callable backed by samples at `grid`+1 points.
std::function<double(double)> lowest_mode_along_path(const PotentialPath& path, int n_ions,
                                                     int grid,
                                                     const PhysicalConstants& constants,
                                                     std::vector<double>* s_out = nullptr,
                                                     std::vector<double>* w_out = nullptr);

// ---------------------------------------------------------------------------
// Spectral criterion

// Fourier amplitude of the profile velocity at the trap frequency:
// integral of dz0/dt e^{i w t} dt over [0, t_T].
std::complex<double> spectral_criterion(const TransportProfile& profile, double omega);

// Waveform CSV: header t_s,V_<name>,... one row per DAC sample.
void write_waveform_csv(const std::string& path, const VoltageWaveform& wf,
                        const std::vector<std::string>& electrode_names);
VoltageWaveform read_waveform_csv(const std::string& path,
                                  std::vector<std::string>* electrode_names = nullptr);

} // namespace ionwave
