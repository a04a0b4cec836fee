#include "ionwave/motion_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ionwave/ode.hpp"
#include "ionwave/quadrature.hpp"

namespace ionwave {

using cplx = std::complex<double>;
static const cplx kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// Coherent-displacement predictions

CoherentAmplitude alpha_impulsive(double v, double omega, double t_T,
                                  const PhysicalConstants& constants) {
    if (!(omega > 0.0)) throw ArgumentError("alpha_impulsive: omega must be > 0");
    const double pref = std::sqrt(constants.ion_mass * omega / (2.0 * constants.hbar));
    CoherentAmplitude a;
    a.alpha = pref * kI * (v / omega) * (1.0 - std::exp(-kI * omega * t_T));
    return a;
}

CoherentAmplitude alpha_transport_quadrature(const std::function<double(double)>& z0_dot,
                                             double omega, double t_T,
                                             const PhysicalConstants& constants,
                                             double rel_tol) {
    if (!(omega > 0.0)) throw ArgumentError("alpha_transport_quadrature: omega must be > 0");
    if (!(t_T >= 0.0)) throw ArgumentError("alpha_transport_quadrature: t_T must be >= 0");
    CoherentAmplitude a;
    if (t_T == 0.0) return a;
    // Initial panels keep the quadrature step below 1/50 of a period.
    const double period = 2.0 * M_PI / omega;
    const int min_iv = std::max(4, static_cast<int>(std::ceil(50.0 * t_T / period / 15.0)));
    const cplx integral = integrate_adaptive(
        [&](double t) { return z0_dot(t) * std::exp(kI * omega * t); }, 0.0, t_T, rel_tol,
        0.0, min_iv);
    const double pref = std::sqrt(constants.ion_mass * omega / (2.0 * constants.hbar));
    a.alpha = pref * (-std::exp(-kI * omega * t_T)) * integral;
    return a;
}

CoherentAmplitude alpha_from_sampled_path(const std::vector<double>& z0_samples,
                                          double dac_period, double omega,
                                          const PhysicalConstants& constants) {
    if (z0_samples.size() < 2)
        throw ArgumentError("alpha_from_sampled_path: need at least 2 samples");
    if (!(omega > 0.0)) throw ArgumentError("alpha_from_sampled_path: omega must be > 0");
    // Piecewise-constant velocity: each interval contributes
    // v_k (e^{i w t_{k+1}} - e^{i w t_k}) / (i w), summed exactly.
    cplx integral{0.0, 0.0};
    cplx e_prev{1.0, 0.0};
    for (std::size_t k = 0; k + 1 < z0_samples.size(); ++k) {
        const double v = (z0_samples[k + 1] - z0_samples[k]) / dac_period;
        const cplx e_next = std::exp(kI * omega * (static_cast<double>(k + 1) * dac_period));
        integral += v * (e_next - e_prev) / (kI * omega);
        e_prev = e_next;
    }
    const double t_T = static_cast<double>(z0_samples.size() - 1) * dac_period;
    const double pref = std::sqrt(constants.ion_mass * omega / (2.0 * constants.hbar));
    CoherentAmplitude a;
    a.alpha = pref * (-std::exp(-kI * omega * t_T)) * integral;
    return a;
}

// ---------------------------------------------------------------------------
// Classical trajectories

namespace {

TrajectoryResult integrate_ions(const VoltageWaveform& wf, const ElectrodeBasis& basis,
                                const TrajectoryState& init, double t_end,
                                const PhysicalConstants& constants,
                                const TrajectoryOptions& opts, bool coulomb) {
    const int n = static_cast<int>(init.positions.size());
    if (n < 1) throw ArgumentError("integrate: need at least one ion");
    if (init.velocities.size() != n)
        throw ArgumentError("integrate: positions/velocities size mismatch");
    for (int i = 1; i < n; ++i)
        if (!(init.positions[i] > init.positions[i - 1]))
            throw ArgumentError("integrate: multi-ion positions must be ordered");
    for (int i = 0; i < n; ++i)
        if (!basis.in_domain(init.positions[i]))
            throw DomainError("integrate: initial position outside axial domain");

    const double q = constants.elementary_charge;
    const double m = constants.ion_mass;
    const double kq2 = constants.coulomb() * q * q;

    // State layout: [z_0..z_{n-1}, v_0..v_{n-1}].
    auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        const Eigen::VectorXd v = wf.voltages_at(t);
        dy.resize(2 * n);
        for (int i = 0; i < n; ++i) {
            const double z = y[i];
            if (!basis.in_domain(z))
                throw EscapeError("integrate: ion left the axial domain at t = " +
                                  std::to_string(t));
            double grad = 0.0;
            for (int e = 0; e < basis.size(); ++e)
                grad += v[e] * basis.basis_fns[static_cast<std::size_t>(e)].eval(z, 1);
            double force = -q * grad;
            if (coulomb) {
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double r = y[i] - y[j];
                    if (std::abs(r) < opts.min_ion_spacing)
                        throw CollisionError("integrate: ion spacing fell below threshold");
                    force += kq2 * (r > 0 ? 1.0 : -1.0) / (r * r);
                }
            }
            if (opts.drive) {
                const auto& d = *opts.drive;
                const double tp = t - d.t_start;
                if (tp >= 0.0 && tp <= d.pulse.t_E)
                    force += q * d.pulse.E0 * std::cos(d.pulse.omega * tp + d.pulse.phi_E);
            }
            dy[i] = y[n + i];
            dy[n + i] = force / m;
        }
    };

    Eigen::VectorXd y0(2 * n);
    y0.head(n) = init.positions;
    y0.tail(n) = init.velocities;

    OdeOptions oopts;
    oopts.rel_tol = opts.rel_tol;
    oopts.abs_tol = opts.abs_tol_m;
    oopts.breakpoint_spacing = wf.dac_period;

    TrajectoryResult result;
    std::vector<double> wanted = opts.sample_times;
    std::sort(wanted.begin(), wanted.end());
    std::size_t next_sample = 0;
    while (next_sample < wanted.size() && wanted[next_sample] <= init.t) ++next_sample;

    double t_cursor = init.t;
    Eigen::VectorXd y = y0;
    auto record = [&](double t, const Eigen::VectorXd& state) {
        TrajectoryState s;
        s.t = t;
        s.positions = state.head(n);
        s.velocities = state.tail(n);
        result.samples.push_back(std::move(s));
    };
    while (t_cursor < t_end) {
        double t_next = t_end;
        bool is_sample = false;
        if (next_sample < wanted.size() && wanted[next_sample] < t_end) {
            t_next = wanted[next_sample];
            is_sample = true;
        }
        if (t_next > t_cursor)
            y = integrate_ode(rhs, t_cursor, t_next, y, oopts);
        if (is_sample) {
            record(t_next, y);
            ++next_sample;
        }
        t_cursor = t_next;
    }

    result.final_state.t = t_end;
    result.final_state.positions = y.head(n);
    result.final_state.velocities = y.tail(n);
    return result;
}

} // namespace

TrajectoryResult integrate_classical(const VoltageWaveform& wf, const ElectrodeBasis& basis,
                                     const TrajectoryState& init, double t_end,
                                     const PhysicalConstants& constants,
                                     const TrajectoryOptions& opts) {
    return integrate_ions(wf, basis, init, t_end, constants, opts,
                          init.positions.size() > 1);
}

TrajectoryResult integrate_crystal(const VoltageWaveform& wf, const ElectrodeBasis& basis,
                                   const TrajectoryState& init, double t_end,
                                   const PhysicalConstants& constants,
                                   const TrajectoryOptions& opts) {
    if (init.positions.size() < 2)
        throw ArgumentError("integrate_crystal: need at least two ions");
    return integrate_ions(wf, basis, init, t_end, constants, opts, true);
}

// ---------------------------------------------------------------------------
// Extraction

std::vector<CoherentAmplitude> extract_mode_alphas(const TrajectoryState& state,
                                                   const IonCrystal& equilibrium,
                                                   const ModeSpectrum& spectrum,
                                                   const PhysicalConstants& constants) {
    const int n = equilibrium.n_ions();
    if (state.positions.size() != n || spectrum.n_modes() != n)
        throw ArgumentError("extract_mode_alphas: dimension mismatch");
    const Eigen::VectorXd dz = state.positions - equilibrium.positions;
    std::vector<CoherentAmplitude> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double wk = spectrum.frequencies[k];
        const double qk = spectrum.mode_vectors.row(k).dot(dz);
        const double pk = spectrum.mode_vectors.row(k).dot(state.velocities);
        CoherentAmplitude a;
        a.mode_index = k;
        a.alpha = std::sqrt(constants.ion_mass * wk / (2.0 * constants.hbar)) *
                  cplx(qk, pk / wk);
        out.push_back(a);
    }
    return out;
}

CoherentAmplitude extract_alpha_single(const TrajectoryState& state, double well_center,
                                       double omega, const PhysicalConstants& constants,
                                       double center_velocity) {
    if (state.positions.size() != 1)
        throw ArgumentError("extract_alpha_single: expects a single-ion state");
    CoherentAmplitude a;
    const double dz = state.positions[0] - well_center;
    const double v = state.velocities[0] - center_velocity;
    a.alpha = std::sqrt(constants.ion_mass * omega / (2.0 * constants.hbar)) *
              cplx(dz, v / omega);
    return a;
}

// ---------------------------------------------------------------------------
// Drive pulses

CoherentAmplitude displacement_from_pulse(const DrivePulse& pulse, double well_omega,
                                          const PhysicalConstants& constants) {
    if (!(pulse.t_E > 0.0) && pulse.E0 != 0.0)
        throw ArgumentError("displacement_from_pulse: t_E must be > 0");
    const double w = well_omega;
    const double q = constants.elementary_charge;
    const double norm = std::sqrt(2.0 * constants.ion_mass * constants.hbar * w);
    const cplx phase = std::exp(kI * pulse.phi_E);
    // int_0^{t_E} cos(w t + phi) e^{i w t} dt
    const cplx integral = 0.5 * (pulse.t_E / phase +
                                 phase * (std::exp(2.0 * kI * w * pulse.t_E) - 1.0) /
                                     (2.0 * kI * w));
    CoherentAmplitude a;
    a.alpha = kI * q * pulse.E0 / norm * integral;
    return a;
}

DrivePulse compensation_pulse(const CoherentAmplitude& alpha_target, double well_omega,
                              double max_E0, const PhysicalConstants& constants,
                              const CompensationOptions& opts) {
    const double amag = std::abs(alpha_target.alpha);
    if (!(amag > 0.0)) throw ArgumentError("compensation_pulse: |alpha| must be > 0");
    if (!(max_E0 > 0.0)) throw ArgumentError("compensation_pulse: max_E0 must be > 0");
    const double w = well_omega;
    const double q = constants.elementary_charge;
    const double norm = std::sqrt(2.0 * constants.ion_mass * constants.hbar * w);

    // Resonant-term estimate: |alpha| = q E0 t_E / (2 norm); prefer a pulse
    // of target_periods periods, raise E0 up to max_E0 for long pulses.
    const double t_pref = opts.target_periods * 2.0 * M_PI / w;
    double e0 = std::min(max_E0, 2.0 * amag * norm / (q * t_pref));
    double t_e = 2.0 * amag * norm / (q * e0);
    if (t_e > opts.max_t_E) {
        const double e_required = 2.0 * amag * norm / (q * opts.max_t_E);
        throw RangeError("compensation_pulse: required E0 " + std::to_string(e_required) +
                         " V/m exceeds max_E0 " + std::to_string(max_E0) + " V/m");
    }

    const cplx target = -alpha_target.alpha;
    double phi = std::arg(target / kI); // i e^{-i phi} c = target  =>  phi = -arg(target/i)
    phi = -phi;

    // Newton refinement on (t_E, phi) including the counter-rotating term.
    const double pref = q * e0 / norm;
    auto alpha_of = [&](double te, double ph) {
        const cplx phase = std::exp(kI * ph);
        return kI * pref *
               (0.5 * te / phase +
                phase * (std::exp(2.0 * kI * w * te) - 1.0) / (4.0 * kI * w));
    };
    for (int it = 0; it < 60; ++it) {
        const cplx f = alpha_of(t_e, phi) - target;
        if (std::abs(f) < 1e-12 * std::max(1.0, amag)) break;
        const cplx phase = std::exp(kI * phi);
        const cplx dte = kI * pref * 0.5 * (1.0 / phase + phase * std::exp(2.0 * kI * w * t_e));
        const cplx dphi = kI * pref *
                          (-kI * 0.5 * t_e / phase +
                           kI * phase * (std::exp(2.0 * kI * w * t_e) - 1.0) / (4.0 * kI * w));
        // Solve the 2x2 real system [Re/Im][dte dphi] [dt dp]^T = -f.
        const double a11 = dte.real(), a12 = dphi.real();
        const double a21 = dte.imag(), a22 = dphi.imag();
        const double det = a11 * a22 - a12 * a21;
        if (det == 0.0) break;
        const double dt = (-f.real() * a22 + f.imag() * a12) / det;
        const double dp = (-a11 * f.imag() + a21 * f.real()) / det;
        t_e += dt;
        phi += dp;
        if (t_e <= 0.0) t_e = 0.5 * std::abs(t_e - dt);
    }

    DrivePulse pulse;
    pulse.E0 = e0;
    pulse.t_E = t_e;
    pulse.phi_E = phi;
    pulse.omega = w;

    const cplx resid = displacement_from_pulse(pulse, w, constants).alpha +
                       alpha_target.alpha;
    if (std::abs(resid) > 1e-9)
        throw ConvergenceError("compensation_pulse: refinement residual " +
                               std::to_string(std::abs(resid)));
    return pulse;
}

// ---------------------------------------------------------------------------
// Squeezing

double estimate_squeezing(const std::function<double(double)>& omega_of_t, double t0,
                          double t1, const SqueezingOptions& opts) {
    if (!(t1 >= t0)) throw ArgumentError("estimate_squeezing: t1 must be >= t0");
    const double w0 = omega_of_t(t0);
    const double w1 = omega_of_t(t1);
    if (!(w0 > 0.0) || !(w1 > 0.0))
        throw ArgumentError("estimate_squeezing: omega must be positive");

    // Complex mode function f'' = -w(t)^2 f from the positive-frequency
    // initial condition; state = [Re f, Im f, Re f', Im f'].
    auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        const double w = omega_of_t(t);
        if (!(w > 0.0)) throw ArgumentError("estimate_squeezing: omega must be positive");
        dy.resize(4);
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -w * w * y[0];
        dy[3] = -w * w * y[1];
    };

    Eigen::VectorXd y(4);
    y[0] = 1.0 / std::sqrt(2.0 * w0);
    y[1] = 0.0;
    y[2] = 0.0;
    y[3] = -w0 * y[0];

    std::vector<double> cuts = opts.breakpoints;
    cuts.push_back(t1);
    std::sort(cuts.begin(), cuts.end());
    double t = t0;
    OdeOptions oopts;
    oopts.rel_tol = opts.rel_tol;
    oopts.abs_tol = 1e-16;
    for (double c : cuts) {
        if (c <= t || c > t1) continue;
        y = integrate_ode(rhs, t, c, y, oopts);
        t = c;
    }
    if (t < t1) y = integrate_ode(rhs, t, t1, y, oopts);

    const cplx f{y[0], y[1]};
    const cplx fdot{y[2], y[3]};
    const cplx big_f = std::sqrt(2.0 * w1) * f;
    const cplx big_g = std::sqrt(2.0 / w1) * fdot;
    const cplx nu = 0.5 * (big_f - kI * big_g);
    return std::abs(nu);
}

// ---------------------------------------------------------------------------
// I/O

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryState>& samples) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trajectory CSV: " + path);
    const int n = samples.empty() ? 0 : static_cast<int>(samples.front().positions.size());
    out << "t_s";
    for (int i = 1; i <= n; ++i) out << ",z" << i << "_m";
    for (int i = 1; i <= n; ++i) out << ",v" << i << "_mps";
    out << "\n";
    out.precision(12);
    for (const auto& s : samples) {
        out << s.t;
        for (int i = 0; i < n; ++i) out << "," << s.positions[i];
        for (int i = 0; i < n; ++i) out << "," << s.velocities[i];
        out << "\n";
    }
}

void write_excitation_json(const std::string& path,
                           const std::vector<CoherentAmplitude>& alphas,
                           const std::vector<double>& mode_omegas) {
    nlohmann::ordered_json modes = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        nlohmann::ordered_json m;
        m["mode"] = alphas[k].mode_index;
        m["omega_rad_s"] = k < mode_omegas.size() ? mode_omegas[k] : 0.0;
        m["re_alpha"] = alphas[k].alpha.real();
        m["im_alpha"] = alphas[k].alpha.imag();
        m["nbar"] = alphas[k].nbar();
        modes.push_back(m);
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write excitation JSON: " + path);
    out << modes.dump(2) << "\n";
}

} // namespace ionwave
