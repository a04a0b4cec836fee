#include "ionwave/waveform_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "ionwave/quadrature.hpp"

namespace ionwave {

// ---------------------------------------------------------------------------
// VoltageWaveform

Eigen::VectorXd VoltageWaveform::voltages_at(double t) const {
    if (samples.empty()) throw ArgumentError("empty waveform");
    if (t <= times.front()) return samples.front();
    if (t >= times.back()) return samples.back();
    const double u = (t - times.front()) / dac_period;
    auto k = static_cast<std::size_t>(u);
    if (k + 1 >= samples.size()) k = samples.size() - 2;
    const double theta = u - static_cast<double>(k);
    return samples[k] + theta * (samples[k + 1] - samples[k]);
}

// ---------------------------------------------------------------------------
// Profiles

ProfileKind profile_kind_from_string(const std::string& s) {
    if (s == "constant_velocity") return ProfileKind::constant_velocity;
    if (s == "sine_squared") return ProfileKind::sine_squared;
    if (s == "min_jerk_poly5") return ProfileKind::min_jerk_poly5;
    throw ArgumentError("unknown profile kind: " + s);
}

std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::constant_velocity: return "constant_velocity";
        case ProfileKind::sine_squared: return "sine_squared";
        case ProfileKind::min_jerk_poly5: return "min_jerk_poly5";
    }
    return "?";
}

double TransportProfile::position(double t) const {
    if (duration <= 0.0) throw ArgumentError("profile duration must be > 0");
    if (t <= 0.0) return z_start;
    if (t >= duration) return z_end;
    const double dz = z_end - z_start;
    const double tau = t / duration;
    switch (kind) {
        case ProfileKind::constant_velocity:
            return z_start + dz * tau;
        case ProfileKind::sine_squared: {
            const double s = std::sin(0.5 * M_PI * tau);
            return z_start + dz * s * s;
        }
        case ProfileKind::min_jerk_poly5:
            return z_start + dz * (tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau)));
    }
    return z_start;
}

double TransportProfile::velocity(double t) const {
    if (duration <= 0.0) throw ArgumentError("profile duration must be > 0");
    if (t < 0.0 || t > duration) return 0.0;
    const double dz = z_end - z_start;
    const double tau = t / duration;
    switch (kind) {
        case ProfileKind::constant_velocity:
            return dz / duration;
        case ProfileKind::sine_squared:
            return dz * 0.5 * M_PI / duration * std::sin(M_PI * tau);
        case ProfileKind::min_jerk_poly5:
            return dz / duration * (tau * tau * (30.0 + tau * (-60.0 + 30.0 * tau)));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Constrained voltage solve

void LinearConstraintSet::append(const Eigen::RowVectorXd& row, double rhs) {
    const Eigen::Index m = A.rows();
    A.conservativeResize(m + 1, row.cols());
    A.row(m) = row;
    b.conservativeResize(m + 1);
    b[m] = rhs;
}

Eigen::RowVectorXd basis_derivative_row(const ElectrodeBasis& basis, double z, int order) {
    Eigen::RowVectorXd row(basis.size());
    for (int i = 0; i < basis.size(); ++i)
        row[i] = basis.basis_fns[static_cast<std::size_t>(i)].eval(z, order);
    return row;
}

void quartic_fit_rows(const ElectrodeBasis& basis, double center, double half_width,
                      Eigen::RowVectorXd& row_a, Eigen::RowVectorXd& row_b) {
    const int npts = 33;
    row_a.setZero(basis.size());
    row_b.setZero(basis.size());
    // Same scaled normal equations as fit_quartic, applied per electrode.
    double s44 = 0, s46 = 0, s48 = 0;
    std::vector<double> t(npts);
    for (int k = 0; k < npts; ++k) {
        t[static_cast<std::size_t>(k)] = -1.0 + 2.0 * k / (npts - 1);
        const double t2 = t[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
        s44 += t2 * t2;
        s46 += t2 * t2 * t2;
        s48 += t2 * t2 * t2 * t2;
    }
    const double det = s44 * s48 - s46 * s46;
    const double h2 = half_width * half_width;
    for (int i = 0; i < basis.size(); ++i) {
        const auto& fn = basis.basis_fns[static_cast<std::size_t>(i)];
        const double u0 = fn.eval(center, 0);
        double r2 = 0, r4 = 0;
        for (int k = 0; k < npts; ++k) {
            const double tk = t[static_cast<std::size_t>(k)];
            const double d = fn.eval(center + tk * half_width, 0) - u0;
            r2 += tk * tk * d;
            r4 += tk * tk * tk * tk * d;
        }
        row_a[i] = (s48 * r2 - s46 * r4) / det / h2;
        row_b[i] = (s44 * r4 - s46 * r2) / det / (h2 * h2);
    }
}

LinearConstraintSet well_constraints(const ElectrodeBasis& basis, double z0, double omega,
                                     const PhysicalConstants& constants) {
    LinearConstraintSet cs;
    cs.A.resize(2, basis.size());
    cs.b.resize(2);
    cs.A.row(0) = basis_derivative_row(basis, z0, 1);
    cs.b[0] = 0.0;
    cs.A.row(1) = basis_derivative_row(basis, z0, 2);
    cs.b[1] = constants.curvature_from_omega(omega);
    return cs;
}

LinearConstraintSet quartic_constraints(const ElectrodeBasis& basis, double center, double a,
                                        double b, double half_width) {
    Eigen::RowVectorXd ra, rb;
    quartic_fit_rows(basis, center, half_width, ra, rb);
    LinearConstraintSet cs;
    cs.A.resize(3, basis.size());
    cs.b.resize(3);
    cs.A.row(0) = basis_derivative_row(basis, center, 1);
    cs.b[0] = 0.0;
    cs.A.row(1) = ra;
    cs.b[1] = a;
    cs.A.row(2) = rb;
    cs.b[2] = b;
    return cs;
}

Eigen::VectorXd solve_voltages(const ElectrodeBasis& basis, const LinearConstraintSet& cons,
                               const Eigen::VectorXd& v_ref, const VoltageBounds& bounds) {
    if (v_ref.size() != basis.size())
        throw ArgumentError("solve_voltages: v_ref length must equal electrode count");
    if (cons.A.cols() != basis.size())
        throw ArgumentError("solve_voltages: constraint width mismatch");

    // Minimum-norm correction: V = v_ref + A^+ (b - A v_ref).
    const Eigen::VectorXd rhs = cons.b - cons.A * v_ref;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(cons.A);
    const Eigen::VectorXd corr = cod.solve(rhs);
    const Eigen::VectorXd v = v_ref + corr;

    const double scale = std::max(1.0, cons.b.cwiseAbs().maxCoeff());
    const double resid = (cons.A * v - cons.b).cwiseAbs().maxCoeff();
    if (resid > 1e-6 * scale)
        throw SynthError("solve_voltages: constraints inconsistent (residual " +
                         std::to_string(resid) + ")");

    std::string offenders;
    for (int i = 0; i < v.size(); ++i) {
        if (v[i] < bounds.v_min || v[i] > bounds.v_max) {
            if (!offenders.empty()) offenders += ", ";
            offenders += basis.electrode_names[static_cast<std::size_t>(i)] + "=" +
                         std::to_string(v[i]) + " V";
        }
    }
    if (!offenders.empty())
        throw BoundError("solve_voltages: voltage bounds exceeded: " + offenders);
    return v;
}

Eigen::VectorXd solve_voltages(const ElectrodeBasis& basis, double z0, double omega,
                               const Eigen::VectorXd& v_ref,
                               const PhysicalConstants& constants,
                               const VoltageBounds& bounds) {
    return solve_voltages(basis, well_constraints(basis, z0, omega, constants), v_ref, bounds);
}

// ---------------------------------------------------------------------------
// Transport synthesis

VoltageWaveform synth_transport(const ElectrodeBasis& basis, const TransportProfile& profile,
                                double omega, const Eigen::VectorXd& v_ref0,
                                const PhysicalConstants& constants,
                                const TransportSynthOptions& opts) {
    if (profile.duration <= 0.0) throw ArgumentError("synth_transport: duration must be > 0");
    if (!basis.in_domain(profile.z_start) || !basis.in_domain(profile.z_end))
        throw DomainError("synth_transport: endpoints outside axial domain");

    // Snap the duration onto the DAC grid.
    const double dt = opts.dac_period;
    const int n_updates = std::max(1, static_cast<int>(std::llround(profile.duration / dt)));
    TransportProfile prof = profile;
    prof.duration = n_updates * dt;

    const int n_solve = (opts.n_solver_steps > 0) ? opts.n_solver_steps : n_updates;

    // Solve along the path with warm starts.
    std::vector<Eigen::VectorXd> path(static_cast<std::size_t>(n_solve) + 1);
    Eigen::VectorXd v = v_ref0;
    for (int k = 0; k <= n_solve; ++k) {
        const double t = prof.duration * k / n_solve;
        const double z0 = prof.position(t);
        if (!basis.in_domain(z0)) throw DomainError("synth_transport: path leaves domain");
        v = solve_voltages(basis, z0, omega, v, constants, opts.bounds);
        path[static_cast<std::size_t>(k)] = v;
    }

    VoltageWaveform wf;
    wf.dac_period = dt;
    wf.times.resize(static_cast<std::size_t>(n_updates) + 1);
    wf.samples.resize(static_cast<std::size_t>(n_updates) + 1);
    for (int k = 0; k <= n_updates; ++k) {
        const double t = k * dt;
        wf.times[static_cast<std::size_t>(k)] = t;
        if (n_solve == n_updates) {
            wf.samples[static_cast<std::size_t>(k)] = path[static_cast<std::size_t>(k)];
        } else {
            const double u = static_cast<double>(k) / n_updates * n_solve;
            auto j = std::min(static_cast<std::size_t>(u),
                              static_cast<std::size_t>(n_solve - 1));
            const double theta = u - static_cast<double>(j);
            wf.samples[static_cast<std::size_t>(k)] = path[j] + theta * (path[j + 1] - path[j]);
        }
    }
    return wf;
}

// ---------------------------------------------------------------------------
// Adiabatic reparametrization

TimeParametrization reparametrize_adiabatic(const std::function<double(double)>& omega_of_s,
                                            double s0, double s1, double eps,
                                            const AdiabaticOptions& opts) {
    if (!(eps > 0.0)) throw ArgumentError("reparametrize_adiabatic: eps must be > 0");
    if (!(s1 > s0)) throw ArgumentError("reparametrize_adiabatic: s1 must be > s0");

    std::vector<double> s;
    if (!opts.s_nodes.empty()) {
        s = opts.s_nodes;
        if (s.front() != s0 || s.back() != s1 || s.size() < 2)
            throw ArgumentError("reparametrize_adiabatic: s_nodes must span [s0, s1]");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i] > s[i - 1]))
                throw ArgumentError("reparametrize_adiabatic: s_nodes must be ascending");
    } else {
        const int n = std::max(16, opts.grid);
        s.resize(static_cast<std::size_t>(n) + 1);
        for (int i = 0; i <= n; ++i)
            s[static_cast<std::size_t>(i)] = s0 + (s1 - s0) * i / n;
    }
    const std::size_t m = s.size();
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) {
        w[i] = omega_of_s(s[i]);
        if (!(w[i] > 0.0))
            throw ArgumentError("reparametrize_adiabatic: omega must be positive");
    }

    // Nodal time density tau = max(|dw/ds|, ...)/(eps w^2) with the slope
    // taken as the larger of the two adjacent segment slopes, so the bound
    // (1/w^2)|dw/dt| <= eps holds pointwise for the piecewise-linear omega
    // model. The duration is exactly proportional to 1/eps whenever the
    // rate cap stays inactive.
    std::vector<double> tau(m);
    for (std::size_t i = 0; i < m; ++i) {
        double slope = 0.0;
        if (i > 0) slope = std::max(slope, std::abs(w[i] - w[i - 1]) / (s[i] - s[i - 1]));
        if (i + 1 < m) slope = std::max(slope, std::abs(w[i + 1] - w[i]) / (s[i + 1] - s[i]));
        double load = slope / (w[i] * w[i]);
        load = std::max(load, opts.min_load);
        double ti = load / eps;
        if (std::isfinite(opts.max_rate) && opts.max_rate > 0.0)
            ti = std::max(ti, 1.0 / opts.max_rate);
        tau[i] = ti;
    }

    TimeParametrization out;
    out.s_grid = s;
    out.t_of_s.resize(m);
    out.t_of_s[0] = 0.0;
    for (std::size_t i = 1; i < m; ++i)
        out.t_of_s[i] = out.t_of_s[i - 1] + 0.5 * (s[i] - s[i - 1]) * (tau[i - 1] + tau[i]);
    out.duration = out.t_of_s.back();
    return out;
}

double TimeParametrization::s_at_time(double t) const {
    if (t <= 0.0) return s_grid.front();
    if (t >= duration) return s_grid.back();
    auto it = std::upper_bound(t_of_s.begin(), t_of_s.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - t_of_s.begin());
    if (hi == 0) hi = 1;
    if (hi >= t_of_s.size()) hi = t_of_s.size() - 1;
    const double t0 = t_of_s[hi - 1], t1 = t_of_s[hi];
    if (t1 <= t0) return s_grid[hi];
    const double theta = (t - t0) / (t1 - t0);
    return s_grid[hi - 1] + theta * (s_grid[hi] - s_grid[hi - 1]);
}

double adiabaticity_certificate(const TimeParametrization& param,
                                const std::function<double(double)>& omega_of_s,
                                double dac_period) {
    double worst = 0.0;
    double w_prev = omega_of_s(param.s_at_time(0.0));
    const long n = static_cast<long>(std::ceil(param.duration / dac_period));
    for (long k = 1; k <= n; ++k) {
        const double t = std::min(k * dac_period, param.duration);
        const double w_now = omega_of_s(param.s_at_time(t));
        const double dt = std::min(dac_period, param.duration - (k - 1) * dac_period);
        if (dt <= 0.0) break;
        const double wmax = std::max(w_prev, w_now);
        worst = std::max(worst, std::abs(w_now - w_prev) / (dt * wmax * wmax));
        w_prev = w_now;
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Separation synthesis

std::function<double(double)> lowest_mode_along_path(const PotentialPath& path, int n_ions,
                                                     int grid,
                                                     const PhysicalConstants& constants,
                                                     std::vector<double>* s_out,
                                                     std::vector<double>* w_out) {
    auto s_vals = std::make_shared<std::vector<double>>();
    auto w_vals = std::make_shared<std::vector<double>>();
    s_vals->reserve(static_cast<std::size_t>(grid) + 1);
    w_vals->reserve(static_cast<std::size_t>(grid) + 1);

    if (n_ions == 1) {
        const WellParams w0 = find_well(path.potential_at(0.0), 0.0, constants);
        double z_prev = w0.z0;
        for (int i = 0; i <= grid; ++i) {
            const double s = static_cast<double>(i) / grid;
            const WellParams w = find_well(path.potential_at(s), z_prev, constants);
            z_prev = w.z0;
            s_vals->push_back(s);
            w_vals->push_back(w.omega);
        }
    } else {
        const AxialPotential start = path.potential_at(0.0);
        const WellParams w0 = find_well(start, 0.0, constants);
        Eigen::VectorXd seed = default_crystal_seed(start, n_ions, w0.z0, constants);
        IonCrystal crystal = equilibrium_positions(start, n_ions, seed, constants);
        double s_prev = 0.0;
        for (int i = 0; i <= grid; ++i) {
            const double s = static_cast<double>(i) / grid;
            if (i > 0) {
                // Refine in s if the equilibrium moved too far for continuity.
                std::function<IonCrystal(double, const IonCrystal&, double, int)> advance =
                    [&](double sa, const IonCrystal& ca, double sb, int depth) -> IonCrystal {
                    IonCrystal cb =
                        equilibrium_positions(path.potential_at(sb), n_ions, ca.positions,
                                              constants);
                    double min_gap = 1e300;
                    for (int k = 1; k < ca.positions.size(); ++k)
                        min_gap = std::min(min_gap, ca.positions[k] - ca.positions[k - 1]);
                    if ((cb.positions - ca.positions).cwiseAbs().maxCoeff() > 0.2 * min_gap &&
                        depth < 24 && sb - sa > 1e-9) {
                        const double sm = 0.5 * (sa + sb);
                        IonCrystal cm = advance(sa, ca, sm, depth + 1);
                        return advance(sm, cm, sb, depth + 1);
                    }
                    return cb;
                };
                crystal = advance(s_prev, crystal, s, 0);
                s_prev = s;
            }
            const ModeSpectrum spec = mode_spectrum(path.potential_at(s), crystal, constants);
            s_vals->push_back(s);
            w_vals->push_back(spec.frequencies[0]);
        }
    }
    if (s_out) *s_out = *s_vals;
    if (w_out) *w_out = *w_vals;

    return [s_vals, w_vals](double s) {
        const auto& sv = *s_vals;
        const auto& wv = *w_vals;
        if (s <= sv.front()) return wv.front();
        if (s >= sv.back()) return wv.back();
        const double u = (s - sv.front()) / (sv.back() - sv.front()) *
                         static_cast<double>(sv.size() - 1);
        auto k = std::min(static_cast<std::size_t>(u), sv.size() - 2);
        const double theta = u - static_cast<double>(k);
        return wv[k] + theta * (wv[k + 1] - wv[k]);
    };
}

namespace {

double golden_section_min(const std::function<double(double)>& f, double a, double b,
                          double tol) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

PotentialPath separation_path(const ElectrodeBasis& basis, const SeparationRamp& ramp,
                              const PhysicalConstants& constants) {
    const double zf = ramp.well_separation;
    if (!basis.in_domain(-zf) || !basis.in_domain(zf))
        throw DomainError("synth_separation: final wells outside axial domain");

    const double upp_final = constants.curvature_from_omega(ramp.omega_final);
    double b_knee = ramp.b_knee;
    if (b_knee <= 0.0) {
        // Pure-quartic estimate for wells at +-zf with the final curvature.
        b_knee = (upp_final / 4.0) / (2.0 * zf * zf);
    }

    // Anchor voltage sets.
    const Eigen::VectorXd v_start = solve_voltages(
        basis, well_constraints(basis, 0.0, ramp.omega_start, constants),
        Eigen::VectorXd::Zero(basis.size()), ramp.bounds);

    Eigen::VectorXd v_knee = solve_voltages(
        basis,
        quartic_constraints(basis, 0.0, 0.5 * constants.curvature_from_omega(ramp.omega_knee),
                            b_knee, 0.4 * 185e-6),
        v_start, ramp.bounds);

    LinearConstraintSet final_cs;
    final_cs.A.resize(4, basis.size());
    final_cs.b.resize(4);
    final_cs.A.row(0) = basis_derivative_row(basis, -zf, 1);
    final_cs.b[0] = 0.0;
    final_cs.A.row(1) = basis_derivative_row(basis, -zf, 2);
    final_cs.b[1] = upp_final;
    final_cs.A.row(2) = basis_derivative_row(basis, zf, 1);
    final_cs.b[2] = 0.0;
    final_cs.A.row(3) = basis_derivative_row(basis, zf, 2);
    final_cs.b[3] = upp_final;
    Eigen::VectorXd v_final = solve_voltages(basis, final_cs, v_knee, ramp.bounds);

    // Asymmetry controls ride on top of the solved anchors.
    const int iO2 = basis.electrode_index("O2");
    Eigen::VectorXd v_knee_adj = v_knee;
    v_knee_adj[iO2] += ramp.o2_compensation;
    v_final[iO2] += ramp.o2_compensation;
    if (ramp.x_quartic_tune != 0.0) v_final[basis.electrode_index("X")] += ramp.x_quartic_tune;
    if (ramp.ab_differential != 0.0) {
        v_final[basis.electrode_index("A")] += 0.5 * ramp.ab_differential;
        v_final[basis.electrode_index("B")] -= 0.5 * ramp.ab_differential;
    }
    return PotentialPath::two_segment(basis, v_start, v_knee_adj, v_final);
}

SeparationResult synth_separation(const ElectrodeBasis& basis, const SeparationRamp& ramp,
                                  int n_ions, const PhysicalConstants& constants) {
    if (n_ions < 1) throw ArgumentError("synth_separation: n_ions must be >= 1");
    if (!(ramp.eps1 > 0.0 && ramp.eps1 < 1.0 && ramp.eps2 > 0.0 && ramp.eps2 < 1.0))
        throw ArgumentError("synth_separation: eps must lie in (0, 1)");

    SeparationResult res;
    res.path = separation_path(basis, ramp, constants);

    // Quartic-coefficient diagnostics along the path; the crossing of a with
    // b > 0 certifies the wedge topology.
    Eigen::RowVectorXd row_a, row_b;
    quartic_fit_rows(basis, 0.0, 0.4 * 185e-6, row_a, row_b);
    const int ndiag = 512;
    bool crossed = false;
    for (int i = 0; i <= ndiag; ++i) {
        const double s = static_cast<double>(i) / ndiag;
        const Eigen::VectorXd v = res.path.voltages_at(s);
        const double a = row_a.dot(v);
        const double b = row_b.dot(v);
        res.s_samples.push_back(s);
        res.a_of_s.push_back(a);
        res.b_of_s.push_back(b);
        if (i > 0 && !crossed && res.a_of_s[static_cast<std::size_t>(i) - 1] > 0.0 && a <= 0.0) {
            const double a0 = res.a_of_s[static_cast<std::size_t>(i) - 1];
            const double t = a0 / (a0 - a);
            res.a_crossing_s = (i - 1 + t) / ndiag;
            const double b0 = res.b_of_s[static_cast<std::size_t>(i) - 1];
            res.b_at_crossing = b0 + t * (b - b0);
            crossed = true;
        }
    }
    if (!crossed)
        throw TopologyError("synth_separation: quadratic coefficient never changes sign");
    if (!(res.b_at_crossing > 0.0))
        throw TopologyError("synth_separation: quartic coefficient not positive at the "
                            "a = 0 crossing");

    // Lowest-mode frequency along the path and the stage boundary.
    std::vector<double> s_m, w_m;
    auto omega_of_s =
        lowest_mode_along_path(res.path, std::max(2, n_ions), ramp.path_grid, constants, &s_m,
                               &w_m);
    res.lowest_mode = w_m;
    std::size_t imin = 0;
    for (std::size_t i = 1; i < w_m.size(); ++i)
        if (w_m[i] < w_m[imin]) imin = i;
    if (imin == 0 || imin + 1 >= w_m.size())
        throw TopologyError("synth_separation: lowest mode has no interior minimum");
    const double bracket = 1.0 / ramp.path_grid;
    res.s_star = golden_section_min(omega_of_s, std::max(0.0, s_m[imin] - bracket),
                                    std::min(1.0, s_m[imin] + bracket), 1e-7);
    res.omega_min = omega_of_s(res.s_star);

    // Time-parametrize each stage on the master-grid nodes (the knots of the
    // piecewise-linear omega model), so the certificate bound is exact.
    auto stage_param = [&](double sa, double sb, double eps) {
        AdiabaticOptions aopts;
        aopts.s_nodes.push_back(sa);
        for (double sn : s_m)
            if (sn > sa && sn < sb) aopts.s_nodes.push_back(sn);
        aopts.s_nodes.push_back(sb);
        double peak = 0.0;
        for (std::size_t i = 1; i < aopts.s_nodes.size(); ++i) {
            const double sl = aopts.s_nodes[i - 1], sr = aopts.s_nodes[i];
            const double slope = std::abs(omega_of_s(sr) - omega_of_s(sl)) / (sr - sl);
            const double wmin = std::min(omega_of_s(sl), omega_of_s(sr));
            peak = std::max(peak, slope / (wmin * wmin));
        }
        aopts.min_load = ramp.min_load_fraction * peak;
        return reparametrize_adiabatic(omega_of_s, sa, sb, eps, aopts);
    };
    const TimeParametrization p1 = stage_param(0.0, res.s_star, ramp.eps1);
    const TimeParametrization p2 = stage_param(res.s_star, 1.0, ramp.eps2);
    res.stage1_duration = p1.duration;
    res.stage2_duration = p2.duration;
    if (p1.duration + p2.duration > ramp.max_duration)
        throw DurationError("synth_separation: adiabatic ramp exceeds max duration");

    res.cert_stage1 = adiabaticity_certificate(p1, omega_of_s, ramp.dac_period);
    res.cert_stage2 = adiabaticity_certificate(p2, omega_of_s, ramp.dac_period);

    // Sample onto the DAC grid; hold the final sample to fill the last period.
    const double total = p1.duration + p2.duration;
    const long n_updates = static_cast<long>(std::ceil(total / ramp.dac_period - 1e-9));
    VoltageWaveform wf;
    wf.dac_period = ramp.dac_period;
    wf.times.resize(static_cast<std::size_t>(n_updates) + 1);
    wf.samples.resize(static_cast<std::size_t>(n_updates) + 1);
    for (long k = 0; k <= n_updates; ++k) {
        const double t = k * ramp.dac_period;
        double s;
        if (t >= total) {
            s = 1.0;
        } else if (t <= p1.duration) {
            s = p1.s_at_time(t);
        } else {
            s = p2.s_at_time(t - p1.duration);
        }
        wf.times[static_cast<std::size_t>(k)] = t;
        wf.samples[static_cast<std::size_t>(k)] = res.path.voltages_at(s);
    }
    res.waveform = std::move(wf);
    return res;
}

// ---------------------------------------------------------------------------
// Spectral criterion

std::complex<double> spectral_criterion(const TransportProfile& profile, double omega) {
    if (profile.duration <= 0.0) throw ArgumentError("spectral_criterion: bad profile");
    if (profile.z_start == profile.z_end) return {0.0, 0.0};
    const double t_T = profile.duration;
    const int per_period = 50;
    const int min_iv =
        std::max(4, static_cast<int>(std::ceil(omega * t_T / (2.0 * M_PI) * per_period / 15.0)));
    auto f = [&](double t) -> std::complex<double> {
        const double v = profile.velocity(t);
        return v * std::exp(std::complex<double>(0.0, omega * t));
    };
    return integrate_adaptive(f, 0.0, t_T, 1e-12, 0.0, min_iv);
}

// ---------------------------------------------------------------------------
// CSV I/O

void write_waveform_csv(const std::string& path, const VoltageWaveform& wf,
                        const std::vector<std::string>& electrode_names) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write waveform CSV: " + path);
    out << "t_s";
    for (const auto& n : electrode_names) out << ",V_" << n;
    out << "\n";
    out.precision(12);
    for (std::size_t k = 0; k < wf.samples.size(); ++k) {
        out << wf.times[k];
        for (int i = 0; i < wf.samples[k].size(); ++i) out << "," << wf.samples[k][i];
        out << "\n";
    }
}

VoltageWaveform read_waveform_csv(const std::string& path,
                                  std::vector<std::string>* electrode_names) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open waveform CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty waveform CSV: " + path);
    std::vector<std::string> names;
    {
        std::istringstream hs(line);
        std::string col;
        if (!std::getline(hs, col, ',') || col != "t_s")
            throw ParseError(path + ": first column must be t_s");
        while (std::getline(hs, col, ',')) {
            if (col.rfind("V_", 0) != 0)
                throw ParseError(path + ": voltage columns must be named V_<electrode>");
            names.push_back(col.substr(2));
        }
    }
    VoltageWaveform wf;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw ParseError(path + ": bad row at line " + std::to_string(lineno));
        Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
        try {
            wf.times.push_back(std::stod(cell));
            for (std::size_t i = 0; i < names.size(); ++i) {
                if (!std::getline(ss, cell, ','))
                    throw ParseError(path + ": short row at line " + std::to_string(lineno));
                v[static_cast<Eigen::Index>(i)] = std::stod(cell);
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(path + ": bad number at line " + std::to_string(lineno));
        }
        wf.samples.push_back(std::move(v));
    }
    if (wf.times.size() < 2) throw ParseError(path + ": waveform needs at least 2 samples");
    wf.dac_period = wf.times[1] - wf.times[0];
    if (electrode_names) *electrode_names = names;
    return wf;
}

} // namespace ionwave
