#include "ionwave/crystal_modes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ionwave {

double crystal_energy(const AxialPotential& pot, const Eigen::VectorXd& positions,
                      const PhysicalConstants& constants) {
    const double q = constants.elementary_charge;
    const double kq2 = constants.coulomb() * q * q;
    double e = 0.0;
    for (int i = 0; i < positions.size(); ++i)
        e += q * eval_potential(pot, positions[i], 0);
    for (int i = 0; i < positions.size(); ++i)
        for (int j = 0; j < i; ++j)
            e += kq2 / std::abs(positions[i] - positions[j]);
    return e;
}

void crystal_gradient_hessian(const AxialPotential& pot, const Eigen::VectorXd& positions,
                              const PhysicalConstants& constants,
                              Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    const int n = static_cast<int>(positions.size());
    const double q = constants.elementary_charge;
    const double kq2 = constants.coulomb() * q * q;
    grad.resize(n);
    hess.setZero(n, n);
    for (int i = 0; i < n; ++i) {
        grad[i] = q * eval_potential(pot, positions[i], 1);
        hess(i, i) = q * eval_potential(pot, positions[i], 2);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double r = positions[i] - positions[j];
            grad[i] -= kq2 * (r > 0 ? 1.0 : -1.0) / (r * r);
            const double c = 2.0 * kq2 / std::pow(std::abs(r), 3);
            hess(i, i) += c;
            hess(i, j) -= c;
        }
    }
}

namespace {

bool strictly_ordered(const Eigen::VectorXd& z, double min_gap = 0.0) {
    for (int i = 1; i < z.size(); ++i)
        if (!(z[i] - z[i - 1] > min_gap)) return false;
    return true;
}

bool in_domain(const ElectrodeBasis& basis, const Eigen::VectorXd& z) {
    for (int i = 0; i < z.size(); ++i)
        if (!basis.in_domain(z[i])) return false;
    return true;
}

} // namespace

namespace {

// Largest absolute single force contribution on any ion; sets the scale for
// the achievable gradient residual in double precision.
double force_scale(const AxialPotential& pot, const Eigen::VectorXd& z,
                   const PhysicalConstants& constants) {
    const double q = constants.elementary_charge;
    const double kq2 = constants.coulomb() * q * q;
    double scale = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        double s = std::abs(q * eval_potential(pot, z[i], 1));
        for (int j = 0; j < z.size(); ++j) {
            if (j == i) continue;
            const double r = z[i] - z[j];
            s += kq2 / (r * r);
        }
        scale = std::max(scale, s);
    }
    return scale;
}

} // namespace

IonCrystal equilibrium_positions(const AxialPotential& pot, int n_ions,
                                 const Eigen::VectorXd& seed,
                                 const PhysicalConstants& constants) {
    if (n_ions < 1) throw ArgumentError("equilibrium_positions: n_ions must be >= 1");
    if (seed.size() != n_ions)
        throw ArgumentError("equilibrium_positions: seed length must equal n_ions");
    if (!strictly_ordered(seed))
        throw ArgumentError("equilibrium_positions: seed must be sorted ascending");

    Eigen::VectorXd z = seed;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;

    bool converged = false;
    for (int it = 0; it < 500; ++it) {
        crystal_gradient_hessian(pot, z, constants, g, h);
        const double gnorm = g.lpNorm<Eigen::Infinity>();
        // Residual target just above the double-precision cancellation floor.
        const double grad_tol = std::max(1e-13 * force_scale(pot, z, constants), 1e-32);
        if (gnorm < grad_tol) {
            converged = true;
            break;
        }

        const double e0 = crystal_energy(pot, z, constants);
        const double hscale = h.diagonal().cwiseAbs().maxCoeff();
        bool accepted = false;
        double lambda = 0.0;
        for (int k = 0; k < 80 && !accepted; ++k) {
            Eigen::MatrixXd hd = h;
            if (lambda > 0.0) hd.diagonal().array() += lambda;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(hd);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                lambda = (lambda == 0.0) ? 1e-8 * hscale : 10.0 * lambda;
                continue;
            }
            const Eigen::VectorXd step = ldlt.solve(-g);
            const double step_max = step.cwiseAbs().maxCoeff();
            if (step_max < 1e-18) {
                // Below position resolution; nothing further to gain.
                accepted = true;
                converged = true;
                break;
            }
            Eigen::VectorXd trial = z + step;
            const bool tiny = step_max < 1e-10; // pure Newton near the optimum
            if (strictly_ordered(trial, 1e-10) && in_domain(pot.basis, trial) &&
                (tiny ||
                 crystal_energy(pot, trial, constants) <= e0 + 1e-14 * std::abs(e0))) {
                z = trial;
                accepted = true;
            } else {
                lambda = (lambda == 0.0) ? 1e-6 * hscale : 10.0 * lambda;
            }
        }
        if (!accepted)
            throw ConvergenceError("equilibrium_positions: damped step search failed");
        if (converged) break;
    }
    crystal_gradient_hessian(pot, z, constants, g, h);
    if (!converged && g.lpNorm<Eigen::Infinity>() >= 1e-18)
        throw ConvergenceError("equilibrium_positions: no convergence in 500 iterations");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw InstabilityError("equilibrium_positions: stationary point is not a stable minimum");

    IonCrystal c;
    c.positions = z;
    return c;
}

Eigen::VectorXd default_crystal_seed(const AxialPotential& pot, int n_ions, double center_z,
                                     const PhysicalConstants& constants) {
    const WellParams well = find_well(pot, center_z, constants);
    const double q = constants.elementary_charge;
    const double upp = 2.0 * well.a; // V/m^2
    // Length scale from q U'' l = k q^2 / l^2.
    const double l = std::cbrt(constants.coulomb() * q / upp);
    Eigen::VectorXd seed(n_ions);
    for (int i = 0; i < n_ions; ++i)
        seed[i] = well.z0 + (i - (n_ions - 1) / 2.0) * 1.3 * l;
    return seed;
}

ModeSpectrum mode_spectrum(const AxialPotential& pot, const IonCrystal& crystal,
                           const PhysicalConstants& constants) {
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    crystal_gradient_hessian(pot, crystal.positions, constants, g, h);
    if (g.lpNorm<Eigen::Infinity>() >= 1e-18)
        throw ArgumentError("mode_spectrum: crystal is not at equilibrium");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h / constants.ion_mass);
    const Eigen::VectorXd vals = es.eigenvalues();
    ModeSpectrum spec;
    const int n = crystal.n_ions();
    spec.frequencies.resize(n);
    spec.mode_vectors.resize(n, n);
    for (int k = 0; k < n; ++k) {
        if (vals[k] <= 0.0)
            throw InstabilityError("mode_spectrum: negative eigenvalue (unstable mode " +
                                   std::to_string(k) + ")");
        spec.frequencies[k] = std::sqrt(vals[k]);
        spec.mode_vectors.row(k) = es.eigenvectors().col(k).transpose();
    }
    // Label by node count along the chain: 0 sign changes = center of mass,
    // 1 = stretch, otherwise a higher mode.
    spec.labels.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        int sign_changes = 0;
        for (int i = 1; i < n; ++i)
            if (spec.mode_vectors(k, i) * spec.mode_vectors(k, i - 1) < 0.0) ++sign_changes;
        spec.labels[static_cast<std::size_t>(k)] =
            sign_changes == 0 ? "com" : (sign_changes == 1 ? "stretch" : "higher");
    }
    return spec;
}

// ---------------------------------------------------------------------------
// PotentialPath

Eigen::VectorXd PotentialPath::voltages_at(double s) const {
    if (anchors.size() < 2 || anchors.size() != knots.size())
        throw ArgumentError("PotentialPath: need matching anchors and knots");
    if (s <= knots.front()) return anchors.front();
    if (s >= knots.back()) return anchors.back();
    std::size_t hi = 1;
    while (knots[hi] < s) ++hi;
    const double t = (s - knots[hi - 1]) / (knots[hi] - knots[hi - 1]);
    return anchors[hi - 1] + t * (anchors[hi] - anchors[hi - 1]);
}

AxialPotential PotentialPath::potential_at(double s) const {
    return AxialPotential(basis, voltages_at(s));
}

AxialPotential PotentialPath::potential_at(double s, int offset_electrode,
                                           double offset_v) const {
    Eigen::VectorXd v = voltages_at(s);
    v[offset_electrode] += offset_v;
    return AxialPotential(basis, v);
}

PotentialPath PotentialPath::two_segment(ElectrodeBasis basis, Eigen::VectorXd v0,
                                         Eigen::VectorXd v1, Eigen::VectorXd v2) {
    PotentialPath p;
    p.basis = std::move(basis);
    p.anchors = {std::move(v0), std::move(v1), std::move(v2)};
    p.knots = {0.0, 0.5, 1.0};
    return p;
}

// ---------------------------------------------------------------------------
// Partitioning

namespace {

// The wedge maximum of a double-well potential: scan for the outermost two
// local minima, then take the interior maximum between them.
double find_wedge_maximum(const AxialPotential& pot) {
    const double lo = pot.basis.z_min * 0.98;
    const double hi = pot.basis.z_max * 0.98;
    const int n_grid = 4001;
    std::vector<double> u(n_grid);
    for (int i = 0; i < n_grid; ++i)
        u[static_cast<std::size_t>(i)] =
            eval_potential(pot, lo + (hi - lo) * i / (n_grid - 1), 0);
    int first_min = -1, last_min = -1;
    for (int i = 1; i + 1 < n_grid; ++i) {
        if (u[static_cast<std::size_t>(i)] < u[static_cast<std::size_t>(i) - 1] &&
            u[static_cast<std::size_t>(i)] < u[static_cast<std::size_t>(i) + 1]) {
            if (first_min < 0) first_min = i;
            last_min = i;
        }
    }
    if (first_min < 0 || last_min <= first_min)
        throw TopologyError("partition: final potential is not a double well");

    int imax = first_min;
    for (int i = first_min; i <= last_min; ++i)
        if (u[static_cast<std::size_t>(i)] > u[static_cast<std::size_t>(imax)]) imax = i;
    if (imax == first_min || imax == last_min)
        throw TopologyError("partition: no interior wedge maximum between wells");

    // Newton refinement on U' = 0 with U'' < 0.
    double z = lo + (hi - lo) * imax / (n_grid - 1);
    for (int it = 0; it < 60; ++it) {
        const double g = eval_potential(pot, z, 1);
        const double h = eval_potential(pot, z, 2);
        if (h >= 0.0) break;
        const double step = -g / h;
        if (std::abs(step) > (hi - lo) / n_grid) break;
        z += step;
        if (std::abs(g) < 1e-12) break;
    }
    if (!(eval_potential(pot, z, 2) < 0.0))
        throw TopologyError("partition: wedge maximum refinement failed");
    return z;
}

struct Tracker {
    const PotentialPath& path;
    int offset_electrode;
    double offset_v;
    const PhysicalConstants& constants;

    IonCrystal advance(double s0, const IonCrystal& c0, double s1, int depth = 0) const {
        const AxialPotential pot = path.potential_at(s1, offset_electrode, offset_v);
        IonCrystal c1;
        bool solved = true;
        try {
            c1 = equilibrium_positions(pot, c0.n_ions(), c0.positions, constants);
        } catch (const Error&) {
            solved = false;
        }
        double min_gap = 1e300;
        for (int i = 1; i < c0.positions.size(); ++i)
            min_gap = std::min(min_gap, c0.positions[i] - c0.positions[i - 1]);
        if (c0.n_ions() == 1) min_gap = 1e-5;
        const bool too_far =
            solved && (c1.positions - c0.positions).cwiseAbs().maxCoeff() > 0.2 * min_gap;
        if ((!solved || too_far) && depth < 28 && s1 - s0 > 1e-9) {
            const double sm = 0.5 * (s0 + s1);
            IonCrystal cm = advance(s0, c0, sm, depth + 1);
            return advance(sm, cm, s1, depth + 1);
        }
        if (!solved)
            throw ConvergenceError("partition: equilibrium tracking failed near s = " +
                                   std::to_string(s1));
        return c1;
    }
};

} // namespace

PartitionResult partition_count(const PotentialPath& path, int n_ions, double offset_v,
                                const std::string& offset_electrode,
                                const PhysicalConstants& constants, int checkpoints) {
    if (n_ions < 1) throw ArgumentError("partition_count: n_ions must be >= 1");
    const int oe = path.basis.electrode_index(offset_electrode);

    // Equilibrate in the offset-shifted pre-separation well.
    const AxialPotential start = path.potential_at(0.0, oe, offset_v);
    // Seed around the merged well; locate it from the unshifted center.
    Eigen::VectorXd seed;
    {
        const AxialPotential unshifted = path.potential_at(0.0);
        const WellParams w0 = find_well(unshifted, 0.0, constants);
        AxialPotential tmp = start;
        seed = default_crystal_seed(tmp, n_ions, w0.z0, constants);
    }
    IonCrystal crystal = equilibrium_positions(start, n_ions, seed, constants);

    Tracker tracker{path, oe, offset_v, constants};
    double s_prev = 0.0;
    for (int k = 1; k < checkpoints; ++k) {
        const double s = static_cast<double>(k) / (checkpoints - 1);
        crystal = tracker.advance(s_prev, crystal, s);
        s_prev = s;
    }

    const AxialPotential final_pot = path.potential_at(1.0, oe, offset_v);
    const double zw = find_wedge_maximum(final_pot);

    PartitionResult res;
    res.wedge_z = zw;
    res.final_positions = crystal.positions;
    for (int i = 0; i < n_ions; ++i) {
        if (std::abs(crystal.positions[i] - zw) < 1e-9) {
            res.tie_warning = true; // exact tie: assign left
            ++res.left_count;
        } else if (crystal.positions[i] < zw) {
            ++res.left_count;
        } else {
            ++res.right_count;
        }
    }
    res.right_count = n_ions - res.left_count;
    return res;
}

std::vector<PartitionScanPoint> partition_scan(const PotentialPath& path, int n_ions,
                                               const std::vector<double>& offsets,
                                               const FluorescenceModel& model,
                                               const std::string& offset_electrode,
                                               const PhysicalConstants& constants) {
    for (std::size_t i = 1; i < offsets.size(); ++i)
        if (!(offsets[i] >= offsets[i - 1]))
            throw ArgumentError("partition_scan: offsets must be sorted ascending");
    std::vector<PartitionScanPoint> out;
    out.reserve(offsets.size());
    for (double off : offsets) {
        const PartitionResult r = partition_count(path, n_ions, off, offset_electrode, constants);
        PartitionScanPoint p;
        p.offset_v = off;
        p.left_count = r.left_count;
        p.right_count = r.right_count;
        p.simulated_counts = model.counts(r.left_count);
        out.push_back(p);
    }
    return out;
}

void write_partition_scan_csv(const std::string& path,
                              const std::vector<PartitionScanPoint>& scan) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scan CSV: " + path);
    out << "offset_V,left_count,counts\n";
    out.precision(12);
    for (const auto& p : scan)
        out << p.offset_v << "," << p.left_count << "," << p.simulated_counts << "\n";
}

} // namespace ionwave
