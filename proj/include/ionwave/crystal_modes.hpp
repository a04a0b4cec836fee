#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionwave/trap_model.hpp"

namespace ionwave {

struct IonCrystal {
    Eigen::VectorXd positions; // m, strictly increasing
    int n_ions() const { return static_cast<int>(positions.size()); }
};

struct ModeSpectrum {
    Eigen::VectorXd frequencies;  // rad/s, ascending
    Eigen::MatrixXd mode_vectors; // rows = modes, orthonormal
    std::vector<std::string> labels; // "com", "stretch", "higher"
    int n_modes() const { return static_cast<int>(frequencies.size()); }
};

// Total energy (joules) of the crystal in the given potential.
double crystal_energy(const AxialPotential& pot, const Eigen::VectorXd& positions,
                      const PhysicalConstants& constants = {});

// Gradient (N) and Hessian (J/m^2) of the total energy.
void crystal_gradient_hessian(const AxialPotential& pot, const Eigen::VectorXd& positions,
                              const PhysicalConstants& constants,
                              Eigen::VectorXd& grad, Eigen::MatrixXd& hess);

// Damped Newton minimization of the total energy, ordering preserved.
// Throws ConvergenceError after 500 iterations, InstabilityError if the
// converged Hessian is not positive definite.
IonCrystal equilibrium_positions(const AxialPotential& pot, int n_ions,
                                 const Eigen::VectorXd& seed,
                                 const PhysicalConstants& constants = {});

// Convenience: evenly spaced seed centered on a well minimum, spacing set
// by the local curvature length scale.
Eigen::VectorXd default_crystal_seed(const AxialPotential& pot, int n_ions, double center_z,
                                     const PhysicalConstants& constants = {});

// Eigen-decomposition of the mass-scaled Hessian at an equilibrium.
ModeSpectrum mode_spectrum(const AxialPotential& pot, const IonCrystal& crystal,
                           const PhysicalConstants& constants = {});

// A one-parameter family of electrode voltage sets: s in [0, 1] maps onto a
// piecewise-linear interpolation through the anchor voltage vectors.
struct PotentialPath {
    ElectrodeBasis basis;
    std::vector<Eigen::VectorXd> anchors;
    std::vector<double> knots; // ascending, same length as anchors, spans [0, 1]

    Eigen::VectorXd voltages_at(double s) const;
    AxialPotential potential_at(double s) const;
    AxialPotential potential_at(double s, int offset_electrode, double offset_v) const;

    static PotentialPath two_segment(ElectrodeBasis basis, Eigen::VectorXd v0,
                                     Eigen::VectorXd v1, Eigen::VectorXd v2);
};

struct PartitionResult {
    int left_count = 0;
    int right_count = 0;
    double wedge_z = 0.0;           // m, final wedge maximum
    Eigen::VectorXd final_positions;
    bool tie_warning = false;       // an ion landed on the wedge within 1e-9 m
};

// Quasi-static tracking of an n-ion crystal along the separation path with a
// constant offset voltage on one electrode; ions are counted on each side of
// the final wedge maximum. Checkpoints are refined adaptively whenever the
// equilibrium moves by more than a fraction of the minimum ion spacing.
PartitionResult partition_count(const PotentialPath& path, int n_ions, double offset_v,
                                const std::string& offset_electrode = "O2",
                                const PhysicalConstants& constants = {},
                                int checkpoints = 64);

struct PartitionScanPoint {
    double offset_v = 0.0;
    int left_count = 0;
    int right_count = 0;
    double simulated_counts = 0.0;
};

struct FluorescenceModel {
    double counts_per_ion = 10.0; // PMT counts for a single ion
    double droop = 0.03;          // per additional ion

    double counts(int n_left) const {
        return counts_per_ion * n_left * (1.0 - droop * (n_left - 1));
    }
};

std::vector<PartitionScanPoint> partition_scan(const PotentialPath& path, int n_ions,
                                               const std::vector<double>& offsets,
                                               const FluorescenceModel& model = {},
                                               const std::string& offset_electrode = "O2",
                                               const PhysicalConstants& constants = {});

void write_partition_scan_csv(const std::string& path,
                              const std::vector<PartitionScanPoint>& scan);

} // namespace ionwave
