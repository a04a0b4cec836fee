#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "ionwave/crystal_modes.hpp"
#include "ionwave/waveform_synth.hpp"
#include "support.hpp"

using namespace ionwave;

namespace {
const PhysicalConstants kBe = PhysicalConstants::beryllium9();
constexpr double kTwoPi = 2.0 * M_PI;

Eigen::VectorXd two_ion_seed(double spacing) {
    Eigen::VectorXd s(2);
    s << -0.5 * spacing, 0.5 * spacing;
    return s;
}
} // namespace

TEST_CASE("single ion equilibrium sits at the well minimum") {
    const double omega = kTwoPi * 2e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega), 33e-6);
    Eigen::VectorXd seed(1);
    seed << 20e-6;
    const IonCrystal c = equilibrium_positions(p, 1, seed, kBe);
    const WellParams w = find_well(p, 20e-6, kBe);
    CHECK(std::abs(c.positions[0] - w.z0) < 1e-12);
}

TEST_CASE("two ions in a harmonic well: closed-form spacing") {
    const double omega = kTwoPi * 2e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega));
    const double q = kBe.elementary_charge;
    // spacing^3 = q^2 / (2 pi eps0 m omega^2)
    const double spacing =
        std::cbrt(q * q / (2.0 * M_PI * kBe.vacuum_permittivity * kBe.ion_mass * omega * omega));
    const IonCrystal c = equilibrium_positions(p, 2, two_ion_seed(0.7 * spacing), kBe);
    CHECK(c.positions[1] - c.positions[0] == doctest::Approx(spacing).epsilon(1e-10));
    CHECK(c.positions[0] == doctest::Approx(-0.5 * spacing).epsilon(1e-10));
}

TEST_CASE("two ions in a pure quartic well: 16 b s^5 = k q") {
    const double b = 1.65e14;
    AxialPotential p = test::quartic_potential(0.0, b);
    const double q = kBe.elementary_charge;
    const double s = std::pow(kBe.coulomb() * q / (16.0 * b), 0.2); // half-spacing
    const IonCrystal c = equilibrium_positions(p, 2, two_ion_seed(1.5 * s), kBe);
    CHECK(c.positions[1] == doctest::Approx(s).epsilon(1e-10));
    CHECK(16.0 * b * std::pow(c.positions[1], 5) ==
          doctest::Approx(kBe.coulomb() * q).epsilon(1e-9));
}

TEST_CASE("mode spectrum: harmonic stretch/COM ratio sqrt(3)") {
    const double omega = kTwoPi * 1.8e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega));
    const double q = kBe.elementary_charge;
    const double spacing =
        std::cbrt(q * q / (2.0 * M_PI * kBe.vacuum_permittivity * kBe.ion_mass * omega * omega));
    const IonCrystal c = equilibrium_positions(p, 2, two_ion_seed(spacing), kBe);
    const ModeSpectrum spec = mode_spectrum(p, c, kBe);
    CHECK(spec.frequencies[0] == doctest::Approx(omega).epsilon(1e-9));
    CHECK(spec.frequencies[1] / spec.frequencies[0] ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));
    CHECK(spec.labels[0] == "com");
    CHECK(spec.labels[1] == "stretch");
}

TEST_CASE("mode spectrum: pure quartic stretch/COM ratio sqrt(5/3)") {
    const double b = 2.3e14;
    AxialPotential p = test::quartic_potential(0.0, b);
    const double q = kBe.elementary_charge;
    const double s = std::pow(kBe.coulomb() * q / (16.0 * b), 0.2);
    const IonCrystal c = equilibrium_positions(p, 2, two_ion_seed(1.8 * s), kBe);
    const ModeSpectrum spec = mode_spectrum(p, c, kBe);
    CHECK(spec.frequencies[1] / spec.frequencies[0] ==
          doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-9));
    // Oracle: symbolic Hessian H_ii = 16 b s^2, H_ij = -4 b s^2 (volts form).
    const double upp_com = q * 12.0 * b * s * s;
    CHECK(spec.frequencies[0] ==
          doctest::Approx(std::sqrt(upp_com / kBe.ion_mass)).epsilon(1e-9));
}

TEST_CASE("one-ion spectrum equals the well frequency") {
    const double omega = kTwoPi * 2.4e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega), -10e-6);
    Eigen::VectorXd seed(1);
    seed << -10e-6;
    const IonCrystal c = equilibrium_positions(p, 1, seed, kBe);
    const ModeSpectrum spec = mode_spectrum(p, c, kBe);
    CHECK(spec.frequencies[0] == doctest::Approx(omega).epsilon(1e-9));
}

TEST_CASE("mode vectors orthonormal and Hessian reconstruction") {
    const double omega = kTwoPi * 2e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega));
    Eigen::VectorXd seed(5);
    for (int i = 0; i < 5; ++i) seed[i] = (i - 2) * 5e-6;
    const IonCrystal c = equilibrium_positions(p, 5, seed, kBe);
    const ModeSpectrum spec = mode_spectrum(p, c, kBe);

    const Eigen::MatrixXd gram = spec.mode_vectors * spec.mode_vectors.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    crystal_gradient_hessian(p, c.positions, kBe, g, h);
    Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(5, 5);
    for (int k = 0; k < 5; ++k)
        recon += spec.frequencies[k] * spec.frequencies[k] * kBe.ion_mass *
                 spec.mode_vectors.row(k).transpose() * spec.mode_vectors.row(k);
    CHECK((recon - h).norm() / h.norm() < 1e-9);
}

TEST_CASE("COM vector uniform in a harmonic well (N = 2, 3)") {
    const double omega = kTwoPi * 2e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega));
    for (int n : {2, 3}) {
        Eigen::VectorXd seed(n);
        for (int i = 0; i < n; ++i) seed[i] = (i - (n - 1) / 2.0) * 5e-6;
        const IonCrystal c = equilibrium_positions(p, n, seed, kBe);
        const ModeSpectrum spec = mode_spectrum(p, c, kBe);
        const double expect = 1.0 / std::sqrt(static_cast<double>(n));
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(std::abs(spec.mode_vectors(0, i)) - expect) < 1e-9);
    }
}

TEST_CASE("equilibrium is a local energy minimum under random nudges") {
    const double omega = kTwoPi * 1.5e6;
    AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega));
    Eigen::VectorXd seed(4);
    for (int i = 0; i < 4; ++i) seed[i] = (i - 1.5) * 6e-6;
    const IonCrystal c = equilibrium_positions(p, 4, seed, kBe);
    const double e0 = crystal_energy(p, c.positions, kBe);
    auto gen = test::rng(23);
    std::uniform_real_distribution<double> u(-1e-9, 1e-9);
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::VectorXd z = c.positions;
        for (int i = 0; i < 4; ++i) z[i] += u(gen);
        CHECK(crystal_energy(p, z, kBe) >= e0);
    }
}

TEST_CASE("unstable stationary point is flagged") {
    // One ion at the top of an inverted parabola: gradient zero, H negative.
    AxialPotential p = test::harmonic_potential(-1e7);
    Eigen::VectorXd seed(1);
    seed << 0.0;
    CHECK_THROWS_AS(equilibrium_positions(p, 1, seed, kBe), Error);
}

namespace {

PotentialPath default_separation_path() {
    SeparationRamp ramp;
    return separation_path(ElectrodeBasis::gaussian_default(), ramp, kBe);
}

} // namespace

TEST_CASE("partition: symmetric trap, two ions split 1|1 at zero offset") {
    const PotentialPath path = default_separation_path();
    const PartitionResult r = partition_count(path, 2, 0.0, "O2", kBe);
    CHECK(r.left_count == 1);
    CHECK(r.right_count == 1);
}

TEST_CASE("partition: large offsets capture the whole crystal") {
    const PotentialPath path = default_separation_path();
    // Positive O2 offset pushes the crystal toward zone A (negative z = left).
    const PartitionResult all_left = partition_count(path, 9, 0.45, "O2", kBe);
    CHECK(all_left.left_count == 9);
    CHECK(all_left.right_count == 0);
    const PartitionResult all_right = partition_count(path, 9, -0.45, "O2", kBe);
    CHECK(all_right.left_count == 0);
    CHECK(all_right.right_count == 9);
}

TEST_CASE("partition scan: monotone staircase visits every count") {
    const PotentialPath path = default_separation_path();
    std::vector<double> offsets;
    for (int i = 0; i <= 60; ++i) offsets.push_back(-0.45 + 0.9 * i / 60);
    const auto scan = partition_scan(path, 9, offsets, {}, "O2", kBe);
    std::set<int> seen;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        seen.insert(scan[i].left_count);
        if (i > 0) CHECK(scan[i].left_count >= scan[i - 1].left_count);
    }
    CHECK(seen.size() == 10); // all of 0..9
}

TEST_CASE("fluorescence model values") {
    FluorescenceModel m;
    CHECK(m.counts(1) == doctest::Approx(10.0));
    CHECK(m.counts(0) == doctest::Approx(0.0));
    // counts per ion non-increasing with crystal size
    for (int n = 1; n < 9; ++n)
        CHECK(m.counts(n + 1) / (n + 1) <= m.counts(n) / n + 1e-12);
}

TEST_CASE("partition_scan rejects unsorted offsets") {
    const PotentialPath path = default_separation_path();
    CHECK_THROWS_AS(partition_scan(path, 2, {0.1, -0.1}, {}, "O2", kBe), ArgumentError);
}
