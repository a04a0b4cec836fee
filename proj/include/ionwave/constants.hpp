#pragma once

#include <cmath>

namespace ionwave {

// CODATA 2018 values, SI units throughout.
struct PhysicalConstants {
    double elementary_charge = 1.602176634e-19;   // C
    double hbar = 1.054571817e-34;                // J s
    double vacuum_permittivity = 8.8541878128e-12; // F/m
    double ion_mass = 9.0121831 * 1.66053906660e-27; // kg, 9Be+ default

    // 1/(4 pi eps0)
    double coulomb() const {
        return 1.0 / (4.0 * M_PI * vacuum_permittivity);
    }

    // Curvature is carried in volts/m^2; the energy landscape is q*U.
    // omega = sqrt(q U'' / m) is used everywhere a frequency is derived
    // from a potential.
    double omega_from_curvature(double u_pp_volts) const {
        return std::sqrt(elementary_charge * u_pp_volts / ion_mass);
    }
    double curvature_from_omega(double omega) const {
        return ion_mass * omega * omega / elementary_charge;
    }

    static PhysicalConstants beryllium9() { return PhysicalConstants{}; }

    static PhysicalConstants with_mass_u(double mass_u) {
        PhysicalConstants c;
        c.ion_mass = mass_u * 1.66053906660e-27;
        return c;
    }
};

constexpr double kAtomicMassKg = 1.66053906660e-27;

} // namespace ionwave
