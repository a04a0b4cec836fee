#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionwave/constants.hpp"
#include "ionwave/errors.hpp"

namespace ionwave {

// Natural cubic spline through (x, y) samples. Evaluation outside the
// sample range throws DomainError (extrapolation forbidden).
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const { return eval(x, 0); }
    double eval(double x, int order) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, y2_; // y2 = second derivatives at knots
    std::size_t find_interval(double x) const;
};

// One electrode's axial potential per unit volt, with two derivatives.
struct BasisFunction {
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;

    double eval(double z, int order) const;

    // phi(z) = exp(-(z-center)^2 / (2 width^2))
    static BasisFunction gaussian(double center, double width);
    // phi(z) = sum_k coeff[k] * z^k
    static BasisFunction polynomial(std::vector<double> coeffs);
    // Natural cubic spline through tabulated (z, phi) samples.
    static BasisFunction tabulated(std::vector<double> z, std::vector<double> phi);
};

struct ElectrodeBasis {
    std::vector<std::string> electrode_names;
    std::vector<BasisFunction> basis_fns;
    double z_min = 0.0;
    double z_max = 0.0;

    int size() const { return static_cast<int>(basis_fns.size()); }
    bool in_domain(double z) const { return z >= z_min && z <= z_max; }
    int electrode_index(const std::string& name) const;

    // Default five-electrode trap: gaussians at {-2d, -d, 0, d, 2d}.
    static ElectrodeBasis gaussian_default(double electrode_pitch = 185e-6,
                                           double width = 100e-6,
                                           double domain_half_span = 555e-6);
};

struct AxialPotential {
    ElectrodeBasis basis;
    Eigen::VectorXd voltages;

    AxialPotential() = default;
    AxialPotential(ElectrodeBasis b, Eigen::VectorXd v);
};

// Local well about its minimum z0: U(z0+x) ~ U(z0) + a x^2 + b x^4.
struct WellParams {
    double z0 = 0.0;    // m
    double omega = 0.0; // rad/s
    double a = 0.0;     // V/m^2
    double b = 0.0;     // V/m^4
};

struct QuarticFit {
    double a = 0.0;        // V/m^2
    double b = 0.0;        // V/m^4
    double residual = 0.0; // RMS, volts
};

// Superposed potential (order = 0) or its first/second z-derivative.
double eval_potential(const AxialPotential& p, double z, int order = 0);

// Least-squares fit of U(center+x) - U(center) to a x^2 + b x^4 over a
// symmetric 33-point stencil of half width half_width.
QuarticFit fit_quartic(const AxialPotential& p, double center, double half_width,
                       int stencil_points = 33);

// Newton search for a potential minimum near seed_z.
WellParams find_well(const AxialPotential& p, double seed_z,
                     const PhysicalConstants& constants = {},
                     double quartic_half_width = 0.4 * 185e-6);

struct TrapDefinition {
    ElectrodeBasis basis;
    PhysicalConstants constants;
};

// Trap definition file (JSON): electrode names, analytic basis parameters
// or sample-table paths, axial domain, ion mass in u.
TrapDefinition load_trap(const std::string& path);

// Sample table: CSV with header "z_m,phi_V", strictly increasing z.
void load_basis_table(const std::string& path, std::vector<double>& z,
                      std::vector<double>& phi);

} // namespace ionwave
