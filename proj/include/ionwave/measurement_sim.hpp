#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ionwave/errors.hpp"

namespace ionwave {

enum class Sideband { mas, mss }; // motion adding / motion subtracting

Sideband sideband_from_string(const std::string& s);
std::string to_string(Sideband sb);

enum class DistributionKind { thermal, coherent, explicit_populations };

struct FockDistribution {
    std::vector<double> populations; // P_0 .. P_nmax, sums to 1
    DistributionKind kind = DistributionKind::explicit_populations;
    double parameter = 0.0; // nbar (thermal) or |alpha| (coherent)

    int n_max() const { return static_cast<int>(populations.size()) - 1; }
    double mean() const;
};

// Truncated geometric distribution P_n = nbar^n / (nbar+1)^{n+1},
// renormalized; n_max picked so the dropped tail is below tail_mass.
FockDistribution thermal_dist(double nbar, int n_max = -1, double tail_mass = 1e-12);

// Poisson distribution with mean |alpha|^2.
FockDistribution coherent_dist(double alpha_mag, int n_max = -1, double tail_mass = 1e-12);

// Sideband Rabi rate between |n> and |n + delta_n| for delta_n = +-1,
// from the generalized-Laguerre matrix element
//   Omega_{n,n+1} = Omega0 e^{-eta^2/2} eta L_n^1(eta^2) / sqrt(n+1),
// with Omega_{n,n-1} = Omega_{n-1,n}; always the magnitude.
double rabi_rate(int n, int delta_n, double omega0, double eta);

struct FloppingTrace {
    std::vector<double> times;  // s, ascending
    std::vector<double> p_down; // probability
    Sideband sideband = Sideband::mas;
    double eta = 0.0;
    double omega0 = 0.0; // rad/s, carrier Rabi rate
    double gamma = 0.0;  // 1/s
};

// P_down(t) = 1/2 (1 + e^{-gamma t} sum_n P_n cos(2 Omega_{n,n+-1} t)).
FloppingTrace flopping_trace(const FockDistribution& dist, Sideband sideband, double omega0,
                             double eta, double gamma, const std::vector<double>& times);

// Optional projection noise: per point, p_down replaced by a binomial
// average over `repetitions` shots.
void apply_shot_noise(FloppingTrace& trace, int repetitions, std::uint64_t seed);

struct FitResult {
    std::string model;           // "thermal" or "coherent"
    double nbar = 0.0;           // fitted mean occupation
    double nbar_sigma = 0.0;     // 1 sigma, linearized covariance
    double gamma = 0.0;
    double gamma_sigma = 0.0;
    double residual_norm = 0.0;  // ||r||_2
    bool sigma_available = true;
    int iterations = 0;

    double alpha_mag() const; // sqrt(nbar), meaningful for the coherent model
};

// Nonlinear least squares over (nbar, gamma) with Omega0 and eta known:
// coarse log-spaced nbar grid, then Levenberg-Marquardt refinement.
FitResult fit_distribution(const FloppingTrace& trace, const std::string& model,
                           double known_omega0, double known_eta);

void write_trace_csv(const std::string& path, const FloppingTrace& trace);
FloppingTrace read_trace_csv(const std::string& path);

} // namespace ionwave
