#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ionwave/errors.hpp"

namespace ionwave {

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-13;
    double h_init = 0.0; // 0 = auto
    double h_max = 0.0;  // 0 = unlimited
    // Steps never straddle t = k * breakpoint_spacing (piecewise-defined
    // right-hand sides keep full order this way).
    double breakpoint_spacing = 0.0;
    long max_steps = 50'000'000;
};

// Called after every accepted step; may throw to abort integration.
using OdeObserver = std::function<void(double t, const Eigen::VectorXd& y)>;

// Dormand-Prince 5(4) with PI step control and compensated state updates.
// Integrates y' = f(t, y) from t0 to t1 (t1 > t0) and returns y(t1).
Eigen::VectorXd integrate_ode(
    const std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    double t0, double t1, Eigen::VectorXd y0, const OdeOptions& opts = {},
    const OdeObserver& observer = nullptr);

} // namespace ionwave
