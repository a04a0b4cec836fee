#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "ionwave/errors.hpp"

namespace ionwave {

// Adaptive Gauss-Kronrod 15(7) quadrature for complex-valued integrands.
// The interval is first split into at least min_intervals panels, then each
// panel is bisected until the embedded error estimate meets the tolerance.
std::complex<double> integrate_adaptive(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    double rel_tol = 1e-12, double abs_tol = 0.0, int min_intervals = 1,
    int max_depth = 28);

} // namespace ionwave
