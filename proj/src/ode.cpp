#include "ionwave/ode.hpp"

#include <algorithm>
#include <cmath>

namespace ionwave {

namespace {

// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 4th-order comparison weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace

Eigen::VectorXd integrate_ode(
    const std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    double t0, double t1, Eigen::VectorXd y0, const OdeOptions& opts,
    const OdeObserver& observer) {
    if (!(t1 >= t0)) throw ArgumentError("integrate_ode: t1 must be >= t0");
    if (t1 == t0) return y0;

    const Eigen::Index n = y0.size();
    Eigen::VectorXd y = std::move(y0);
    Eigen::VectorXd comp = Eigen::VectorXd::Zero(n); // Neumaier compensation
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Eigen::VectorXd ytmp(n), ynew(n), yerr(n), incr(n);

    double t = t0;
    f(t, y, k1);

    // Initial step from the RHS scale.
    double h = opts.h_init;
    if (h <= 0.0) {
        const double d0 = y.norm();
        const double d1 = k1.norm();
        h = (d1 > 1e-300) ? 0.01 * std::max(d0, 1.0) / d1 : 1e-6 * (t1 - t0);
        h = std::min(h, (t1 - t0) / 10.0);
        if (h <= 0.0) h = 1e-12 * (t1 - t0);
    }
    if (opts.h_max > 0.0) h = std::min(h, opts.h_max);

    const double safety = 0.9;
    double err_prev = 1.0;
    long steps = 0;

    while (t < t1) {
        if (++steps > opts.max_steps)
            throw ConvergenceError("integrate_ode: step limit exceeded");

        double h_step = std::min(h, t1 - t);
        bool hit_break = false;
        if (opts.breakpoint_spacing > 0.0) {
            const double d = opts.breakpoint_spacing;
            const double next_break = (std::floor(t / d + 1e-9) + 1.0) * d;
            if (next_break < t1 && t + h_step > next_break * (1.0 - 1e-15)) {
                h_step = next_break - t;
                hit_break = true;
            }
        }
        if (h_step <= std::abs(t) * 1e-16)
            throw ConvergenceError("integrate_ode: step size underflow");

        ytmp = y + h_step * (a21 * k1);
        f(t + c2 * h_step, ytmp, k2);
        ytmp = y + h_step * (a31 * k1 + a32 * k2);
        f(t + c3 * h_step, ytmp, k3);
        ytmp = y + h_step * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h_step, ytmp, k4);
        ytmp = y + h_step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h_step, ytmp, k5);
        ytmp = y + h_step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h_step, ytmp, k6);
        incr = h_step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        ynew = y + incr;
        f(t + h_step, ynew, k7);
        yerr = h_step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double scale =
                opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double e = yerr[i] / scale;
            err += e * e;
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (err <= 1.0) {
            // Accept: compensated accumulation y += incr.
            for (Eigen::Index i = 0; i < n; ++i) {
                const double a = y[i], b = incr[i] + comp[i];
                const double s = a + b;
                comp[i] = (std::abs(a) >= std::abs(b)) ? (a - s) + b : (b - s) + a;
                y[i] = s;
            }
            t += h_step;
            k1 = k7; // FSAL
            if (observer) observer(t, y);

            const double e_clamped = std::max(err, 1e-10);
            double fac = safety * std::pow(e_clamped, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 6.0);
            err_prev = e_clamped;
            if (!hit_break) h = h_step * fac;
            else h = std::max(h, h_step * fac);
            if (opts.h_max > 0.0) h = std::min(h, opts.h_max);
        } else {
            h = h_step * std::clamp(safety * std::pow(err, -0.2), 0.1, 0.9);
        }
    }
    return y + comp;
}

} // namespace ionwave
