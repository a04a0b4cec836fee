#include "ionwave/measurement_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace ionwave {

namespace {
constexpr int kHardCapNmax = 400;
}

Sideband sideband_from_string(const std::string& s) {
    if (s == "MAS" || s == "mas") return Sideband::mas;
    if (s == "MSS" || s == "mss") return Sideband::mss;
    throw ArgumentError("sideband must be MAS or MSS, got: " + s);
}

std::string to_string(Sideband sb) { return sb == Sideband::mas ? "MAS" : "MSS"; }

double FockDistribution::mean() const {
    double m = 0.0;
    for (std::size_t n = 0; n < populations.size(); ++n)
        m += static_cast<double>(n) * populations[n];
    return m;
}

FockDistribution thermal_dist(double nbar, int n_max, double tail_mass) {
    if (nbar < 0.0) throw ArgumentError("thermal_dist: nbar must be >= 0");
    FockDistribution d;
    d.kind = DistributionKind::thermal;
    d.parameter = nbar;
    if (nbar == 0.0) {
        d.populations = {1.0};
        return d;
    }
    const double ratio = nbar / (nbar + 1.0);
    if (n_max < 0) {
        // Tail mass of the geometric distribution beyond N is ratio^{N+1}.
        n_max = static_cast<int>(std::ceil(std::log(tail_mass) / std::log(ratio))) + 1;
        n_max = std::min(n_max, kHardCapNmax);
    }
    d.populations.resize(static_cast<std::size_t>(n_max) + 1);
    double p = 1.0 / (nbar + 1.0);
    double sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        d.populations[static_cast<std::size_t>(n)] = p;
        sum += p;
        p *= ratio;
    }
    for (auto& v : d.populations) v /= sum;
    return d;
}

FockDistribution coherent_dist(double alpha_mag, int n_max, double tail_mass) {
    if (alpha_mag < 0.0) throw ArgumentError("coherent_dist: |alpha| must be >= 0");
    FockDistribution d;
    d.kind = DistributionKind::coherent;
    d.parameter = alpha_mag;
    const double lambda = alpha_mag * alpha_mag;
    if (lambda == 0.0) {
        d.populations = {1.0};
        return d;
    }
    std::vector<double> p;
    double pn = std::exp(-lambda);
    double sum = 0.0;
    for (int n = 0;; ++n) {
        p.push_back(pn);
        sum += pn;
        const bool enough = (n_max >= 0) ? (n >= n_max)
                                         : (1.0 - sum < tail_mass && n > lambda);
        if (enough || n >= kHardCapNmax) break;
        pn *= lambda / (n + 1);
    }
    for (auto& v : p) v /= sum;
    d.populations = std::move(p);
    return d;
}

namespace {

// Generalized Laguerre L_n^1 by upward recurrence.
double laguerre1(int n, double x) {
    if (n == 0) return 1.0;
    double lm1 = 1.0;          // L_0^1
    double l = 2.0 - x;        // L_1^1
    for (int k = 1; k < n; ++k) {
        const double lp1 = ((2.0 * k + 2.0 - x) * l - (k + 1.0) * lm1) / (k + 1.0);
        lm1 = l;
        l = lp1;
    }
    return l;
}

} // namespace

double rabi_rate(int n, int delta_n, double omega0, double eta) {
    if (n < 0) throw ArgumentError("rabi_rate: n must be >= 0");
    if (delta_n != 1 && delta_n != -1)
        throw ArgumentError("rabi_rate: delta_n must be +1 or -1");
    if (delta_n == -1) {
        if (n == 0) return 0.0;
        return rabi_rate(n - 1, +1, omega0, eta);
    }
    const double x = eta * eta;
    return std::abs(omega0 * std::exp(-0.5 * x) * eta * laguerre1(n, x) /
                    std::sqrt(static_cast<double>(n + 1)));
}

FloppingTrace flopping_trace(const FockDistribution& dist, Sideband sideband, double omega0,
                             double eta, double gamma, const std::vector<double>& times) {
    if (dist.populations.empty()) throw ArgumentError("flopping_trace: empty distribution");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] >= times[i - 1]))
            throw ArgumentError("flopping_trace: times must be ascending");

    const int dn = (sideband == Sideband::mas) ? +1 : -1;
    std::vector<double> rates(dist.populations.size());
    for (std::size_t n = 0; n < rates.size(); ++n)
        rates[n] = rabi_rate(static_cast<int>(n), dn, omega0, eta);

    FloppingTrace tr;
    tr.times = times;
    tr.sideband = sideband;
    tr.eta = eta;
    tr.omega0 = omega0;
    tr.gamma = gamma;
    tr.p_down.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        double s = 0.0;
        for (std::size_t n = 0; n < rates.size(); ++n)
            s += dist.populations[n] * std::cos(2.0 * rates[n] * t);
        tr.p_down[k] = 0.5 * (1.0 + std::exp(-gamma * t) * s);
    }
    return tr;
}

void apply_shot_noise(FloppingTrace& trace, int repetitions, std::uint64_t seed) {
    if (repetitions < 1) throw ArgumentError("apply_shot_noise: repetitions must be >= 1");
    std::mt19937_64 rng(seed);
    for (auto& p : trace.p_down) {
        std::binomial_distribution<int> bin(repetitions, std::clamp(p, 0.0, 1.0));
        p = static_cast<double>(bin(rng)) / repetitions;
    }
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Model {
    bool thermal = true;
    Sideband sideband = Sideband::mas;
    double omega0 = 0.0;
    double eta = 0.0;

    FockDistribution dist(double nbar) const {
        return thermal ? thermal_dist(nbar) : coherent_dist(std::sqrt(nbar));
    }

    // dP_n/dnbar for the population vector.
    std::vector<double> dpop(const FockDistribution& d, double nbar) const {
        std::vector<double> g(d.populations.size());
        if (thermal) {
            for (std::size_t n = 0; n < g.size(); ++n)
                g[n] = d.populations[n] *
                       (static_cast<double>(n) / std::max(nbar, 1e-300) -
                        (static_cast<double>(n) + 1.0) / (nbar + 1.0));
        } else {
            for (std::size_t n = 0; n < g.size(); ++n)
                g[n] = d.populations[n] * (static_cast<double>(n) / std::max(nbar, 1e-300) - 1.0);
        }
        return g;
    }

    void predict(double nbar, double gamma, const std::vector<double>& times,
                 std::vector<double>& p, std::vector<double>* dp_dn = nullptr,
                 std::vector<double>* dp_dg = nullptr) const {
        const FockDistribution d = dist(nbar);
        const int dn = (sideband == Sideband::mas) ? +1 : -1;
        std::vector<double> rates(d.populations.size());
        for (std::size_t n = 0; n < rates.size(); ++n)
            rates[n] = rabi_rate(static_cast<int>(n), dn, omega0, eta);
        std::vector<double> grad_pop;
        if (dp_dn) grad_pop = dpop(d, nbar);
        p.resize(times.size());
        if (dp_dn) dp_dn->resize(times.size());
        if (dp_dg) dp_dg->resize(times.size());
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double t = times[k];
            double s = 0.0, ds = 0.0;
            for (std::size_t n = 0; n < rates.size(); ++n) {
                const double c = std::cos(2.0 * rates[n] * t);
                s += d.populations[n] * c;
                if (dp_dn) ds += grad_pop[n] * c;
            }
            const double env = std::exp(-gamma * t);
            p[k] = 0.5 * (1.0 + env * s);
            if (dp_dn) (*dp_dn)[k] = 0.5 * env * ds;
            if (dp_dg) (*dp_dg)[k] = -0.5 * t * env * s;
        }
    }

    double ssr(double nbar, double gamma, const FloppingTrace& tr) const {
        std::vector<double> p;
        predict(nbar, gamma, tr.times, p);
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double r = p[k] - tr.p_down[k];
            s += r * r;
        }
        return s;
    }
};

} // namespace

double FitResult::alpha_mag() const { return std::sqrt(std::max(nbar, 0.0)); }

FitResult fit_distribution(const FloppingTrace& trace, const std::string& model_name,
                           double known_omega0, double known_eta) {
    if (trace.times.size() < 20)
        throw ArgumentError("fit_distribution: need at least 20 samples");
    if (model_name != "thermal" && model_name != "coherent")
        throw ArgumentError("fit_distribution: model must be 'thermal' or 'coherent'");

    Model model;
    model.thermal = (model_name == "thermal");
    model.sideband = trace.sideband;
    model.omega0 = known_omega0;
    model.eta = known_eta;

    const double t_span = trace.times.back() - trace.times.front();
    if (!(t_span > 0.0)) throw ArgumentError("fit_distribution: degenerate time axis");

    // Coarse grid: 50 log-spaced nbar values, a small gamma grid each.
    double best_n = 0.1, best_g = 0.0, best_ssr = 1e300;
    for (int i = 0; i < 50; ++i) {
        const double nbar = std::pow(10.0, -3.0 + 5.0 * i / 49.0); // 1e-3 .. 1e2
        for (int j = 0; j <= 12; ++j) {
            const double gamma = j * (4.0 / t_span) / 12.0;
            const double s = model.ssr(nbar, gamma, trace);
            if (s < best_ssr) {
                best_ssr = s;
                best_n = nbar;
                best_g = gamma;
            }
        }
    }

    // Levenberg-Marquardt on (nbar, gamma).
    double nbar = best_n, gamma = best_g;
    double mu = 1e-6;
    std::vector<double> p, dpn, dpg;
    int iters = 0;
    bool converged = false;
    for (; iters < 300; ++iters) {
        model.predict(nbar, gamma, trace.times, p, &dpn, &dpg);
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        double ssr = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double r = p[k] - trace.p_down[k];
            ssr += r * r;
            jtj(0, 0) += dpn[k] * dpn[k];
            jtj(0, 1) += dpn[k] * dpg[k];
            jtj(1, 1) += dpg[k] * dpg[k];
            jtr[0] += dpn[k] * r;
            jtr[1] += dpg[k] * r;
        }
        jtj(1, 0) = jtj(0, 1);
        if (jtr.lpNorm<Eigen::Infinity>() < 1e-10) {
            converged = true;
            break;
        }
        bool stepped = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::Matrix2d damped = jtj;
            damped(0, 0) *= (1.0 + mu);
            damped(1, 1) *= (1.0 + mu);
            damped(0, 0) += 1e-300;
            damped(1, 1) += 1e-300;
            const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
            const double n_new = std::max(nbar + step[0], 1e-9);
            const double g_new = std::max(gamma + step[1], 0.0);
            if (model.ssr(n_new, g_new, trace) <= ssr) {
                nbar = n_new;
                gamma = g_new;
                mu = std::max(mu * 0.3, 1e-12);
                stepped = true;
                break;
            }
            mu *= 4.0;
        }
        if (!stepped) {
            converged = true; // stalled at the numerical floor
            break;
        }
    }

    FitResult res;
    res.model = model_name;
    res.nbar = nbar;
    res.gamma = gamma;
    res.iterations = iters;

    // Linearized covariance at the optimum.
    model.predict(nbar, gamma, trace.times, p, &dpn, &dpg);
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    double ssr = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double r = p[k] - trace.p_down[k];
        ssr += r * r;
        jtj(0, 0) += dpn[k] * dpn[k];
        jtj(0, 1) += dpn[k] * dpg[k];
        jtj(1, 1) += dpg[k] * dpg[k];
    }
    jtj(1, 0) = jtj(0, 1);
    res.residual_norm = std::sqrt(ssr);
    const double dof = static_cast<double>(trace.times.size()) - 2.0;
    const double sigma2 = ssr / std::max(dof, 1.0);
    const double det = jtj(0, 0) * jtj(1, 1) - jtj(0, 1) * jtj(1, 0);
    if (det > 0.0 && jtj(0, 0) > 0.0 && jtj(1, 1) > 0.0) {
        const double c00 = sigma2 * jtj(1, 1) / det;
        const double c11 = sigma2 * jtj(0, 0) / det;
        if (c00 >= 0.0 && c11 >= 0.0) {
            res.nbar_sigma = std::sqrt(c00);
            res.gamma_sigma = std::sqrt(c11);
        } else {
            res.sigma_available = false;
        }
    } else {
        res.sigma_available = false;
    }
    if (!converged)
        throw FitError("fit_distribution: no convergence; best nbar = " + std::to_string(nbar));
    return res;
}

// ---------------------------------------------------------------------------
// CSV

void write_trace_csv(const std::string& path, const FloppingTrace& trace) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trace CSV: " + path);
    out << "t_s,p_down\n";
    out.precision(12);
    for (std::size_t k = 0; k < trace.times.size(); ++k)
        out << trace.times[k] << "," << trace.p_down[k] << "\n";
}

FloppingTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty trace CSV: " + path);
    auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r\n"));
        s.erase(s.find_last_not_of(" \t\r\n") + 1);
        return s;
    };
    if (trim(line) != "t_s,p_down")
        throw ParseError(path + ": expected header 't_s,p_down'");
    FloppingTrace tr;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw ParseError(path + ": bad row at line " + std::to_string(lineno));
        try {
            tr.times.push_back(std::stod(a));
            tr.p_down.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw ParseError(path + ": bad number at line " + std::to_string(lineno));
        }
    }
    if (tr.times.empty()) throw ParseError(path + ": no data rows");
    return tr;
}

} // namespace ionwave
