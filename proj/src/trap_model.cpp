#include "ionwave/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ionwave {

// ---------------------------------------------------------------------------
// CubicSpline

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3 || y_.size() != n)
        throw ArgumentError("spline needs >= 3 samples with matching lengths");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw ArgumentError("spline abscissae must be strictly increasing");

    // Natural boundary conditions: y'' = 0 at both ends. Tridiagonal solve.
    y2_.assign(n, 0.0);
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double sig = (x_[i] - x_[i - 1]) / (x_[i + 1] - x_[i - 1]);
        const double p = sig * y2_[i - 1] + 2.0;
        y2_[i] = (sig - 1.0) / p;
        const double dy1 = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        const double dy0 = (y_[i] - y_[i - 1]) / (x_[i] - x_[i - 1]);
        u[i] = (6.0 * (dy1 - dy0) / (x_[i + 1] - x_[i - 1]) - sig * u[i - 1]) / p;
    }
    for (std::size_t k = n - 1; k-- > 0;)
        y2_[k] = y2_[k] * y2_[k + 1] + u[k];
}

std::size_t CubicSpline::find_interval(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - x_.begin());
    if (hi == 0) hi = 1;
    if (hi >= x_.size()) hi = x_.size() - 1;
    return hi - 1;
}

double CubicSpline::eval(double x, int order) const {
    if (x < x_.front() || x > x_.back())
        throw DomainError("spline evaluated outside sample range");
    const std::size_t i = find_interval(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    switch (order) {
        case 0:
            return a * y_[i] + b * y_[i + 1] +
                   ((a * a * a - a) * y2_[i] + (b * b * b - b) * y2_[i + 1]) *
                       (h * h) / 6.0;
        case 1:
            return (y_[i + 1] - y_[i]) / h -
                   (3.0 * a * a - 1.0) / 6.0 * h * y2_[i] +
                   (3.0 * b * b - 1.0) / 6.0 * h * y2_[i + 1];
        case 2:
            return a * y2_[i] + b * y2_[i + 1];
        default:
            throw ArgumentError("spline derivative order must be 0, 1 or 2");
    }
}

// ---------------------------------------------------------------------------
// BasisFunction

double BasisFunction::eval(double z, int order) const {
    switch (order) {
        case 0: return value(z);
        case 1: return d1(z);
        case 2: return d2(z);
        default: throw ArgumentError("potential derivative order must be 0, 1 or 2");
    }
}

BasisFunction BasisFunction::gaussian(double center, double width) {
    const double w2 = width * width;
    BasisFunction f;
    f.value = [center, w2](double z) {
        const double x = z - center;
        return std::exp(-x * x / (2.0 * w2));
    };
    f.d1 = [center, w2](double z) {
        const double x = z - center;
        return -x / w2 * std::exp(-x * x / (2.0 * w2));
    };
    f.d2 = [center, w2](double z) {
        const double x = z - center;
        return (x * x / (w2 * w2) - 1.0 / w2) * std::exp(-x * x / (2.0 * w2));
    };
    return f;
}

BasisFunction BasisFunction::polynomial(std::vector<double> coeffs) {
    auto horner = [](const std::vector<double>& c, double z) {
        double v = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) v = v * z + c[k];
        return v;
    };
    std::vector<double> c1, c2;
    for (std::size_t k = 1; k < coeffs.size(); ++k)
        c1.push_back(static_cast<double>(k) * coeffs[k]);
    for (std::size_t k = 1; k < c1.size(); ++k)
        c2.push_back(static_cast<double>(k) * c1[k]);
    BasisFunction f;
    f.value = [coeffs, horner](double z) { return horner(coeffs, z); };
    f.d1 = [c1, horner](double z) { return horner(c1, z); };
    f.d2 = [c2, horner](double z) { return horner(c2, z); };
    return f;
}

BasisFunction BasisFunction::tabulated(std::vector<double> z, std::vector<double> phi) {
    if (z.size() < 200)
        throw ArgumentError("tabulated basis needs at least 200 samples");
    auto spline = std::make_shared<CubicSpline>(std::move(z), std::move(phi));
    BasisFunction f;
    f.value = [spline](double x) { return spline->eval(x, 0); };
    f.d1 = [spline](double x) { return spline->eval(x, 1); };
    f.d2 = [spline](double x) { return spline->eval(x, 2); };
    return f;
}

// ---------------------------------------------------------------------------
// ElectrodeBasis / AxialPotential

int ElectrodeBasis::electrode_index(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (electrode_names[static_cast<std::size_t>(i)] == name) return i;
    throw ArgumentError("unknown electrode name: " + name);
}

ElectrodeBasis ElectrodeBasis::gaussian_default(double electrode_pitch, double width,
                                                double domain_half_span) {
    ElectrodeBasis b;
    b.electrode_names = {"O1", "A", "X", "B", "O2"};
    const double d = electrode_pitch;
    for (double c : {-2.0 * d, -d, 0.0, d, 2.0 * d})
        b.basis_fns.push_back(BasisFunction::gaussian(c, width));
    b.z_min = -domain_half_span;
    b.z_max = domain_half_span;
    return b;
}

AxialPotential::AxialPotential(ElectrodeBasis b, Eigen::VectorXd v)
    : basis(std::move(b)), voltages(std::move(v)) {
    if (voltages.size() != basis.size())
        throw ArgumentError("voltage vector length must equal electrode count");
}

double eval_potential(const AxialPotential& p, double z, int order) {
    if (!p.basis.in_domain(z))
        throw DomainError("z outside axial domain");
    double sum = 0.0;
    for (int i = 0; i < p.basis.size(); ++i)
        sum += p.voltages[i] * p.basis.basis_fns[static_cast<std::size_t>(i)].eval(z, order);
    return sum;
}

// ---------------------------------------------------------------------------
// fit_quartic

QuarticFit fit_quartic(const AxialPotential& p, double center, double half_width,
                       int stencil_points) {
    if (half_width <= 0.0) throw ArgumentError("fit_quartic: half_width must be > 0");
    if (!p.basis.in_domain(center - half_width) || !p.basis.in_domain(center + half_width))
        throw DomainError("fit_quartic window outside axial domain");
    if (stencil_points < 5) throw ArgumentError("fit_quartic: stencil too small");

    const double u0 = eval_potential(p, center, 0);
    // Work in scaled coordinate t = x / half_width for conditioning.
    double s44 = 0, s46 = 0, s48 = 0, r2 = 0, r4 = 0;
    std::vector<double> ts(static_cast<std::size_t>(stencil_points));
    std::vector<double> du(static_cast<std::size_t>(stencil_points));
    for (int k = 0; k < stencil_points; ++k) {
        const double t = -1.0 + 2.0 * k / (stencil_points - 1);
        const double x = t * half_width;
        const double d = eval_potential(p, center + x, 0) - u0;
        ts[static_cast<std::size_t>(k)] = t;
        du[static_cast<std::size_t>(k)] = d;
        const double t2 = t * t;
        s44 += t2 * t2;
        s46 += t2 * t2 * t2;
        s48 += t2 * t2 * t2 * t2;
        r2 += t2 * d;
        r4 += t2 * t2 * d;
    }
    const double det = s44 * s48 - s46 * s46;
    if (!(std::abs(det) > 1e-12 * s44 * s48))
        throw FitError("fit_quartic: degenerate stencil (singular normal equations)");
    const double ahat = (s48 * r2 - s46 * r4) / det;
    const double bhat = (s44 * r4 - s46 * r2) / det;

    QuarticFit fit;
    const double h2 = half_width * half_width;
    fit.a = ahat / h2;
    fit.b = bhat / (h2 * h2);
    double ss = 0.0;
    for (int k = 0; k < stencil_points; ++k) {
        const double t2 = ts[static_cast<std::size_t>(k)] * ts[static_cast<std::size_t>(k)];
        const double resid = du[static_cast<std::size_t>(k)] - ahat * t2 - bhat * t2 * t2;
        ss += resid * resid;
    }
    fit.residual = std::sqrt(ss / stencil_points);
    return fit;
}

// ---------------------------------------------------------------------------
// find_well

WellParams find_well(const AxialPotential& p, double seed_z,
                     const PhysicalConstants& constants, double quartic_half_width) {
    if (!p.basis.in_domain(seed_z))
        throw DomainError("find_well: seed outside axial domain");

    const double grad_tol = 1e-9; // V/m
    double z = seed_z;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        const double g = eval_potential(p, z, 1);
        if (std::abs(g) < grad_tol) {
            converged = true;
            break;
        }
        const double h = eval_potential(p, z, 2);
        if (h == 0.0)
            throw ConvergenceError("find_well: vanishing curvature during Newton iteration");
        double step = -g / h;
        // Keep the iterate inside the domain.
        const double span = p.basis.z_max - p.basis.z_min;
        if (std::abs(step) > 0.25 * span) step = std::copysign(0.25 * span, step);
        double zn = z + step;
        if (zn < p.basis.z_min) zn = p.basis.z_min;
        if (zn > p.basis.z_max) zn = p.basis.z_max;
        if (zn == z) break;
        z = zn;
    }
    if (!converged) {
        // Newton can stall at machine precision on steep potentials; accept
        // the iterate only if it genuinely satisfies the tolerance.
        if (std::abs(eval_potential(p, z, 1)) >= grad_tol)
            throw ConvergenceError("find_well: Newton did not converge in 100 steps");
    }
    const double upp = eval_potential(p, z, 2);
    if (!(upp > 0.0))
        throw NoWellError("find_well: stationary point is not a minimum (U'' <= 0)");

    WellParams w;
    w.z0 = z;
    w.omega = constants.omega_from_curvature(upp);
    w.a = 0.5 * upp;
    // Clip the fit window to the domain for wells near the edge.
    double hw = quartic_half_width;
    hw = std::min({hw, z - p.basis.z_min, p.basis.z_max - z});
    if (hw > 0.0) {
        w.b = fit_quartic(p, z, hw).b;
    }
    return w;
}

// ---------------------------------------------------------------------------
// File I/O

void load_basis_table(const std::string& path, std::vector<double>& z,
                      std::vector<double>& phi) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open basis table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty basis table: " + path);
    // strip optional BOM / whitespace
    auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r\n"));
        s.erase(s.find_last_not_of(" \t\r\n") + 1);
        return s;
    };
    if (trim(line) != "z_m,phi_V")
        throw ParseError("basis table " + path + ": expected header 'z_m,phi_V'");
    z.clear();
    phi.clear();
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw ParseError("basis table " + path + ": bad row at line " +
                             std::to_string(lineno));
        try {
            z.push_back(std::stod(a));
            phi.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw ParseError("basis table " + path + ": bad number at line " +
                             std::to_string(lineno));
        }
        if (z.size() > 1 && !(z.back() > z[z.size() - 2]))
            throw ParseError("basis table " + path + ": z must be strictly increasing (line " +
                             std::to_string(lineno) + ")");
    }
}

TrapDefinition load_trap(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trap file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("trap file " + path + ": invalid JSON: " + e.what());
    }

    static const std::vector<std::string> known = {
        "schema_version", "electrodes", "basis", "domain_m", "ion_mass_u"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("trap file " + path + ": unknown key '" + it.key() + "'");
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw ConfigError("trap file " + path + ": schema_version must be 1");

    TrapDefinition def;
    if (j.contains("ion_mass_u"))
        def.constants = PhysicalConstants::with_mass_u(j["ion_mass_u"].get<double>());

    ElectrodeBasis basis;
    basis.electrode_names = j.value("electrodes",
                                    std::vector<std::string>{"O1", "A", "X", "B", "O2"});

    if (!j.contains("basis")) throw ConfigError("trap file " + path + ": missing 'basis'");
    const auto& jb = j["basis"];
    const std::string kind = jb.value("kind", "");
    if (kind == "gaussian") {
        const double pitch = jb.value("pitch_m", 185e-6);
        const double width = jb.value("width_m", 100e-6);
        std::vector<double> centers;
        if (jb.contains("centers_m")) {
            centers = jb["centers_m"].get<std::vector<double>>();
        } else {
            const int n = static_cast<int>(basis.electrode_names.size());
            for (int i = 0; i < n; ++i)
                centers.push_back((i - (n - 1) / 2.0) * pitch);
        }
        if (centers.size() != basis.electrode_names.size())
            throw ConfigError("trap file " + path + ": centers_m length mismatch");
        for (double c : centers)
            basis.basis_fns.push_back(BasisFunction::gaussian(c, width));
    } else if (kind == "tabulated") {
        auto paths = jb["paths"].get<std::vector<std::string>>();
        if (paths.size() != basis.electrode_names.size())
            throw ConfigError("trap file " + path + ": paths length mismatch");
        for (const auto& pth : paths) {
            std::vector<double> z, phi;
            load_basis_table(pth, z, phi);
            basis.basis_fns.push_back(BasisFunction::tabulated(std::move(z), std::move(phi)));
        }
    } else {
        throw ConfigError("trap file " + path + ": basis.kind must be 'gaussian' or 'tabulated'");
    }

    if (j.contains("domain_m")) {
        auto dom = j["domain_m"].get<std::vector<double>>();
        if (dom.size() != 2 || !(dom[0] < dom[1]))
            throw ConfigError("trap file " + path + ": domain_m must be [min, max]");
        basis.z_min = dom[0];
        basis.z_max = dom[1];
    } else {
        basis.z_min = -555e-6;
        basis.z_max = 555e-6;
    }
    def.basis = std::move(basis);
    return def;
}

} // namespace ionwave
