#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "ionwave/trap_model.hpp"
#include "support.hpp"

using namespace ionwave;

namespace {
const PhysicalConstants kBe = PhysicalConstants::beryllium9();
constexpr double kTwoPi = 2.0 * M_PI;
} // namespace

TEST_CASE("eval_potential: zero voltages give zero at any order") {
    ElectrodeBasis b = ElectrodeBasis::gaussian_default();
    AxialPotential p(b, Eigen::VectorXd::Zero(5));
    for (int order = 0; order <= 2; ++order) {
        CHECK(eval_potential(p, 0.0, order) == 0.0);
        CHECK(eval_potential(p, 123e-6, order) == 0.0);
    }
}

TEST_CASE("eval_potential: exactly linear in the voltage vector") {
    ElectrodeBasis b = ElectrodeBasis::gaussian_default();
    auto gen = test::rng(17);
    std::uniform_real_distribution<double> uv(-5.0, 5.0);
    std::uniform_real_distribution<double> uz(-500e-6, 500e-6);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd v1(5), v2(5);
        for (int i = 0; i < 5; ++i) {
            v1[i] = uv(gen);
            v2[i] = uv(gen);
        }
        const double z = uz(gen);
        const double c = uv(gen);
        for (int order = 0; order <= 2; ++order) {
            const double lhs =
                eval_potential(AxialPotential(b, v1 + c * v2), z, order);
            const double rhs = eval_potential(AxialPotential(b, v1), z, order) +
                               c * eval_potential(AxialPotential(b, v2), z, order);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
        }
        // doubling the voltages exactly doubles the potential
        CHECK(eval_potential(AxialPotential(b, 2.0 * v1), z, 0) ==
              doctest::Approx(2.0 * eval_potential(AxialPotential(b, v1), z, 0))
                  .epsilon(1e-15));
    }
}

TEST_CASE("eval_potential: domain violation throws") {
    ElectrodeBasis b = ElectrodeBasis::gaussian_default();
    AxialPotential p(b, Eigen::VectorXd::Ones(5));
    CHECK_THROWS_AS(eval_potential(p, 600e-6, 0), DomainError);
}

TEST_CASE("tabulated basis reproduces its generating gaussian") {
    const double center = -185e-6, width = 100e-6;
    BasisFunction exact = BasisFunction::gaussian(center, width);
    std::vector<double> zs, phis;
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
        const double z = -555e-6 + 1110e-6 * i / n;
        zs.push_back(z);
        phis.push_back(exact.value(z));
    }
    BasisFunction tab = BasisFunction::tabulated(zs, phis);

    auto gen = test::rng(3);
    std::uniform_real_distribution<double> uz(-550e-6, 550e-6);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double z = uz(gen);
        worst = std::max(worst, std::abs(tab.value(z) - exact.value(z)));
    }
    CHECK(worst < 1e-6); // peak value is 1
    CHECK_THROWS_AS(tab.value(600e-6), DomainError);
}

TEST_CASE("find_well: synthetic harmonic well at 1.972 MHz") {
    const double omega = kTwoPi * 1.972e6;
    const double upp = kBe.curvature_from_omega(omega);
    AxialPotential p = test::harmonic_potential(upp, 42e-6);
    const WellParams w = find_well(p, 10e-6, kBe);
    CHECK(w.omega == doctest::Approx(omega).epsilon(1e-9));
    CHECK(w.z0 == doctest::Approx(42e-6).epsilon(1e-9));
    CHECK(w.a == doctest::Approx(0.5 * upp).epsilon(1e-9));
}

TEST_CASE("find_well: symmetric double well found from both sides") {
    // U = b z^4 - |a| z^2, minima at +-sqrt(|a| / 2b)
    const double a = -1e7, b = 1e14;
    AxialPotential p = test::quartic_potential(a, b);
    const double z_min = std::sqrt(-a / (2.0 * b));
    const WellParams left = find_well(p, -0.8 * z_min, kBe);
    const WellParams right = find_well(p, 0.8 * z_min, kBe);
    CHECK(left.z0 == doctest::Approx(-z_min).epsilon(1e-9));
    CHECK(right.z0 == doctest::Approx(z_min).epsilon(1e-9));
    CHECK(std::abs(left.z0 + right.z0) < 1e-9 * z_min + 1e-15);
}

TEST_CASE("find_well: gaussian trap with the zone-A style voltage set") {
    ElectrodeBasis b = ElectrodeBasis::gaussian_default();
    Eigen::VectorXd v(5);
    v << 1.289, 0.327, 2.173, 0.310, 1.311;
    AxialPotential p(b, v);

    // Brute-force grid minimum between O1 (-370 um) and X (0) as the oracle.
    double best_z = 0.0, best_u = 1e300;
    for (int i = 0; i <= 20000; ++i) {
        const double z = -370e-6 + 370e-6 * i / 20000;
        const double u = eval_potential(p, z, 0);
        if (u < best_u) {
            best_u = u;
            best_z = z;
        }
    }
    const WellParams w = find_well(p, best_z, kBe);
    CHECK(w.omega > 0.0);
    CHECK(w.z0 > -370e-6);
    CHECK(w.z0 < 0.0);
    CHECK(std::abs(w.z0 - best_z) < 50e-9); // grid resolution ~18.5 nm
}

TEST_CASE("find_well: no minimum reported as error") {
    // Inverted parabola has only a maximum.
    AxialPotential p = test::harmonic_potential(-1e7);
    CHECK_THROWS_AS(find_well(p, 1e-6, kBe), Error);
}

TEST_CASE("find_well recovers construction over random wells") {
    auto gen = test::rng(11);
    std::uniform_real_distribution<double> uf(0.5e6, 4e6);
    std::uniform_real_distribution<double> uz(-200e-6, 200e-6);
    for (int rep = 0; rep < 25; ++rep) {
        const double omega = kTwoPi * uf(gen);
        const double z0 = uz(gen);
        AxialPotential p = test::harmonic_potential(kBe.curvature_from_omega(omega), z0);
        const WellParams w = find_well(p, z0 + 5e-6, kBe);
        CHECK(w.omega == doctest::Approx(omega).epsilon(1e-9));
        CHECK(w.z0 == doctest::Approx(z0).epsilon(1e-9));
    }
}

TEST_CASE("omega scales as sqrt of the voltage scale") {
    ElectrodeBasis b = ElectrodeBasis::gaussian_default();
    Eigen::VectorXd v(5);
    v << 1.0, 0.2, 1.8, 0.2, 1.0; // symmetric single well near A/B gap? seed at A
    AxialPotential p1(b, v);
    AxialPotential p2(b, 2.0 * v);
    const WellParams w1 = find_well(p1, -185e-6, kBe);
    const WellParams w2 = find_well(p2, -185e-6, kBe);
    CHECK(w2.z0 == doctest::Approx(w1.z0).epsilon(1e-9));
    CHECK(w2.omega == doctest::Approx(std::sqrt(2.0) * w1.omega).epsilon(1e-9));
}

TEST_CASE("fit_quartic: exact quartic recovered to machine precision") {
    const double a = 1e6, b = 1e14;
    AxialPotential p = test::quartic_potential(a, b);
    const QuarticFit fit = fit_quartic(p, 0.0, 0.4 * 185e-6);
    CHECK(fit.a == doctest::Approx(a).epsilon(1e-9));
    CHECK(fit.b == doctest::Approx(b).epsilon(1e-9));
    CHECK(fit.residual < 1e-12);
}

TEST_CASE("fit_quartic: pure harmonic input gives b ~ 0") {
    const double upp = kBe.curvature_from_omega(kTwoPi * 2e6);
    AxialPotential p = test::harmonic_potential(upp);
    const double hw = 0.4 * 185e-6;
    const QuarticFit fit = fit_quartic(p, 0.0, hw);
    CHECK(fit.a == doctest::Approx(0.5 * upp).epsilon(1e-9));
    CHECK(std::abs(fit.b) < 1e-9 * fit.a / (hw * hw));
}

TEST_CASE("fit_quartic: quadratic+quartic about an offset center is exact") {
    auto gen = test::rng(7);
    std::uniform_real_distribution<double> ua(-5e6, 5e6);
    std::uniform_real_distribution<double> ub(1e13, 5e14);
    for (int rep = 0; rep < 10; ++rep) {
        const double a = ua(gen), b = ub(gen);
        AxialPotential p = test::quartic_potential(a, b);
        const QuarticFit fit = fit_quartic(p, 0.0, 60e-6);
        CHECK(fit.a == doctest::Approx(a).epsilon(1e-8));
        CHECK(fit.b == doctest::Approx(b).epsilon(1e-8));
        CHECK(fit.residual < 1e-11);
    }
}

TEST_CASE("fit_quartic: degenerate window errors") {
    AxialPotential p = test::harmonic_potential(1e7);
    CHECK_THROWS_AS(fit_quartic(p, 0.0, -1.0), ArgumentError);
    CHECK_THROWS_AS(fit_quartic(p, 0.0, 1.0), DomainError); // window exits domain
}

TEST_CASE("trap file round trip: gaussian and tabulated") {
    {
        std::ofstream f("trap_gauss.json");
        f << R"({"schema_version":1,"electrodes":["O1","A","X","B","O2"],
                 "basis":{"kind":"gaussian","pitch_m":185e-6,"width_m":100e-6},
                 "domain_m":[-555e-6,555e-6],"ion_mass_u":9.0121831})";
    }
    const TrapDefinition def = load_trap("trap_gauss.json");
    CHECK(def.basis.size() == 5);
    CHECK(def.basis.electrode_index("X") == 2);
    CHECK(def.constants.ion_mass == doctest::Approx(9.0121831 * 1.66053906660e-27));

    // Unknown keys are rejected.
    {
        std::ofstream f("trap_bad.json");
        f << R"({"schema_version":1,"basis":{"kind":"gaussian"},"bogus":3})";
    }
    CHECK_THROWS_AS(load_trap("trap_bad.json"), ConfigError);
    CHECK_THROWS_AS(load_trap("no_such_file.json"), ConfigError);

    // Tabulated table with a malformed header.
    {
        std::ofstream f("tab_bad.csv");
        f << "z,phi\n0,1\n";
    }
    std::vector<double> z, phi;
    CHECK_THROWS_AS(load_basis_table("tab_bad.csv", z, phi), ParseError);
}
