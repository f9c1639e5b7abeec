#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stasplit/constants.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/ffsplit.hpp"
#include "stasplit/lattice1d.hpp"

using namespace stasplit;
using constants::hbar;
using constants::mass_rb87;
using constants::pi;

namespace {

const double omega = 780.0;
const double x_f = 4e-6;
const double hw = hbar * omega;
const double a0 = std::sqrt(hbar / (mass_rb87 * omega));
const Grid1D grid(-15e-6, 15e-6, 2048);

double g1N_of(double g_hat) { return g_hat * hw * a0; }

double worst_residual(const AmplitudeDesign& d, int samples) {
    double worst = 0.0;
    for (int j = 0; j <= samples; ++j) {
        double t = d.t_final() * j / samples;
        auto amp = d.sample(t, grid);
        auto ph = phase_solve(amp, grid, mass_rb87);
        worst = std::max(worst, imaginary_residual(amp, ph, grid, mass_rb87).cwiseAbs().maxCoeff());
    }
    return worst / hw;
}

// |(H - mu) psi| for the designed state and the constructed potential
double stationarity(const FastForward& ff, double t) {
    SpectralKinetic kin(grid, mass_rb87);
    auto psi = ff.designed_state(t);
    Eigen::VectorXcd hp = apply_hamiltonian(kin, psi.amplitudes, ff.potential(t), ff.g1N());
    Complex mu = psi.overlap(Wavefunction1D(grid, hp));
    return std::sqrt(grid_norm2(hp - mu * psi.amplitudes, grid.spacing())) / hw;
}

double left_weight(const Wavefunction1D& psi) {
    double w = 0.0;
    for (Eigen::Index i = 0; i < grid.n_points / 2; ++i)
        w += std::norm(psi.amplitudes(i));
    return w * grid.spacing();
}

}  // namespace

TEST_CASE("boundary times carry no phase") {
    auto d = AmplitudeDesign::two_bump(x_f, omega, 0.02);
    for (double t : {0.0, 0.02}) {
        auto ph = phase_solve(d, t, grid);
        CHECK(ph.phi.cwiseAbs().maxCoeff() == 0.0);
        CHECK(ph.phi_x.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(d.x0_dot(0.0) == 0.0);
    CHECK(d.x0_dot(0.02) == 0.0);
    CHECK(d.x0(0.02) == doctest::Approx(x_f));
}

TEST_CASE("phase is even and its slope odd") {
    auto d = AmplitudeDesign::two_bump(x_f, omega, 0.02);
    auto ph = phase_solve(d, 0.007, grid);
    const Eigen::Index n = grid.n_points;
    CHECK(ph.begin == n - ph.end);
    CHECK((ph.phi - ph.phi.reverse()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ph.phi_x + ph.phi_x.reverse()).cwiseAbs().maxCoeff() == 0.0);
    // phi' grows linearly through the origin
    double slope = ph.phi_x(n / 2) / grid.x(n / 2);
    CHECK(ph.phi_x(n / 2 + 1) / grid.x(n / 2 + 1) == doctest::Approx(slope).epsilon(1e-3));
}

TEST_CASE("imaginary part of the potential vanishes") {
    CHECK(worst_residual(AmplitudeDesign::two_bump(x_f, omega, 0.02), 40) < 1e-6);
    CHECK(worst_residual(AmplitudeDesign::two_bump(x_f, omega, 0.32), 40) < 1e-6);
    CHECK(worst_residual(AmplitudeDesign::interpolated_gpe(x_f, omega, 0.02, g1N_of(5.0), grid), 40) < 1e-6);
}

TEST_CASE("phase slope matches the closed form for two Gaussians") {
    // For b = G- + G+ the integral of r_t r has an erf closed form.
    const double t_f = 0.02, a = a0, sp = std::sqrt(pi);
    auto d = AmplitudeDesign::two_bump(x_f, omega, t_f);
    for (double s : {0.3, 0.5, 0.9}) {
        double t = s * t_f, x0 = d.x0(t), v = d.x0_dot(t);
        auto amp = d.sample(t, grid);
        auto ph = phase_solve(amp, grid, mass_rb87);
        double e = std::exp(-x0 * x0 / (a * a));
        double norm = sp * a * (1.0 + e), norm_t = -2.0 * sp * x0 / a * e * v;
        double rmax = amp.r.maxCoeff(), worst = 0.0;
        for (Eigen::Index i = grid.n_points / 2; i < ph.end; ++i) {
            double x = grid.x(i);
            if (amp.r(i) < 1e-3 * rmax)
                continue;
            double gm = std::exp(-(x - x0) * (x - x0) / (a * a)), gp = std::exp(-(x + x0) * (x + x0) / (a * a));
            double in = sp * a / 2.0 * (std::erf((x - x0) / a) + std::erf((x + x0) / a) + 2.0 * e * std::erf(x / a));
            double in_t = v * (-gm + gp - 2.0 * sp * x0 / a * e * std::erf(x / a));
            // q = int_0^x r_t r = (1/2) d/dt (int_0^x b^2) / norm with z^2 = 1 / norm
            double q = 0.5 * (in_t / norm - in * norm_t / (norm * norm));
            double b = std::exp(-(x - x0) * (x - x0) / (2 * a * a)) + std::exp(-(x + x0) * (x + x0) / (2 * a * a));
            double expect = -2.0 * mass_rb87 / hbar * q / (b * b / norm);
            worst = std::max(worst, std::abs(ph.phi_x(i) - expect) / std::abs(expect));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("phase solve refuses an amplitude that vanishes inside") {
    auto d = AmplitudeDesign::two_bump(10e-6, omega, 0.02);
    CHECK_THROWS_AS(phase_solve(d, 0.019, grid), NumericalError);
    CHECK_THROWS_AS(phase_solve(d, 0.01, Grid1D(-15e-6, 14e-6, 2048)), ConfigError);
}

TEST_CASE("initial potential is the harmonic trap") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.02));
    Eigen::VectorXd v = ff.potential(0.0);
    double worst = 0.0, scale = 0.5 * mass_rb87 * omega * omega * 9.0 * a0 * a0;
    double v_min = v.minCoeff();
    for (Eigen::Index i = 0; i < grid.n_points; ++i) {
        double x = grid.x(i);
        if (std::abs(x) < 3.0 * a0)
            worst = std::max(worst, std::abs(v(i) - v_min - 0.5 * mass_rb87 * omega * omega * x * x));
    }
    CHECK(worst < 0.01 * scale);
    CHECK(v_min == 0.0);
}

TEST_CASE("final potential is a symmetric double well at +-x_f") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.02));
    Eigen::VectorXd v = ff.potential(0.02);
    std::vector<double> minima;
    for (Eigen::Index i = 1; i + 1 < grid.n_points; ++i)
        if (v(i) < v(i - 1) && v(i) < v(i + 1))
            minima.push_back(grid.x(i));
    REQUIRE(minima.size() == 2);
    CHECK(std::abs(minima[0] + x_f) < 0.05 * x_f);
    CHECK(std::abs(minima[1] - x_f) < 0.05 * x_f);
    CHECK((v - v.reverse()).cwiseAbs().maxCoeff() < 1e-12 * v.maxCoeff());
}

TEST_CASE("designed state is stationary at the end points") {
    FastForward lin(AmplitudeDesign::two_bump(x_f, omega, 0.32));
    CHECK(stationarity(lin, 0.0) < 1e-6);
    CHECK(stationarity(lin, 0.32) < 1e-6);
    FastForward gpe(AmplitudeDesign::interpolated_gpe(x_f, omega, 0.32, g1N_of(1.0), grid));
    CHECK(stationarity(gpe, 0.0) < 1e-6);
    CHECK(stationarity(gpe, 0.32) < 1e-6);
}

TEST_CASE("interpolated design without interaction is the two-bump design") {
    auto a = AmplitudeDesign::two_bump(x_f, omega, 0.02);
    auto b = AmplitudeDesign::interpolated_gpe(x_f, omega, 0.02, 0.0, grid);
    CHECK(b.kind() == AmplitudeKind::interpolated_gpe);
    for (double t : {0.0, 0.006, 0.013, 0.02}) {
        auto sa = a.sample(t, grid), sb = b.sample(t, grid);
        double scale = sa.r.maxCoeff();
        CHECK((sa.r - sb.r).cwiseAbs().maxCoeff() < 1e-6 * scale);
        CHECK((sa.r_t - sb.r_t).cwiseAbs().maxCoeff() < 1e-6 * scale * omega);
    }
    CHECK_THROWS_AS(b.sample(0.01, Grid1D(-20e-6, 20e-6, 2048)), ConfigError);
}

TEST_CASE("perturbation adds a step") {
    Grid1D g(-64e-6, 63e-6, 128);  // has a node at x = 0
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(128, 1.0, 2.0);
    CHECK(perturbed_potential(v, 0.0, g) == v);
    Eigen::VectorXd p = perturbed_potential(v, 0.25, g);
    for (Eigen::Index i = 0; i < 128; ++i) {
        double x = g.x(i);
        double add = x < -1e-12 ? 0.0 : x > 1e-12 ? 0.25 : 0.125;
        CHECK(p(i) == doctest::Approx(v(i) + add).epsilon(1e-15));
    }
    Eigen::VectorXd q = perturbed_potential(Eigen::VectorXd(Eigen::VectorXd::Zero(grid.n_points)), 1.0, grid);
    CHECK(q.head(grid.n_points / 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(q.tail(grid.n_points / 2).minCoeff() == 1.0);
}

TEST_CASE("a large bias localizes the ground state in the left well") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.32));
    Eigen::VectorXd v = ff.potential(0.32);
    CHECK(left_weight(ff_ground_state(ff, v)) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(left_weight(ff_ground_state(ff, perturbed_potential(v, 1e-4 * hw, grid))) > 0.999);
}

TEST_CASE("unperturbed shortcut is exact") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.02));
    auto q = fidelity_quad(ff, 0.0);
    CHECK(q.F_S >= 1.0 - 1e-6);
    CHECK(q.F_D >= 1.0 - 1e-6);
    CHECK(q.F_D0 >= 1.0 - 1e-6);
    CHECK(q.F_I >= 1.0 - 1e-6);
}

TEST_CASE("bias beyond the splitting but inside the sudden range") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.02));
    const double lambda = 1e-4 * hw;
    REQUIRE(lambda <= sudden_marker(0.02));
    auto q = fidelity_quad(ff, lambda);
    CHECK(q.F_S == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.02 * std::sqrt(2.0)));
    CHECK(q.F_D0 > 0.99);
    auto m = moving_two_mode(ff, lambda);
    CHECK(std::abs(m.F_S - q.F_S) < 0.02);
    CHECK(std::abs(m.F_D - q.F_D) < 0.02);
    CHECK(std::abs(m.F_D0 - q.F_D0) < 0.02);
    CHECK(std::abs(m.F_I - q.F_I) < 0.02);
    CHECK(structural_fidelity(ff, lambda) == doctest::Approx(q.F_S).epsilon(1e-9));
}

TEST_CASE("two-mode model") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.32));
    auto split = two_mode_splitting(ff, 200);
    REQUIRE(split.times.size() == 200);
    CHECK(split.times.back() == 0.32);
    // the splitting closes monotonically as the barrier rises
    for (std::size_t j = 1; j < split.delta.size(); ++j)
        CHECK(split.delta[j] < split.delta[j - 1]);
    CHECK(split.delta.front() == doctest::Approx(omega).epsilon(1e-3));

    auto zero = moving_two_mode(split, 0.0);
    CHECK(zero.F_D0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(zero.F_S == doctest::Approx(1.0).epsilon(1e-12));

    const double marker = sudden_marker(0.32), bound = sudden_bound(0.32);
    CHECK(marker == doctest::Approx(0.1 * bound));
    for (double f : {1e-3, 0.1, 0.5, 1.0})
        CHECK(moving_two_mode(split, f * marker).F_D0 >= 0.99);
    // the sudden picture holds well below 2 hbar / t_f and fails beyond it
    CHECK(moving_two_mode(split, 0.1 * bound).F_D0 > 0.99);
    CHECK(moving_two_mode(split, 3.0 * bound).F_D0 < 0.9);

    auto fine = two_mode_splitting(ff, 400);
    for (double l : {1e-6, 1e-4, 1e-3, 1e-2}) {
        auto a = moving_two_mode(split, l * hw), b = moving_two_mode(fine, l * hw);
        CHECK(std::abs(a.F_D0 - b.F_D0) < 1e-3);
        CHECK(std::abs(a.F_D - b.F_D) < 1e-3);
    }
}

TEST_CASE("structural fidelity drops near the final splitting") {
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.32));
    auto s = symmetric_eigenpairs(ff.potential(0.32), grid, mass_rb87, 2);
    const double delta = hbar * (s.energies(1) - s.energies(0));
    // bisection in log lambda for F_S = 0.9
    double lo = 1e-3 * delta, hi = 1e3 * delta;
    REQUIRE(structural_fidelity(ff, lo) > 0.9);
    REQUIRE(structural_fidelity(ff, hi) < 0.9);
    for (int k = 0; k < 30; ++k) {
        double mid = std::sqrt(lo * hi);
        (structural_fidelity(ff, mid) > 0.9 ? lo : hi) = mid;
    }
    CHECK(lo > delta / 3.0);
    CHECK(lo < 3.0 * delta);
}

TEST_CASE("harmonic-well imbalance") {
    CHECK(appendix_a_imbalance(0.0, omega, 1.0) == 0.0);
    const double g_c = std::sqrt(2.0 * pi) * 0.02;
    CHECK(appendix_a_imbalance(0.02 * hw, omega, g_c) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(appendix_a_imbalance(0.04 * hw, omega, g_c) == 1.0);
    CHECK(collapse_bias(omega, g_c) == doctest::Approx(0.02 * hw).epsilon(1e-12));
    CHECK(appendix_a_imbalance(0.1 * hw, omega, 9.5) == doctest::Approx(0.0264).epsilon(0.01));
    CHECK_THROWS_AS(appendix_a_imbalance(0.1 * hw, omega, 0.0), ConfigError);

    // grid search over N_R against the closed form
    for (double g : {0.5, 1.0, 3.0, 9.5}) {
        for (double l : {0.005, 0.02, 0.05, 0.1}) {
            HarmonicWellEnergies e{l * hw, omega, g};
            double closed = appendix_a_imbalance(l * hw, omega, g);
            if (closed >= 0.5)
                continue;
            double best = 0.0, best_e = e.total(0.0);
            for (int k = 1; k <= 200000; ++k) {
                double nr = k / 200000.0;
                if (e.total(nr) < best_e) {
                    best_e = e.total(nr);
                    best = nr;
                }
            }
            double searched = 1.0 - 2.0 * best;
            CHECK(searched == doctest::Approx(closed).epsilon(0.01));
            CHECK(minimized_imbalance(e) == doctest::Approx(closed).epsilon(0.01));
        }
    }
}

TEST_CASE("scan keeps the input order across workers") {
    FastForwardOptions o;
    o.grid = Grid1D(-15e-6, 15e-6, 1024);
    o.dt = 1e-5;
    FastForward ff(AmplitudeDesign::two_bump(x_f, omega, 0.005), o);
    std::vector<double> lambdas{1e-3, 0.0, 1e-5, 1e-4};
    TwoModeOptions m;
    m.n_slices = 20;
    auto one = fidelity_scan(ff, lambdas, 1, m);
    auto three = fidelity_scan(ff, lambdas, 3, m);
    REQUIRE(one.size() == 4);
    REQUIRE(three.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(one[i].lambda_over_hbar_omega == lambdas[i]);
        CHECK(three[i].lambda_over_hbar_omega == lambdas[i]);
        CHECK(three[i].full.F_D == one[i].full.F_D);
        CHECK(three[i].model.F_D0 == one[i].model.F_D0);
    }
    CHECK(one[1].full.F_S >= 1.0 - 1e-9);
    CHECK_THROWS_AS(fidelity_scan(ff, lambdas, 0, m), ConfigError);

    std::ostringstream csv;
    write_fidelity_scan_csv(csv, one);
    std::string first = csv.str().substr(0, csv.str().find('\n'));
    CHECK(first == "lambda_over_hbar_omega,F_S,F_D,F_D0,F_I,model_F_S,model_F_D,model_F_D0");
    std::ostringstream empty;
    write_fidelity_scan_csv(empty, {});
    CHECK(empty.str() == first + "\n");
}
