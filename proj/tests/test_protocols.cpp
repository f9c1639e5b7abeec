#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "stasplit/constants.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/protocols.hpp"

using namespace stasplit;
using constants::pi;

namespace {

const double omega0 = 2.0 * pi * 78.0;
const double lambda_f = 190.0;
const double lambda_dot0 = 190.0;
const double tf = 0.055;

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("faquad end points and midpoint") {
    auto fq = faquad_schedule(omega0, lambda_f, tf);
    CHECK(fq.protocol(0.0).delta_tunnel == doctest::Approx(omega0).epsilon(1e-14));
    CHECK(fq.protocol(tf).delta_tunnel == 0.0);
    CHECK(fq.protocol(tf / 3).lambda_bias == lambda_f);
    // constant-adiabaticity ODE integrated at high precision
    CHECK(rel(fq.protocol(tf / 2).delta_tunnel, 100.12212081492565) < 1e-13);
    CHECK(rel(fq.c, omega0 / (2 * lambda_f * std::sqrt(omega0 * omega0 + lambda_f * lambda_f) * tf)) < 1e-15);
}

TEST_CASE("faquad adiabaticity parameter is constant") {
    auto fq = faquad_schedule(omega0, lambda_f, tf);
    for (int i = 0; i <= 1000; ++i) {
        double t = tf * i / 1000.0;
        double d = fq.protocol(t).delta_tunnel;
        double mu = adiabaticity_parameter(lambda_f, d, faquad_delta_rate(omega0, lambda_f, tf, t));
        REQUIRE(rel(mu, fq.c) < 1e-8);
    }
    // the closed-form rate agrees with a finite difference
    auto f = [&](double t) { return fq.protocol(t).delta_tunnel; };
    double t = 0.3 * tf, h = 1e-7;
    CHECK(rel((f(t + h) - f(t - h)) / (2 * h), faquad_delta_rate(omega0, lambda_f, tf, t)) < 1e-6);
}

TEST_CASE("faquad rejects non-positive inputs") {
    CHECK_THROWS_AS(faquad_schedule(0.0, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(faquad_schedule(1.0, -1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(faquad_schedule(1.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("faquad minimum time") {
    ControlProtocol flat(ProtocolKind::tabulated, 1.0, [](double) { return TwoLevelHamiltonian{0.0, omega0}; });
    CHECK(rel(faquad_min_time(flat), 2 * pi / omega0) < 1e-12);
    ControlProtocol split(ProtocolKind::tabulated, 1.0, [](double) { return TwoLevelHamiltonian{lambda_f, 0.0}; });
    CHECK(rel(faquad_min_time(split), 2 * pi / lambda_f) < 1e-12);
    // adaptive 30-digit quadrature
    CHECK(rel(faquad_min_time(faquad_schedule(omega0, lambda_f, tf).protocol), 0.02567411197919325) < 1e-8);
}

TEST_CASE("invariant angle coefficients for the reference design") {
    auto a = design_invariant_angles(omega0, lambda_f, lambda_dot0, tf);
    // closed-form 2x2 eliminations in extended precision
    CHECK(a.theta_coeffs[0] == doctest::Approx(pi / 2));
    CHECK(a.theta_coeffs[1] == 0.0);
    CHECK(a.theta_coeffs[2] == 0.0);
    CHECK(rel(a.theta_coeffs[3], -15519.467708733579) < 1e-10);
    CHECK(rel(a.theta_coeffs[4], -293955.74115356982) < 1e-10);
    CHECK(rel(a.theta_coeffs[5], 7353961.4003296592) < 1e-10);
    CHECK(a.phi_coeffs[0] == doctest::Approx(pi));
    CHECK(a.phi_coeffs[1] == 0.0);
    CHECK(rel(a.phi_coeffs[2], -95.0) < 1e-12);
    CHECK(rel(a.phi_coeffs[3], -13374.016371728043) < 1e-10);
    CHECK(rel(a.phi_coeffs[4], 102908.88841487401) < 1e-10);
}

TEST_CASE("invariant angles satisfy every boundary condition") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        double w = omega0 * (0.5 + u(rng));
        double lf = 50.0 + 400.0 * u(rng);
        double ld = 20.0 + 400.0 * u(rng);
        double t = 0.005 + 0.1 * u(rng);
        auto a = design_invariant_angles(w, lf, ld, t);
        CHECK(rel(a.theta(0.0), pi / 2) < 1e-10);
        CHECK(std::abs(a.theta_dot(0.0)) < 1e-10 * w);
        CHECK(std::abs(a.theta_ddot(0.0)) < 1e-10 * w * ld);
        CHECK(rel(a.theta_dddot(0.0), -w * ld) < 1e-10);
        CHECK(std::abs(a.theta(t)) < 1e-10);
        CHECK(std::abs(a.theta_dot(t)) * t < 1e-10);
        CHECK(rel(a.phi(0.0), pi) < 1e-10);
        CHECK(a.phi_dot(0.0) == 0.0);
        CHECK(rel(a.phi_ddot(0.0), -ld) < 1e-10);
        CHECK(rel(a.phi(t), pi / 2) < 1e-10);
        CHECK(rel(a.phi_dot(t), -lf / 3) < 1e-10);
    }
}

TEST_CASE("invariant angles scale with the final time") {
    auto unit = design_invariant_angles(omega0 * tf, lambda_f * tf, lambda_dot0 * tf * tf, 1.0);
    auto a = design_invariant_angles(omega0, lambda_f, lambda_dot0, tf);
    for (int j = 0; j < 6; ++j)
        CHECK(a.theta_coeffs[j] == doctest::Approx(unit.theta_coeffs[j] / std::pow(tf, j)).epsilon(1e-10));
    for (int j = 0; j < 5; ++j)
        CHECK(a.phi_coeffs[j] == doctest::Approx(unit.phi_coeffs[j] / std::pow(tf, j)).epsilon(1e-10));
}

TEST_CASE("invariant design rejects bad inputs") {
    CHECK_THROWS_AS(design_invariant_angles(omega0, lambda_f, 0.0, tf), ConfigError);
    CHECK_THROWS_AS(design_invariant_angles(omega0, lambda_f, lambda_dot0, 0.0), ConfigError);
    CHECK_THROWS_AS(design_invariant_angles(-omega0, lambda_f, lambda_dot0, tf), ConfigError);
}

TEST_CASE("invariant protocol end points are exact") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int accepted = 0;
    while (accepted < 20) {
        double w = omega0 * (0.5 + u(rng));
        double lf = 50.0 + 400.0 * u(rng);
        double ld = 20.0 + 400.0 * u(rng);
        double t = 0.005 + 0.1 * u(rng);
        ControlProtocol p = [&] {
            try {
                return invariant_protocol(w, lf, ld, t);
            } catch (const NumericalError&) {
                return ControlProtocol(ProtocolKind::tabulated, 1.0, [](double) { return TwoLevelHamiltonian{}; });
            }
        }();
        if (p.kind() != ProtocolKind::invariant)
            continue;
        ++accepted;
        CHECK(rel(p(0.0).delta_tunnel, w) < 1e-9);
        CHECK(p(0.0).lambda_bias == 0.0);
        CHECK(p(t).delta_tunnel == 0.0);
        CHECK(rel(p(t).lambda_bias, lf) < 1e-9);
    }
}

TEST_CASE("end-point limits agree with extrapolated interior values") {
    auto p = invariant_protocol(omega0, lambda_f, lambda_dot0, tf);
    // delta - omega0 and lambda vanish like t^2 and t near 0
    for (int k = 3; k <= 6; ++k) {
        double t = tf * std::pow(10.0, -k);
        CHECK(std::abs(p(t).delta_tunnel - omega0) < 1e3 * omega0 * std::pow(10.0, -k));
        CHECK(std::abs(p(t).lambda_bias) < 1e3 * lambda_f * std::pow(10.0, -k));
        CHECK(std::abs(p(tf - t).lambda_bias - lambda_f) < 1e3 * lambda_f * std::pow(10.0, -k));
        CHECK(std::abs(p(tf - t).delta_tunnel) < 1e3 * omega0 * std::pow(10.0, -k));
    }
    // Richardson on two small offsets reproduces the limit
    double h = tf * 1e-4;
    double ex_d0 = 2 * p(h).delta_tunnel - p(2 * h).delta_tunnel;
    CHECK(rel(ex_d0, omega0) < 1e-6);
    double ex_lf = 2 * p(tf - h).lambda_bias - p(tf - 2 * h).lambda_bias;
    CHECK(rel(ex_lf, lambda_f) < 1e-6);
}

TEST_CASE("reference protocol shape") {
    auto p = invariant_protocol(omega0, lambda_f, lambda_dot0, tf);
    double prev_l = -1.0;
    for (int i = 1; i < 1000; ++i) {
        auto h = p(tf * i / 1000.0);
        CHECK(h.delta_tunnel > 0.0);
        CHECK(h.lambda_bias > prev_l);
        prev_l = h.lambda_bias;
    }
    // the two factored expansions meet smoothly in the middle
    double tm = tf / 2, e = tf * 1e-9;
    CHECK(rel(p(tm - e).delta_tunnel, p(tm + e).delta_tunnel) < 1e-7);
    CHECK(rel(p(tm - e).lambda_bias, p(tm + e).lambda_bias) < 1e-7);
}

TEST_CASE("designs whose controls diverge are rejected") {
    // the cubic theta term alone reaches -omega0 lambda_dot0 tf^3 / 6 ~ -1.9e3 rad
    CHECK_THROWS_AS(invariant_protocol(omega0, lambda_f, lambda_dot0, 0.5), NumericalError);
}

TEST_CASE("linear ramp") {
    auto r = linear_ramp(2.0, 0.1);
    CHECK(r(0.0) == 0.0);
    CHECK(r(0.1) == 2.0);
    CHECK(r(0.05) == doctest::Approx(1.0));
    CHECK_THROWS_AS(linear_ramp(1.0, 0.0), ConfigError);
}

TEST_CASE("protocol csv round trip") {
    auto p = invariant_protocol(omega0, lambda_f, lambda_dot0, tf);
    std::stringstream ss;
    write_protocol_csv(ss, p, 4001);
    std::string text = ss.str();
    CHECK(text.find("t,delta,lambda\n0,") != std::string::npos);
    auto q = read_protocol_csv(ss);
    CHECK(q.kind() == ProtocolKind::tabulated);
    CHECK(rel(q(0.0).delta_tunnel, omega0) < 1e-11);
    CHECK(rel(q(tf).lambda_bias, lambda_f) < 1e-11);
    for (double t : {0.013, 0.027, 0.041})
        CHECK(std::abs(q(t).delta_tunnel - p(t).delta_tunnel) < 1e-6 * omega0);
    std::stringstream bad("t,delta\n0,1\n");
    CHECK_THROWS_AS(read_protocol_csv(bad), ConfigError);
}

TEST_CASE("protocol evaluation outside the interval fails") {
    auto p = faquad_schedule(omega0, lambda_f, tf).protocol;
    CHECK_THROWS_AS(p(-1e-3), NumericalError);
    CHECK_THROWS_AS(p(2 * tf), NumericalError);
}
