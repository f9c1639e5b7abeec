#pragma once

#include <Eigen/Dense>

#include <functional>

#include "grid.hpp"

namespace stasplit {

class ControlProtocol;

// H/hbar in the (L, R) basis: diag(-lambda/2, +lambda/2), off-diagonal -delta/2.
struct TwoLevelHamiltonian {
    double lambda_bias = 0.0;   // rad/s
    double delta_tunnel = 0.0;  // rad/s

    Eigen::Matrix2cd matrix() const;
};

struct TwoLevelAmplitudes {
    Complex c_L{1.0, 0.0};
    Complex c_R{0.0, 0.0};

    Eigen::Vector2cd vector() const { return {c_L, c_R}; }
    static TwoLevelAmplitudes from_vector(const Eigen::Vector2cd& v) { return {v(0), v(1)}; }
    double norm() const { return std::sqrt(std::norm(c_L) + std::norm(c_R)); }
};

struct MixingAngle {
    double alpha = 0.0;
    static MixingAngle of(const TwoLevelHamiltonian& h);
};

struct TwoLevelEigensystem {
    double e_minus = 0.0;
    double e_plus = 0.0;
    TwoLevelAmplitudes psi_minus;
    TwoLevelAmplitudes psi_plus;
};

TwoLevelEigensystem eigensystem(const TwoLevelHamiltonian& h);

// |a^dagger b|
double fidelity(const TwoLevelAmplitudes& a, const TwoLevelAmplitudes& b);

double adiabaticity_parameter(double lambda, double delta, double delta_dot);

// Right-hand side generator for the RK4 stepper: returns H/hbar at (t, psi).
// The psi argument lets nonlinear two-mode models reuse the integrator.
using TwoLevelGenerator = std::function<Eigen::Matrix2cd(double, const Eigen::Vector2cd&)>;

Eigen::Vector2cd rk4_integrate(const TwoLevelGenerator& h, Eigen::Vector2cd psi, double t0, double t1,
                               double dt);

TwoLevelAmplitudes propagate(const ControlProtocol& protocol, const TwoLevelAmplitudes& psi0,
                             double t_final, double dt);

// min(t_f/20000, 2 pi / (200 max ||H||)) with the max sampled on the protocol.
double default_step(const ControlProtocol& protocol, double t_final);

}  // namespace stasplit
