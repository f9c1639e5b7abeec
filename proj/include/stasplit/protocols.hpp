#pragma once

#include <array>

#include "control_protocol.hpp"

namespace stasplit {

struct FaquadSchedule {
    ControlProtocol protocol;
    double c = 0.0;  // the constant adiabaticity parameter
};

// delta(t) = w0 l (tf - t) / sqrt(l^2 tf^2 + w0^2 t (2 tf - t)), lambda held constant.
FaquadSchedule faquad_schedule(double omega0, double lambda, double t_final);
double faquad_delta_rate(double omega0, double lambda, double t_final, double t);

// 2 pi / integral_0^1 sqrt(lambda^2 + delta^2) ds
double faquad_min_time(const ControlProtocol& protocol);

// Polynomial angles of the two-level invariant, theta = sum a_j t^j, phi = sum b_j t^j.
struct AnglePair {
    std::array<double, 6> theta_coeffs{};
    std::array<double, 5> phi_coeffs{};
    double t_final = 0.0;

    double theta(double t) const;
    double theta_dot(double t) const;
    double theta_ddot(double t) const;
    double theta_dddot(double t) const;
    double phi(double t) const;
    double phi_dot(double t) const;
    double phi_ddot(double t) const;
};

AnglePair design_invariant_angles(double omega0, double lambda_f, double lambda_dot0, double t_final);

// delta = -theta'/sin(phi), lambda = -delta cot(theta) cos(phi) - phi'.
// Rejects angle pairs whose controls diverge inside (0, t_f).
ControlProtocol protocol_from_angles(const AnglePair& angles);

inline ControlProtocol invariant_protocol(double omega0, double lambda_f, double lambda_dot0,
                                          double t_final) {
    return protocol_from_angles(design_invariant_angles(omega0, lambda_f, lambda_dot0, t_final));
}

struct ScalarSchedule {
    double t_final = 0.0;
    double final_value = 0.0;

    double operator()(double t) const { return final_value * t / t_final; }
};

ScalarSchedule linear_ramp(double v0_final, double t_final);

}  // namespace stasplit
