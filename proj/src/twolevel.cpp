#include "stasplit/twolevel.hpp"

#include <cmath>

#include "stasplit/constants.hpp"
#include "stasplit/control_protocol.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

Eigen::Matrix2cd TwoLevelHamiltonian::matrix() const {
    Eigen::Matrix2cd h;
    h << -0.5 * lambda_bias, -0.5 * delta_tunnel,
         -0.5 * delta_tunnel, 0.5 * lambda_bias;
    return h;
}

MixingAngle MixingAngle::of(const TwoLevelHamiltonian& h) {
    if (h.lambda_bias == 0.0 && h.delta_tunnel == 0.0)
        throw NumericalError("mixing angle undefined for lambda = delta = 0");
    return {std::atan2(h.delta_tunnel, h.lambda_bias)};
}

namespace {

// Real non-negative c_L, or c_R when c_L vanishes.
TwoLevelAmplitudes fix_phase(TwoLevelAmplitudes a) {
    Complex ref = std::abs(a.c_L) > 1e-12 ? a.c_L : a.c_R;
    if (std::abs(ref) == 0.0)
        return a;
    Complex phase = std::conj(ref) / std::abs(ref);
    a.c_L *= phase;
    a.c_R *= phase;
    if (std::abs(a.c_L) > 1e-12)
        a.c_L = std::abs(a.c_L);
    else
        a.c_R = std::abs(a.c_R);
    return a;
}

}  // namespace

TwoLevelEigensystem eigensystem(const TwoLevelHamiltonian& h) {
    double alpha = MixingAngle::of(h).alpha;
    double half = 0.5 * std::hypot(h.lambda_bias, h.delta_tunnel);
    double c = std::cos(0.5 * alpha);
    double s = std::sin(0.5 * alpha);
    TwoLevelEigensystem es;
    es.e_minus = -half;
    es.e_plus = half;
    es.psi_minus = fix_phase({c, s});
    es.psi_plus = fix_phase({s, -c});
    return es;
}

double fidelity(const TwoLevelAmplitudes& a, const TwoLevelAmplitudes& b) {
    return std::abs(a.vector().dot(b.vector()));
}

double adiabaticity_parameter(double lambda, double delta, double delta_dot) {
    double r2 = lambda * lambda + delta * delta;
    if (r2 == 0.0)
        throw NumericalError("adiabaticity parameter undefined for lambda = delta = 0");
    return std::abs(lambda * delta_dot) / (2.0 * r2 * std::sqrt(r2));
}

Eigen::Vector2cd rk4_integrate(const TwoLevelGenerator& h, Eigen::Vector2cd psi, double t0, double t1,
                               double dt) {
    if (!(dt > 0.0))
        throw ConfigError("two-level propagation: dt must be positive");
    if (t1 <= t0)
        return psi;
    const Complex mi(0.0, -1.0);
    auto n = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
    n = std::max(n, 1L);
    double step = (t1 - t0) / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
        double t = t0 + step * static_cast<double>(i);
        Eigen::Vector2cd k1 = mi * (h(t, psi) * psi);
        Eigen::Vector2cd y = psi + 0.5 * step * k1;
        Eigen::Vector2cd k2 = mi * (h(t + 0.5 * step, y) * y);
        y = psi + 0.5 * step * k2;
        Eigen::Vector2cd k3 = mi * (h(t + 0.5 * step, y) * y);
        y = psi + step * k3;
        Eigen::Vector2cd k4 = mi * (h(t + step, y) * y);
        psi += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return psi;
}

TwoLevelAmplitudes propagate(const ControlProtocol& protocol, const TwoLevelAmplitudes& psi0,
                             double t_final, double dt) {
    if (t_final > protocol.t_final() * (1.0 + 1e-12))
        throw ConfigError("two-level propagation beyond the protocol's t_final");
    auto gen = [&protocol](double t, const Eigen::Vector2cd&) { return protocol(t).matrix(); };
    return TwoLevelAmplitudes::from_vector(rk4_integrate(gen, psi0.vector(), 0.0, t_final, dt));
}

double default_step(const ControlProtocol& protocol, double t_final) {
    double hmax = 0.0;
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
        auto h = protocol(t_final * i / n);
        hmax = std::max(hmax, 0.5 * std::hypot(h.lambda_bias, h.delta_tunnel));
    }
    double dt = t_final / 20000.0;
    if (hmax > 0.0)
        dt = std::min(dt, 2.0 * constants::pi / (200.0 * hmax));
    return dt;
}

}  // namespace stasplit
