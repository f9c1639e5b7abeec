#include "stasplit/protocols.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

#include "stasplit/constants.hpp"
#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

using constants::pi;

FaquadSchedule faquad_schedule(double omega0, double lambda, double t_final) {
    if (!(omega0 > 0.0) || !(lambda > 0.0) || !(t_final > 0.0))
        throw ConfigError("faquad: omega0, lambda and t_final must be positive");
    double c = omega0 / (2.0 * lambda * std::sqrt(omega0 * omega0 + lambda * lambda) * t_final);
    ControlProtocol p(ProtocolKind::faquad, t_final, [=](double t) {
        if (t >= t_final)
            return TwoLevelHamiltonian{lambda, 0.0};
        double d = lambda * lambda * t_final * t_final + omega0 * omega0 * t * (2.0 * t_final - t);
        return TwoLevelHamiltonian{lambda, omega0 * lambda * (t_final - t) / std::sqrt(d)};
    });
    return {std::move(p), c};
}

double faquad_delta_rate(double omega0, double lambda, double t_final, double t) {
    double d = lambda * lambda * t_final * t_final + omega0 * omega0 * t * (2.0 * t_final - t);
    return -omega0 * lambda * (lambda * lambda + omega0 * omega0) * t_final * t_final / (d * std::sqrt(d));
}

double faquad_min_time(const ControlProtocol& protocol) {
    double tf = protocol.t_final();
    auto f = [&](double s) {
        auto h = protocol(std::clamp(s, 0.0, 1.0) * tf);
        return std::hypot(h.lambda_bias, h.delta_tunnel);
    };
    double err = 0.0;
    double phi12 = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 20, 1e-12, &err);
    if (!(phi12 > 0.0))
        throw NumericalError("faquad_min_time: zero gap integral");
    return 2.0 * pi / phi12;
}

namespace {

template <std::size_t N>
double poly(const std::array<double, N>& c, double t, int deriv) {
    double acc = 0.0;
    for (std::size_t j = N; j-- > static_cast<std::size_t>(deriv);) {
        double f = 1.0;
        for (int k = 0; k < deriv; ++k)
            f *= static_cast<double>(j - k);
        acc = acc * t + f * c[j];
    }
    return acc;
}

}  // namespace

double AnglePair::theta(double t) const { return poly(theta_coeffs, t, 0); }
double AnglePair::theta_dot(double t) const { return poly(theta_coeffs, t, 1); }
double AnglePair::theta_ddot(double t) const { return poly(theta_coeffs, t, 2); }
double AnglePair::theta_dddot(double t) const { return poly(theta_coeffs, t, 3); }
double AnglePair::phi(double t) const { return poly(phi_coeffs, t, 0); }
double AnglePair::phi_dot(double t) const { return poly(phi_coeffs, t, 1); }
double AnglePair::phi_ddot(double t) const { return poly(phi_coeffs, t, 2); }

namespace {

// Row of d^k/du^k [1, u, ..., u^{n-1}] at u.
Eigen::RowVectorXd derivative_row(int n, double u, int k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    for (int j = k; j < n; ++j) {
        double f = 1.0;
        for (int m = 0; m < k; ++m)
            f *= j - m;
        row(j) = f * std::pow(u, j - k);
    }
    return row;
}

// Solves the boundary system on the unit interval and checks its residual.
Eigen::VectorXd solve_boundary(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < a.rows())
        throw NumericalError(std::string("singular boundary system for ") + what);
    Eigen::VectorXd x = lu.solve(b);
    double res = (a * x - b).norm();
    if (res > 1e-12 * std::max(1.0, b.norm()))
        throw NumericalError(std::string("inaccurate boundary solve for ") + what);
    return x;
}

}  // namespace

AnglePair design_invariant_angles(double omega0, double lambda_f, double lambda_dot0, double t_final) {
    if (lambda_dot0 == 0.0)
        throw ConfigError("invariant design: lambda_dot0 must be nonzero");
    if (!(omega0 > 0.0) || !(lambda_f > 0.0) || !(lambda_dot0 > 0.0))
        throw ConfigError("invariant design: omega0, lambda_f and lambda_dot0 must be positive");
    if (!(t_final > 0.0))
        throw ConfigError("invariant design: t_final must be positive");

    // Conditions on the unit interval u = t / t_f; u-derivatives carry t_f^k.
    const double tf = t_final;
    Eigen::MatrixXd at(6, 6);
    Eigen::VectorXd bt(6);
    at << derivative_row(6, 0.0, 0), derivative_row(6, 0.0, 1), derivative_row(6, 0.0, 2),
          derivative_row(6, 0.0, 3), derivative_row(6, 1.0, 0), derivative_row(6, 1.0, 1);
    bt << pi / 2, 0.0, 0.0, -omega0 * lambda_dot0 * tf * tf * tf, 0.0, 0.0;
    Eigen::VectorXd alpha = solve_boundary(at, bt, "theta");

    Eigen::MatrixXd ap(5, 5);
    Eigen::VectorXd bp(5);
    ap << derivative_row(5, 0.0, 0), derivative_row(5, 0.0, 1), derivative_row(5, 0.0, 2),
          derivative_row(5, 1.0, 0), derivative_row(5, 1.0, 1);
    bp << pi, 0.0, -lambda_dot0 * tf * tf, pi / 2, -lambda_f * tf / 3.0;
    Eigen::VectorXd beta = solve_boundary(ap, bp, "phi");

    AnglePair out;
    out.t_final = tf;
    for (int j = 0; j < 6; ++j)
        out.theta_coeffs[j] = alpha(j) / std::pow(tf, j);
    for (int j = 0; j < 5; ++j)
        out.phi_coeffs[j] = beta(j) / std::pow(tf, j);
    return out;
}

namespace {

double sinc(double z) {
    if (std::abs(z) < 1e-4) {
        double z2 = z * z;
        return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
    }
    return std::sin(z) / z;
}

double horner(const double* c, int n, double x) {
    double acc = 0.0;
    for (int j = n; j-- > 0;)
        acc = acc * x + c[j];
    return acc;
}

// The angle polynomials re-expanded around both end points so that the
// 0/0 quotients in the control formulas cancel analytically.
struct FactoredAngles {
    double tf;
    // near u = 0: theta - pi/2 = u^3 P, theta_u = u^2 Q, phi - pi = u^2 S, phi_u = u Sd
    double p[3], q[3], s[3], sd[3];
    // near u = 1, w = u - 1: theta = w^2 Pt, theta_u = w Qt, phi - pi/2 = w Rt, phi_u = Rd
    double pt[4], qt[4], rt[4], rd[4];

    explicit FactoredAngles(const AnglePair& a) : tf(a.t_final) {
        double al[6], be[5];
        for (int j = 0; j < 6; ++j)
            al[j] = a.theta_coeffs[j] * std::pow(tf, j);
        for (int j = 0; j < 5; ++j)
            be[j] = a.phi_coeffs[j] * std::pow(tf, j);
        for (int k = 0; k < 3; ++k) {
            p[k] = al[k + 3];
            q[k] = (k + 3) * al[k + 3];
            s[k] = be[k + 2];
            sd[k] = (k + 2) * be[k + 2];
        }
        // Taylor shift to u = 1; the constant and linear theta terms and the
        // constant phi term vanish by construction.
        double ga[6] = {}, et[5] = {};
        for (int k = 0; k < 6; ++k)
            for (int j = k; j < 6; ++j)
                ga[k] += binom(j, k) * al[j];
        for (int k = 0; k < 5; ++k)
            for (int j = k; j < 5; ++j)
                et[k] += binom(j, k) * be[j];
        for (int k = 0; k < 4; ++k) {
            pt[k] = ga[k + 2];
            qt[k] = (k + 2) * ga[k + 2];
            rt[k] = et[k + 1];
            rd[k] = (k + 1) * et[k + 1];
        }
    }

    static double binom(int n, int k) {
        double r = 1.0;
        for (int i = 1; i <= k; ++i)
            r = r * (n - k + i) / i;
        return r;
    }

    // sign of sin(phi) and of theta on the open interval, from the factored forms
    double sin_phi_sign(double u) const {
        if (u <= 0.5)
            return -std::sin(u * u * horner(s, 3, u));
        double w = u - 1.0;
        return std::cos(w * horner(rt, 4, w));
    }
    double theta_value(double u) const {
        if (u <= 0.5)
            return pi / 2 + u * u * u * horner(p, 3, u);
        double w = u - 1.0;
        return w * w * horner(pt, 4, w);
    }

    TwoLevelHamiltonian eval(double t) const {
        double u = t / tf;
        if (u <= 0.5) {
            double su = horner(s, 3, u);
            double x = u * u * su;
            double delta = horner(q, 3, u) / (tf * su * sinc(x));
            double eps = u * u * u * horner(p, 3, u);
            double lambda = -delta * std::tan(eps) * std::cos(x) - u * horner(sd, 3, u) / tf;
            return {lambda, delta};
        }
        double w = u - 1.0;
        double ptw = horner(pt, 4, w);
        double qtw = horner(qt, 4, w);
        double rtw = horner(rt, 4, w);
        double y = w * rtw;
        double theta = w * w * ptw;
        double delta = -w * qtw / (tf * std::cos(y));
        double lambda = -qtw * rtw * sinc(y) * std::cos(theta) / (tf * std::cos(y) * ptw * sinc(theta)) -
                        horner(rd, 4, w) / tf;
        return {lambda, delta};
    }
};

}  // namespace

ControlProtocol protocol_from_angles(const AnglePair& angles) {
    if (!(angles.t_final > 0.0))
        throw ConfigError("protocol_from_angles: t_final must be positive");
    FactoredAngles f(angles);
    if (!(f.s[0] < 0.0) || !(f.pt[0] > 0.0))
        throw NumericalError("invariant protocol singular: theta or sin(phi) approaches an end point with the wrong sign");
    // sin(phi) and sin(theta) must stay positive strictly inside (0, t_f),
    // otherwise delta or lambda diverge there.
    const int n = 20000;
    for (int i = 1; i < n; ++i) {
        double u = static_cast<double>(i) / n;
        double th = f.theta_value(u);
        if (!(f.sin_phi_sign(u) > 0.0) || !(th > 0.0 && th < pi))
            throw NumericalError("invariant protocol singular: sin(phi) or theta vanishes near t = " +
                                 format_number(u * angles.t_final) + " s");
    }
    return ControlProtocol(ProtocolKind::invariant, angles.t_final, [f](double t) { return f.eval(t); });
}

ScalarSchedule linear_ramp(double v0_final, double t_final) {
    if (!(t_final > 0.0))
        throw ConfigError("linear ramp: t_final must be positive");
    return {t_final, v0_final};
}

}  // namespace stasplit
