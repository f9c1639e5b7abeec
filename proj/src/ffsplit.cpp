#include "stasplit/ffsplit.hpp"

#include <unsupported/Eigen/FFT>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/lattice1d.hpp"
#include "stasplit/twolevel.hpp"

namespace stasplit {

using constants::hbar;
using constants::pi;

std::string to_string(AmplitudeKind kind) {
    return kind == AmplitudeKind::two_bump ? "two_bump" : "interpolated_gpe";
}

namespace {

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }
double smoothstep_rate(double s) { return 6.0 * s * (1.0 - s); }

void require_symmetric(const Grid1D& grid) {
    if (!grid.symmetric() || grid.n_points % 2 != 0)
        throw ConfigError("fast-forward: needs a mirror-symmetric grid with an even point count");
}

Eigen::VectorXd wavenumbers(const Grid1D& grid) {
    const Eigen::Index n = grid.n_points;
    const double dk = 2.0 * pi / (static_cast<double>(n) * grid.spacing());
    Eigen::VectorXd k(n);
    for (Eigen::Index j = 0; j < n; ++j)
        k(j) = dk * static_cast<double>(j < n / 2 ? j : j - n);
    return k;
}

// z normalizes b on the grid; r = z b and its time derivative.
void normalize_sample(AmplitudeSample& s, const Eigen::VectorXd& b, const Eigen::VectorXd& b_x,
                      const Eigen::VectorXd& b_xx, const Eigen::VectorXd& b_t, const Eigen::VectorXd& b_tx,
                      double dx) {
    double z = 1.0 / std::sqrt(b.squaredNorm() * dx);
    double z_t = -z * z * z * b.dot(b_t) * dx;
    s.r = z * b;
    s.r_x = z * b_x;
    s.r_xx = z * b_xx;
    s.r_t = z_t * b + z * b_t;
    s.r_tx = z_t * b_x + z * b_tx;
}

}  // namespace

struct AmplitudeDesign::Spectral {
    Grid1D grid;
    Eigen::VectorXd k;
    Eigen::VectorXcd full, half;  // spectra of chi_N and chi_{N/2}
};

AmplitudeDesign AmplitudeDesign::two_bump(double x_f, double omega, double t_f, double mass) {
    if (!(x_f >= 0.0) || !(omega > 0.0) || !(t_f > 0.0) || !(mass > 0.0))
        throw ConfigError("two-bump design: x_f >= 0, omega > 0, t_f > 0 required");
    AmplitudeDesign d;
    d.kind_ = AmplitudeKind::two_bump;
    d.x_f_ = x_f;
    d.omega_ = omega;
    d.t_f_ = t_f;
    d.mass_ = mass;
    return d;
}

AmplitudeDesign AmplitudeDesign::interpolated_gpe(double x_f, double omega, double t_f, double g1N,
                                                  const Grid1D& grid, double mass) {
    AmplitudeDesign d = two_bump(x_f, omega, t_f, mass);
    if (!(g1N >= 0.0))
        throw ConfigError("interpolated design: g1N must be non-negative");
    require_symmetric(grid);
    d.kind_ = AmplitudeKind::interpolated_gpe;
    d.g1N_ = g1N;
    Eigen::VectorXd harmonic = 0.5 * mass * omega * omega * grid.points().array().square();
    ImaginaryTimeOptions o;
    o.mass = mass;
    auto sp = std::make_shared<Spectral>();
    sp->grid = grid;
    sp->k = wavenumbers(grid);
    Eigen::FFT<double> fft;
    auto spectrum = [&](double g) {
        Eigen::VectorXcd psi = gpe_ground_state(harmonic, g, grid, o).psi.amplitudes;
        // real and positive, mirror-symmetrized against round-off
        Eigen::VectorXcd chi = (0.5 * (psi.cwiseAbs() + psi.cwiseAbs().reverse())).cast<Complex>();
        Eigen::VectorXcd out;
        fft.fwd(out, chi);
        return out;
    };
    sp->full = spectrum(g1N);
    sp->half = spectrum(0.5 * g1N);
    d.spectral_ = std::move(sp);
    return d;
}

double AmplitudeDesign::a0() const { return std::sqrt(hbar / (mass_ * omega_)); }

double AmplitudeDesign::x0(double t) const { return x_f_ * smoothstep(std::clamp(t / t_f_, 0.0, 1.0)); }

double AmplitudeDesign::x0_dot(double t) const {
    return x_f_ / t_f_ * smoothstep_rate(std::clamp(t / t_f_, 0.0, 1.0));
}

AmplitudeSample AmplitudeDesign::sample(double t, const Grid1D& grid) const {
    const double s = std::clamp(t / t_f_, 0.0, 1.0);
    const double x0 = this->x0(t), v = x0_dot(t);
    AmplitudeSample out;
    if (kind_ == AmplitudeKind::two_bump) {
        const double a2 = a0() * a0();
        Eigen::ArrayXd x = grid.points().array();
        Eigen::ArrayXd um = x - x0, up = x + x0;
        Eigen::ArrayXd gm = (-um.square() / (2.0 * a2)).exp(), gp = (-up.square() / (2.0 * a2)).exp();
        Eigen::VectorXd b = gm + gp;
        Eigen::VectorXd b_x = -(um * gm + up * gp) / a2;
        Eigen::VectorXd b_xx = (um.square() / a2 - 1.0) * gm / a2 + (up.square() / a2 - 1.0) * gp / a2;
        Eigen::VectorXd b_t = v * (um * gm - up * gp) / a2;
        Eigen::VectorXd b_tx = v * ((1.0 - um.square() / a2) * gm - (1.0 - up.square() / a2) * gp) / a2;
        normalize_sample(out, b, b_x, b_xx, b_t, b_tx, grid.spacing());
        return out;
    }
    const Spectral& sp = *spectral_;
    if (grid.n_points != sp.grid.n_points || grid.x_min != sp.grid.x_min || grid.x_max != sp.grid.x_max)
        throw ConfigError("interpolated design: sampled on a different grid than it was built on");
    // f(x - x0) + f(x + x0) <-> 2 F cos(k x0); its time derivative picks up
    // the blend rate and -2 x0' k F sin(k x0).
    const double R = smoothstep(s), R_t = smoothstep_rate(s) / t_f_;
    Eigen::ArrayXcd f = (1.0 - R) * sp.full.array() + R * sp.half.array();
    Eigen::ArrayXd c = 2.0 * (sp.k.array() * x0).cos(), sn = 2.0 * (sp.k.array() * x0).sin();
    Eigen::ArrayXcd B = f * c;
    Eigen::ArrayXcd B_t = R_t * (sp.half.array() - sp.full.array()) * c - v * sp.k.array() * f * sn;
    const Complex i(0.0, 1.0);
    thread_local Eigen::FFT<double> fft;
    auto back = [&](const Eigen::ArrayXcd& spec) {
        Eigen::VectorXcd in = spec.matrix(), outv;
        fft.inv(outv, in);
        return Eigen::VectorXd(outv.real());
    };
    Eigen::ArrayXcd ik = i * sp.k.array();
    normalize_sample(out, back(B), back(ik * B), back(-sp.k.array().square() * B), back(B_t), back(ik * B_t),
                     grid.spacing());
    return out;
}

PhaseSolution phase_solve(const AmplitudeSample& amp, const Grid1D& grid, double mass, double tail_cut) {
    require_symmetric(grid);
    const Eigen::Index n = grid.n_points, mid = n / 2;
    const double h = grid.spacing();
    const double rmax = amp.r.maxCoeff();
    if (!(rmax > 0.0))
        throw NumericalError("phase solve: amplitude is not positive");
    Eigen::Index hi = mid;
    for (Eigen::Index i = n - 1; i >= mid; --i)
        if (amp.r(i) >= tail_cut * rmax) {
            hi = i;
            break;
        }
    PhaseSolution out;
    out.phi = Eigen::VectorXd::Zero(n);
    out.phi_x = Eigen::VectorXd::Zero(n);
    out.begin = n - 1 - hi;
    out.end = hi + 1;
    for (Eigen::Index i = mid; i <= hi; ++i)
        if (!(amp.r(i) >= 1e-12 * rmax))
            throw NumericalError("phase solve: r drops below 1e-12 of its maximum at x = " +
                                 format_number(grid.x(i)) + " m");
    if (amp.r_t.cwiseAbs().maxCoeff() == 0.0)
        return out;

    Eigen::VectorXd f = amp.r_t.cwiseProduct(amp.r);
    Eigen::VectorXd fp = amp.r_tx.cwiseProduct(amp.r) + amp.r_t.cwiseProduct(amp.r_x);
    // f''' from differences of the exact f' feeds the h^4 end correction.
    Eigen::VectorXd f3 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 2; i + 2 < n; ++i)
        f3(i) = (-fp(i + 2) + 16.0 * fp(i + 1) - 30.0 * fp(i) + 16.0 * fp(i - 1) - fp(i - 2)) / (12.0 * h * h);
    const double em2 = h * h / 12.0, em4 = h * h * h * h / 720.0;
    // q(x) = int_0^x f. Outward from 0 (f is even, so the sum over
    // [-x, x] halves and the end corrections at -x mirror the ones at x).
    Eigen::Index peak = mid;
    for (Eigen::Index i = mid; i <= hi; ++i)
        if (amp.r(i) > amp.r(peak))
            peak = i;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    double trap = 0.5 * h * f(mid);
    q(mid) = trap - em2 * fp(mid) + em4 * f3(mid);
    for (Eigen::Index i = mid + 1; i <= peak; ++i) {
        trap += 0.5 * h * (f(i - 1) + f(i));
        q(i) = trap - em2 * fp(i) + em4 * f3(i);
    }
    // Inward from the interior edge, starting from an exponential tail estimate.
    if (peak < hi) {
        double tail = 0.0;
        if (f(hi) != 0.0 && fp(hi) * f(hi) < 0.0)
            tail = -f(hi) * f(hi) / fp(hi);
        q(hi) = -tail;
        for (Eigen::Index i = hi - 1; i > peak; --i)
            q(i) = q(i + 1) -
                   (0.5 * h * (f(i) + f(i + 1)) - em2 * (fp(i + 1) - fp(i)) + em4 * (f3(i + 1) - f3(i)));
    }
    const double c = -2.0 * mass / hbar;
    Eigen::VectorXd phi_xx = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = mid; i <= hi; ++i) {
        double r2 = amp.r(i) * amp.r(i);
        out.phi_x(i) = c * q(i) / r2;
        phi_xx(i) = c * f(i) / r2 - 2.0 * out.phi_x(i) * amp.r_x(i) / amp.r(i);
    }
    // phi is even; its value at the two innermost nodes is a common constant.
    for (Eigen::Index i = mid + 1; i <= hi; ++i)
        out.phi(i) = out.phi(i - 1) + 0.5 * h * (out.phi_x(i - 1) + out.phi_x(i)) - em2 * (phi_xx(i) - phi_xx(i - 1));
    for (Eigen::Index i = mid; i <= hi; ++i) {
        out.phi(n - 1 - i) = out.phi(i);
        out.phi_x(n - 1 - i) = -out.phi_x(i);
    }
    return out;
}

PhaseSolution phase_solve(const AmplitudeDesign& design, double t, const Grid1D& grid, double tail_cut) {
    return phase_solve(design.sample(t, grid), grid, design.mass(), tail_cut);
}

Eigen::VectorXd imaginary_residual(const AmplitudeSample& amp, const PhaseSolution& phase, const Grid1D& grid,
                                   double mass) {
    const double h = grid.spacing();
    Eigen::VectorXd res = Eigen::VectorXd::Zero(grid.n_points);
    static constexpr double c[] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    for (Eigen::Index i = phase.begin + 4; i + 4 < phase.end; ++i) {
        const auto& p = phase.phi_x;
        double phi_xx = 0.0;
        for (int j = 1; j <= 4; ++j)
            phi_xx += c[j - 1] * (p(i + j) - p(i - j));
        phi_xx /= h;
        res(i) = hbar * amp.r_t(i) / amp.r(i) +
                 hbar * hbar / (2.0 * mass) * (2.0 * p(i) * amp.r_x(i) / amp.r(i) + phi_xx);
    }
    return res;
}

Eigen::VectorXd vff(const AmplitudeSample& amp, const PhaseSolution& phase, const Eigen::VectorXd& phi_t,
                    double g1N, double mass, double omega_tail, const Grid1D& grid) {
    const Eigen::Index n = grid.n_points, b = phase.begin, e = phase.end;
    if (e - b < 4)
        throw NumericalError("fast-forward potential: interior too narrow");
    const double kin = hbar * hbar / (2.0 * mass);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = b; i < e; ++i)
        v(i) = -hbar * phi_t(i) + kin * (amp.r_xx(i) / amp.r(i) - phase.phi_x(i) * phase.phi_x(i)) -
               g1N * amp.r(i) * amp.r(i);
    const double stiff = 0.5 * mass * omega_tail * omega_tail;
    for (Eigen::Index i = 0; i < b; ++i)
        v(i) = v(b) + stiff * std::pow(grid.x(b) - grid.x(i), 2);
    for (Eigen::Index i = e; i < n; ++i)
        v(i) = v(e - 1) + stiff * std::pow(grid.x(i) - grid.x(e - 1), 2);
    return v.array() - v.minCoeff();
}

Eigen::VectorXd perturbed_potential(const Eigen::VectorXd& v, double lambda, const Grid1D& grid) {
    Eigen::VectorXd out = v;
    const double h = grid.spacing();
    for (Eigen::Index i = 0; i < grid.n_points; ++i) {
        double x = grid.x(i);
        if (std::abs(x) < 1e-9 * h)
            out(i) += 0.5 * lambda;
        else if (x > 0.0)
            out(i) += lambda;
    }
    return out;
}

PotentialOfTime perturbed_potential(PotentialOfTime v, double lambda, const Grid1D& grid) {
    return [v = std::move(v), lambda, grid](double t) { return perturbed_potential(v(t), lambda, grid); };
}

FastForward::FastForward(AmplitudeDesign design, FastForwardOptions opts)
    : design_(std::move(design)), opts_(std::move(opts)) {
    require_symmetric(opts_.grid);
    if (!(opts_.tail_cut > 0.0 && opts_.tail_cut < 1e-2))
        throw ConfigError("fast-forward: tail_cut must lie in (0, 1e-2)");
    if (!(opts_.phase_dt_fraction > 0.0 && opts_.phase_dt_fraction < 0.1))
        throw ConfigError("fast-forward: phase_dt_fraction must lie in (0, 0.1)");
    if (!(opts_.dt > 0.0))
        throw ConfigError("fast-forward: dt must be positive");
    opts_.ground.mass = design_.mass();
    // The population imbalance between decoupled wells relaxes slowly;
    // start coarse and refine.
    if (opts_.ground.initial_step <= 0.0)
        opts_.ground.initial_step = 0.2 / design_.omega();
}

Eigen::VectorXd FastForward::phase_rate(double t, PhaseSolution& at_t) const {
    const double t_f = design_.t_final();
    const double dt = opts_.phase_dt_fraction * t_f;
    auto at = [&](double tau) { return phase_solve(design_, tau, opts_.grid, opts_.tail_cut); };
    auto narrow = [&](const PhaseSolution& p) {
        at_t.begin = std::max(at_t.begin, p.begin);
        at_t.end = std::min(at_t.end, p.end);
    };
    Eigen::VectorXd rate;
    if (t - dt >= 0.0 && t + dt <= t_f) {
        auto m = at(t - dt), p = at(t + dt);
        narrow(m);
        narrow(p);
        rate = (p.phi - m.phi) / (2.0 * dt);
    } else {
        double sgn = t - dt < 0.0 ? 1.0 : -1.0;
        auto p1 = at(t + sgn * dt), p2 = at(t + 2.0 * sgn * dt);
        narrow(p1);
        narrow(p2);
        rate = sgn * (-3.0 * at_t.phi + 4.0 * p1.phi - p2.phi) / (2.0 * dt);
    }
    for (Eigen::Index i = 0; i < rate.size(); ++i)
        if (i < at_t.begin || i >= at_t.end)
            rate(i) = 0.0;
    return rate;
}

Eigen::VectorXd FastForward::potential(double t) const {
    const double t_f = design_.t_final();
    AmplitudeSample amp = design_.sample(t, opts_.grid);
    PhaseSolution phase = phase_solve(amp, opts_.grid, design_.mass(), opts_.tail_cut);
    Eigen::VectorXd phi_t = Eigen::VectorXd::Zero(opts_.grid.n_points);
    if (t <= 0.0 || t >= t_f) {
        phase.phi.setZero();
        phase.phi_x.setZero();
    } else {
        phi_t = phase_rate(t, phase);
    }
    return vff(amp, phase, phi_t, design_.g1N(), design_.mass(), design_.omega(), opts_.grid);
}

PotentialOfTime FastForward::potential_of_time() const {
    return [self = *this](double t) { return self.potential(t); };
}

Wavefunction1D FastForward::designed_state(double t) const {
    AmplitudeSample amp = design_.sample(t, opts_.grid);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(opts_.grid.n_points);
    if (t > 0.0 && t < design_.t_final())
        phi = phase_solve(amp, opts_.grid, design_.mass(), opts_.tail_cut).phi;
    Eigen::VectorXcd a(opts_.grid.n_points);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = std::polar(amp.r(i), phi(i));
    Wavefunction1D psi(opts_.grid, a);
    psi.normalize();
    return psi;
}

namespace {

bool mirror_symmetric(const Eigen::VectorXd& v) {
    return (v - v.reverse()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1e-300, v.cwiseAbs().maxCoeff());
}

}  // namespace

Wavefunction1D ff_ground_state(const FastForward& ff, const Eigen::VectorXd& v, const Wavefunction1D* guess) {
    const Grid1D& grid = ff.grid();
    const double mass = ff.design().mass();
    if (ff.g1N() > 0.0)
        return gpe_ground_state(v, ff.g1N(), grid, ff.options().ground, guess).psi;
    SpectralDecomposition s = mirror_symmetric(v) ? symmetric_eigenpairs(v, grid, mass, 1)
                                                  : lowest_eigenpairs(hamiltonian_matrix(v, grid, mass), grid, 1);
    Wavefunction1D psi(grid, s.states.col(0).cast<Complex>());
    psi.normalize();
    return psi;
}

namespace {

double overlap_modulus(const Wavefunction1D& a, const Wavefunction1D& b) {
    return std::min(1.0, std::abs(a.overlap(b)));
}

}  // namespace

double structural_fidelity(const FastForward& ff, double lambda) {
    const double t_f = ff.design().t_final();
    Eigen::VectorXd v = ff.potential(t_f);
    Wavefunction1D seed = ff.designed_state(t_f);
    Wavefunction1D g0 = ff_ground_state(ff, v, &seed);
    Wavefunction1D gl = ff_ground_state(ff, perturbed_potential(v, lambda, ff.grid()), &seed);
    return overlap_modulus(g0, gl);
}

FidelityQuad fidelity_quad(const FastForward& ff, double lambda) {
    const Grid1D& grid = ff.grid();
    const double t_f = ff.design().t_final();
    Eigen::VectorXd v0 = ff.potential(0.0), vf = ff.potential(t_f);
    Wavefunction1D seed0 = ff.designed_state(0.0), seedf = ff.designed_state(t_f);
    Wavefunction1D init0 = ff_ground_state(ff, v0, &seed0);
    Wavefunction1D initl = ff_ground_state(ff, perturbed_potential(v0, lambda, grid), &seed0);
    Wavefunction1D fin0 = ff_ground_state(ff, vf, &seedf);
    Wavefunction1D finl = ff_ground_state(ff, perturbed_potential(vf, lambda, grid), &seedf);

    PropagationOptions po;
    po.g1N = ff.g1N();
    po.mass = ff.design().mass();
    po.wrap_tolerance = ff.options().wrap_tolerance;
    Wavefunction1D psi =
        propagate_tdse(initl, perturbed_potential(ff.potential_of_time(), lambda, grid), t_f, ff.options().dt, po);

    FidelityQuad q;
    q.F_S = overlap_modulus(fin0, finl);
    q.F_D0 = overlap_modulus(fin0, psi);
    q.F_D = overlap_modulus(psi, finl);
    q.F_I = overlap_modulus(initl, init0);
    return q;
}

TwoModeSplitting two_mode_splitting(const FastForward& ff, int n_slices) {
    if (n_slices < 4)
        throw ConfigError("two-mode model: needs at least 4 slices");
    const Grid1D& grid = ff.grid();
    const double t_f = ff.design().t_final();
    const double dx = grid.spacing();
    TwoModeSplitting out;
    for (int j = 0; j < n_slices; ++j) {
        double t = j + 1 == n_slices ? t_f : t_f * j / (n_slices - 1);
        Eigen::VectorXd v = ff.potential(t);
        if (ff.g1N() > 0.0)
            v += ff.g1N() * ff.design().sample(t, grid).r.array().square().matrix();
        auto s = symmetric_eigenpairs(v, grid, ff.design().mass(), 2);
        double delta = s.energies(1) - s.energies(0);
        if (!(delta > 0.0))
            throw NumericalError("two-mode model: non-positive splitting at t = " + format_number(t));
        Eigen::VectorXd right = (s.states.col(0) + s.states.col(1)) / std::sqrt(2.0);
        out.times.push_back(t);
        out.delta.push_back(delta);
        out.r4.push_back(right.array().pow(4).sum() * dx);
    }
    return out;
}

FidelityQuad moving_two_mode(const TwoModeSplitting& split, double lambda, double g1N) {
    const std::size_t n = split.times.size();
    if (n < 4)
        throw ConfigError("two-mode model: needs at least 4 slices");
    const double t_f = split.times.back();
    const double h = split.times[1] - split.times[0];
    std::vector<double> log_delta(n);
    for (std::size_t j = 0; j < n; ++j)
        log_delta[j] = std::log(split.delta[j]);
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline(log_delta.begin(), log_delta.end(), 0.0, h);
    auto delta = [&](double t) { return std::exp(spline(std::clamp(t, 0.0, t_f))); };
    auto r4 = [&](double t) {
        double u = std::clamp(t / h, 0.0, static_cast<double>(n - 1));
        std::size_t j = std::min(static_cast<std::size_t>(u), n - 2);
        double w = u - static_cast<double>(j);
        return (1.0 - w) * split.r4[j] + w * split.r4[j + 1];
    };
    const double l = lambda / hbar;
    TwoLevelGenerator gen = [&](double t, const Eigen::Vector2cd& c) {
        Eigen::Matrix2cd m = TwoLevelHamiltonian{l, delta(t)}.matrix();
        if (g1N > 0.0) {
            double g2 = g1N * r4(t) / hbar;
            m(0, 0) += g2 * std::norm(c(0));
            m(1, 1) += g2 * std::norm(c(1));
        }
        return m;
    };
    double hmax = 0.0;
    for (double d : split.delta)
        hmax = std::max(hmax, 0.5 * std::hypot(d, l));
    double dt = std::min(t_f / 20000.0, 2.0 * pi / (200.0 * hmax));

    auto ground = [&](double lam, double t) { return eigensystem(TwoLevelHamiltonian{lam, delta(t)}).psi_minus; };
    TwoLevelAmplitudes init0 = ground(0.0, 0.0), initl = ground(l, 0.0);
    TwoLevelAmplitudes fin0 = ground(0.0, t_f), finl = ground(l, t_f);
    auto psi = TwoLevelAmplitudes::from_vector(rk4_integrate(gen, initl.vector(), 0.0, t_f, dt));
    double nrm = psi.norm();
    psi.c_L /= nrm;
    psi.c_R /= nrm;

    FidelityQuad q;
    q.F_S = fidelity(fin0, finl);
    q.F_D0 = fidelity(fin0, psi);
    q.F_D = fidelity(psi, finl);
    q.F_I = fidelity(initl, init0);
    return q;
}

FidelityQuad moving_two_mode(const FastForward& ff, double lambda, const TwoModeOptions& opts) {
    return moving_two_mode(two_mode_splitting(ff, opts.n_slices), lambda, opts.mean_field ? ff.g1N() : 0.0);
}

double sudden_bound(double t_f) { return 2.0 * hbar / t_f; }
double sudden_marker(double t_f) { return 0.2 * hbar / t_f; }

namespace {

double interaction_prefactor(double g1N_hat) { return g1N_hat / (2.0 * std::sqrt(2.0 * pi)); }

}  // namespace

double HarmonicWellEnergies::e_left(double n_left) const {
    const double e = hbar * omega;
    return n_left * 0.5 * e + interaction_prefactor(g1N_hat) * e * n_left * n_left;
}

double HarmonicWellEnergies::e_right(double n_right) const {
    const double e = hbar * omega;
    return n_right * (0.5 * e + lambda) + interaction_prefactor(g1N_hat) * e * n_right * n_right;
}

double appendix_a_imbalance(double lambda, double omega, double g1N_hat) {
    if (!(g1N_hat > 0.0))
        throw ConfigError("imbalance: g1N_hat must be positive (the linear case collapses fully)");
    if (!(omega > 0.0))
        throw ConfigError("imbalance: omega must be positive");
    double d = std::sqrt(2.0 * pi) * (lambda / (hbar * omega)) / g1N_hat;
    return std::clamp(d, -1.0, 1.0);
}

double collapse_bias(double omega, double g1N_hat) { return hbar * omega * g1N_hat / std::sqrt(2.0 * pi); }

double minimized_imbalance(const HarmonicWellEnergies& e) {
    auto [n_right, value] =
        boost::math::tools::brent_find_minima([&](double nr) { return e.total(nr); }, 0.0, 1.0, 50);
    (void)value;
    return 1.0 - 2.0 * n_right;
}

std::vector<FidelityScanRow> fidelity_scan(const FastForward& ff, const std::vector<double>& lambda_over_hbar_omega,
                                           int workers, const TwoModeOptions& model) {
    if (workers < 1)
        throw ConfigError("fidelity scan: workers must be at least 1");
    const double e = hbar * ff.design().omega();
    TwoModeSplitting split = two_mode_splitting(ff, model.n_slices);
    const double g_model = model.mean_field ? ff.g1N() : 0.0;
    std::vector<FidelityScanRow> rows(lambda_over_hbar_omega.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto work = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
                double lam = lambda_over_hbar_omega[i] * e;
                rows[i].lambda_over_hbar_omega = lambda_over_hbar_omega[i];
                rows[i].full = fidelity_quad(ff, lam);
                rows[i].model = moving_two_mode(split, lam, g_model);
            } catch (...) {
                std::lock_guard<std::mutex> g(failure_lock);
                if (!failure)
                    failure = std::current_exception();
                next = rows.size();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < std::min<int>(workers, static_cast<int>(rows.size())); ++w)
        pool.emplace_back(work);
    work();
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
    return rows;
}

void write_fidelity_scan_csv(std::ostream& out, const std::vector<FidelityScanRow>& rows) {
    CsvTable t;
    t.header = {"lambda_over_hbar_omega", "F_S", "F_D", "F_D0", "F_I", "model_F_S", "model_F_D", "model_F_D0"};
    for (const auto& r : rows)
        t.rows.push_back({r.lambda_over_hbar_omega, r.full.F_S, r.full.F_D, r.full.F_D0, r.full.F_I, r.model.F_S,
                          r.model.F_D, r.model.F_D0});
    write_csv(out, t);
}

}  // namespace stasplit
