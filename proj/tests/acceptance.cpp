#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "stasplit/constants.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/ffsplit.hpp"
#include "stasplit/lattice1d.hpp"
#include "stasplit/mapping.hpp"
#include "stasplit/protocols.hpp"
#include "stasplit/tdse.hpp"
#include "stasplit/twolevel.hpp"

using namespace stasplit;
using constants::hbar;
using constants::mass_rb87;
using constants::pi;

namespace {

const double omega0 = 2.0 * pi * 78.0;
const double lambda_f = 190.0;
const double lambda_dot0 = 190.0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

class Report {
public:
    void run(int n, const std::function<Verdict()>& body) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = body();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream line;
        line.precision(3);
        line << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << " [" << s << " s]";
        std::cout << line.str() << std::endl;
        failed_ += v.pass ? 0 : 1;
    }
    int failed() const { return failed_; }

private:
    int failed_ = 0;
};

std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MappingConfig mapping_for(double t_final) {
    MappingConfig cfg;
    cfg.fixed.omega = omega0;
    cfg.n_slices = static_cast<std::size_t>(std::lround(t_final / 1e-4)) + 1;
    return cfg;
}

DemuxRun shortcut(const MappedTrajectory& traj) {
    TrajectoryInterpolant f(traj);
    return {f.t_final(), [f](double t) { return f(t); }};
}

DemuxRun linear(double v0_final, double t_final) {
    ScalarSchedule ramp = linear_ramp(v0_final, t_final);
    return {t_final, [ramp](double t) {
                TrapParameters p;
                p.omega = omega0;
                p.v0 = ramp(t);
                return p;
            }};
}

const MappedTrajectory& reference_map() {
    static const MappedTrajectory traj =
        map_protocol(invariant_protocol(omega0, lambda_f, lambda_dot0, 0.055), mapping_for(0.055));
    return traj;
}

double max_residual(const MappedTrajectory& traj) {
    double worst = 0.0;
    for (double r : traj.residuals)
        worst = std::max(worst, r);
    return worst;
}

// 1. invariant protocol end points over random valid designs
Verdict protocol_endpoints() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int accepted = 0, rejected = 0;
    double worst = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    while (accepted < 20) {
        double w = omega0 * (0.5 + u(rng)), lf = 50.0 + 400.0 * u(rng), ld = 20.0 + 400.0 * u(rng);
        double tf = 0.005 + 0.1 * u(rng);
        try {
            auto p = invariant_protocol(w, lf, ld, tf);
            worst = std::max({worst, rel(p(0.0).delta_tunnel, w), std::abs(p(0.0).lambda_bias) / lf,
                              std::abs(p(tf).delta_tunnel) / w, rel(p(tf).lambda_bias, lf)});
            ++accepted;
        } catch (const NumericalError&) {
            ++rejected;
        }
    }
    double s = seconds_since(t0);
    return {worst <= 1e-9 && s < 1.0, "20 designs (" + std::to_string(rejected) + " singular draws skipped), worst relative endpoint error " +
                                          num(worst) + " <= 1e-9, " + num(s) + " s < 1 s"};
}

// 2. exact transfer in the two-level model
Verdict two_level_transfer() {
    bool pass = true;
    std::string detail;
    auto t0 = std::chrono::steady_clock::now();
    for (double tf : {0.005, 0.055, 0.5}) {
        detail += (detail.empty() ? "" : "; ") + num(tf * 1e3) + " ms: ";
        try {
            auto p = invariant_protocol(omega0, lambda_f, lambda_dot0, tf);
            auto start = eigensystem(p(0.0)), end = eigensystem(p(tf));
            double dt = default_step(p, tf);
            double fm = fidelity(end.psi_minus, propagate(p, start.psi_minus, tf, dt));
            double fp = fidelity(end.psi_plus, propagate(p, start.psi_plus, tf, dt));
            bool ok = fm >= 1.0 - 1e-8 && fp >= 1.0 - 1e-8;
            pass = pass && ok;
            detail += "1-F = " + num(1.0 - fm) + ", " + num(1.0 - fp) + (ok ? "" : " (too low)");
        } catch (const NumericalError& e) {
            pass = false;
            detail += std::string("design rejected as singular (") + e.what() + ")";
        }
    }
    double s = seconds_since(t0);
    pass = pass && s < 10.0;
    return {pass, detail + "; " + num(s) + " s"};
}

// 3. constant adiabaticity of the FAQUAD schedule
Verdict faquad_constancy() {
    const double tf = 0.055;
    auto fq = faquad_schedule(omega0, lambda_f, tf);
    double worst = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        double t = tf * i / 2000.0;
        double d = fq.protocol(t).delta_tunnel;
        worst = std::max(worst, rel(adiabaticity_parameter(lambda_f, d, faquad_delta_rate(omega0, lambda_f, tf, t)), fq.c));
    }
    bool ends = fq.protocol(0.0).delta_tunnel == omega0 && fq.protocol(tf).delta_tunnel == 0.0 &&
                fq.protocol(tf).lambda_bias == lambda_f;
    return {worst <= 1e-8 && ends, "max relative deviation of the adiabaticity parameter " + num(worst) +
                                       " <= 1e-8, endpoints " + (ends ? "exact" : "inexact")};
}

// 4. coordinate-space demultiplexing at 70 ms
Verdict demultiplexing() {
    const double tf = 0.07;
    auto traj = map_protocol(invariant_protocol(omega0, lambda_f, lambda_dot0, tf), mapping_for(tf));
    DemuxOptions o;
    DemuxRun sc = shortcut(traj);
    double fg = demux_fidelity(sc, StartState::ground, o);
    double fe = demux_fidelity(sc, StartState::excited, o);
    double fl = demux_fidelity(linear(traj.v0.back(), tf), StartState::ground, o);
    DemuxOptions slow = o;
    slow.dt = 5e-6;
    double fl_slow = demux_fidelity(linear(traj.v0.back(), 0.7), StartState::ground, slow);
    bool pass = fg >= 0.99 && fe >= 0.99 && fl < 0.9 && fl_slow >= 0.99;
    return {pass, "shortcut F ground " + num(fg) + ", excited " + num(fe) + " (>= 0.99); linear 70 ms " + num(fl) +
                      " (< 0.9); linear 0.7 s " + num(fl_slow) + " (>= 0.99)"};
}

// 5. transient excitation at 55 ms
Verdict transient_population() {
    const double tf = 0.055;
    const auto& traj = reference_map();
    DemuxOptions o;
    auto pt = population_trace(shortcut(traj), StartState::ground, o, 2e-4, 3, true);
    double p1max = 0.0, p2max = 0.0;
    for (std::size_t i = 0; i < pt.times.size(); ++i) {
        p1max = std::max(p1max, pt.values[1][i]);
        p2max = std::max(p2max, pt.values[2][i]);
    }
    double p1end = pt.values[1].back();
    auto lin = population_trace(linear(traj.v0.back(), tf), StartState::ground, o, 1e-3, 3, false);
    double p1lin = lin.values[1].back();
    bool pass = p1max > 0.05 && p1end < 0.01 && p2max < 0.02 && p1lin > 0.05;
    return {pass, "shortcut max P1 " + num(p1max) + " (> 0.05), P1(t_f - 2 ms) " + num(p1end) + " (< 0.01), max P2 " +
                      num(p2max) + " (< 0.02); linear P1(t_f) " + num(p1lin) + " (> 0.05)"};
}

// 6. mapping residuals and the self-mapping fixed point
Verdict mapping_residuals() {
    const auto& traj = reference_map();
    double worst = max_residual(traj);

    MappingConfig cfg;
    cfg.fixed.omega = omega0;
    cfg.n_slices = 101;
    cfg.omega_ref = omega0;
    const double tf = 0.02;
    auto v0_path = [&](double t) { return (1.0 + 3.0 * t / tf) * hbar * omega0; };
    auto w_path = [&](double t) { return omega0 * (1.0 - 0.2 * std::sin(pi * t / tf)); };
    std::vector<double> times, delta, lambda;
    for (std::size_t i = 0; i < cfg.n_slices; ++i) {
        double t = tf * static_cast<double>(i) / (cfg.n_slices - 1);
        TrapParameters p = cfg.fixed;
        p.v0 = v0_path(t);
        p.omega = w_path(t);
        auto e = extract_at(p, cfg.grid);
        times.push_back(t);
        delta.push_back(e.delta);
        lambda.push_back(e.lambda);
    }
    cfg.fixed.v0 = 1.05 * v0_path(0.0);
    double fixed_point = max_residual(map_protocol(tabulated_protocol(times, delta, lambda), cfg));
    return {worst <= 1e-6 && fixed_point <= 1e-10, "55 ms map, " + std::to_string(traj.size()) +
                                                       " slices, max residual " + num(worst) +
                                                       " (<= 1e-6); self-mapping max residual " + num(fixed_point) +
                                                       " (<= 1e-10)"};
}

// 7. fast-forward stability, 5-point smoke scan at 320 ms
Verdict ff_stability() {
    const double tf = 0.32, w = 780.0, hw = hbar * w;
    FastForward ff(AmplitudeDesign::two_bump(4e-6, w, tf));
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> lambdas{1e-8, 1e-5, 1e-4, 8e-4, 1e-2};
    auto rows = fidelity_scan(ff, lambdas);
    double s = seconds_since(t0);
    auto split = symmetric_eigenpairs(ff.potential(tf), ff.grid(), mass_rb87, 2);
    const double delta_f = hbar * (split.energies(1) - split.energies(0));
    bool pass = s < 300.0;
    double worst_fs = 0.0, worst_model = 0.0, min_fd0 = 1.0;
    int beyond = 0, sudden = 0;
    for (const auto& r : rows) {
        double l = r.lambda_over_hbar_omega * hw;
        if (l >= 20.0 * delta_f) {
            ++beyond;
            worst_fs = std::max(worst_fs, std::abs(r.full.F_S - 1.0 / std::sqrt(2.0)));
        }
        if (l <= sudden_marker(tf)) {
            ++sudden;
            min_fd0 = std::min(min_fd0, r.full.F_D0);
        }
        worst_model = std::max({worst_model, std::abs(r.full.F_S - r.model.F_S), std::abs(r.full.F_D - r.model.F_D),
                                std::abs(r.full.F_D0 - r.model.F_D0), std::abs(r.full.F_I - r.model.F_I)});
    }
    pass = pass && beyond > 0 && sudden > 0 && worst_fs <= 0.02 && min_fd0 >= 0.99 && worst_model <= 0.02;
    return {pass, "|F_S - 1/sqrt2| <= " + num(worst_fs) + " over " + std::to_string(beyond) +
                      " points with lambda >= 20 hbar delta(t_f) (<= 0.02); min F_D0 " + num(min_fd0) + " over " +
                      std::to_string(sudden) + " points with lambda <= 0.2 hbar/t_f (>= 0.99); model vs full " +
                      num(worst_model) + " (<= 0.02); smoke scan " + num(s) + " s (< 300 s)"};
}

// 8. interaction stabilization and the harmonic-well imbalance
Verdict interaction_stabilization() {
    const double w = 780.0, hw = hbar * w, a0 = std::sqrt(hbar / (mass_rb87 * w));
    const double lambda = 0.02 * hw, g_c = std::sqrt(2.0 * pi) * 0.02;
    FastForwardOptions o;
    std::vector<double> gs{0.025, 0.035, 0.045, 0.055, 0.065, 0.08, 0.1};
    std::vector<double> fs;
    for (double g : gs) {
        FastForward ff(AmplitudeDesign::interpolated_gpe(4e-6, w, 0.32, g * hw * a0, o.grid), o);
        fs.push_back(structural_fidelity(ff, lambda));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < fs.size(); ++i)
        monotone = monotone && fs[i] >= fs[i - 1] - 1e-6;
    double crossing = 0.0;
    for (std::size_t i = 1; i < fs.size(); ++i)
        if (fs[i - 1] < 0.9 && fs[i] >= 0.9) {
            double u = (0.9 - fs[i - 1]) / (fs[i] - fs[i - 1]);
            crossing = gs[i - 1] * std::pow(gs[i] / gs[i - 1], u);
            break;
        }
    bool cross_ok = crossing >= 0.5 * g_c && crossing <= 2.0 * g_c;

    // closed form against a grid minimization of E_L(1 - n) + E_R(n)
    double worst = 0.0;
    int compared = 0;
    for (double g : {0.2, 0.5, 1.0, 3.0, 9.5, 20.0}) {
        for (double l : {0.002, 0.01, 0.02, 0.05, 0.1, 0.2}) {
            double closed = appendix_a_imbalance(l * hw, w, g);
            if (closed >= 0.5)
                continue;
            HarmonicWellEnergies e{l * hw, w, g};
            double best = 0.0, best_e = e.total(0.0);
            for (int k = 1; k <= 400000; ++k) {
                double n = k / 400000.0, v = e.total(n);
                if (v < best_e) {
                    best_e = v;
                    best = n;
                }
            }
            worst = std::max(worst, rel(1.0 - 2.0 * best, closed));
            ++compared;
        }
    }
    std::string profile;
    for (std::size_t i = 0; i < gs.size(); ++i)
        profile += (i ? " " : "") + num(gs[i]) + ":" + num(fs[i]);
    return {cross_ok && monotone && worst <= 0.01,
            "F_S crosses 0.9 at g1N_hat = " + num(crossing) + ", within [" + num(0.5 * g_c) + ", " + num(2.0 * g_c) +
                "], " + (monotone ? "monotone" : "not monotone") + " (" + profile + "); closed-form imbalance vs minimizer " +
                num(worst) + " over " + std::to_string(compared) + " cases (<= 0.01)"};
}

// 9. solver properties
Verdict solver_properties() {
    const double w = 780.0, a0 = std::sqrt(hbar / (mass_rb87 * w));
    const Grid1D grid(-15e-6, 15e-6, 2048);
    auto ramp = [&](double tf) {
        return trap_potential(
            [tf, w](double t) {
                double s = t / tf;
                TrapParameters p;
                p.omega = w;
                p.v0 = 4.0 * s * s * (3.0 - 2.0 * s) * hbar * w;
                return p;
            },
            grid);
    };
    auto gaussian = [&](double x0, double width) {
        Eigen::ArrayXd x = grid.points().array() - x0;
        Wavefunction1D psi(grid, (-x.square() / (2.0 * width * width)).exp().matrix().cast<Complex>());
        psi.normalize();
        return psi;
    };

    double norm_step = 0.0, last = 1.0;
    PropagationOptions po;
    po.observe_every = 1;
    po.observer = [&](double, const Eigen::VectorXcd& a) {
        double n = a.squaredNorm() * grid.spacing();
        norm_step = std::max(norm_step, std::abs(n - last));
        last = n;
    };
    propagate_tdse(gaussian(0.5 * a0, 0.8 * a0), ramp(2e-3), 2e-3, 1e-6, po);

    Wavefunction1D psi0 = gaussian(0.5 * a0, a0);
    auto run = [&](double dt) { return propagate_tdse(psi0, ramp(4e-3), 4e-3, dt).amplitudes; };
    Eigen::VectorXcd ref = run(5e-7);
    double split_order = std::log2(std::sqrt(grid_norm2(run(8e-6) - ref, grid.spacing())) /
                                   std::sqrt(grid_norm2(run(4e-6) - ref, grid.spacing())));

    auto fq = faquad_schedule(omega0, lambda_f, 0.055).protocol;
    auto c0 = eigensystem(fq(0.0)).psi_minus;
    double dt = 0.055 / 400;
    auto cref = propagate(fq, c0, 0.055, dt / 16).vector();
    double rk_order = std::log2((propagate(fq, c0, 0.055, dt).vector() - cref).norm() /
                                (propagate(fq, c0, 0.055, dt / 2).vector() - cref).norm());

    Grid1D hg(-20 * a0, 20 * a0, 1024);
    TrapParameters h;
    h.omega = w;
    auto spec = lowest_eigenpairs(hamiltonian_matrix(h, hg), hg, 6);
    double ho = 0.0;
    for (int n = 0; n < 6; ++n)
        ho = std::max(ho, rel(spec.energies(n), (n + 0.5) * w));

    TrapParameters flat;
    flat.omega = w;
    Wavefunction1D e0 = eigenstate(flat, grid, 0), e1 = eigenstate(flat, grid, 1);
    Wavefunction1D mix(grid, (e0.amplitudes + e1.amplitudes) / std::sqrt(2.0));
    auto v = ramp(5e-3);
    auto f0 = propagate_tdse(e0, v, 5e-3, 1e-6), f1 = propagate_tdse(e1, v, 5e-3, 1e-6);
    auto fm = propagate_tdse(mix, v, 5e-3, 1e-6);
    double lin = std::sqrt(grid_norm2(fm.amplitudes - (f0.amplitudes + f1.amplitudes) / std::sqrt(2.0), grid.spacing()));

    bool pass = norm_step <= 1e-10 && std::abs(split_order - 2.0) < 0.15 && std::abs(rk_order - 4.0) < 0.3 &&
                ho <= 1e-3 && lin <= 1e-8;
    return {pass, "norm change per step " + num(norm_step) + " (<= 1e-10); split-step order " + num(split_order) +
                      "; RK4 order " + num(rk_order) + "; oscillator levels " + num(ho) + " (<= 1e-3); linearity " +
                      num(lin) + " (<= 1e-8)"};
}

}  // namespace

int main() {
    Report r;
    r.run(1, protocol_endpoints);
    r.run(2, two_level_transfer);
    r.run(3, faquad_constancy);
    r.run(4, demultiplexing);
    r.run(5, transient_population);
    r.run(6, mapping_residuals);
    r.run(7, ff_stability);
    r.run(8, interaction_stabilization);
    r.run(9, solver_properties);
    std::cout << r.failed() << " of 9 criteria failed" << std::endl;
    return r.failed() == 0 ? 0 : 1;
}
