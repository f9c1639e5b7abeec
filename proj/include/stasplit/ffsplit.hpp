#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "constants.hpp"
#include "grid.hpp"
#include "tdse.hpp"

namespace stasplit {

enum class AmplitudeKind { two_bump, interpolated_gpe };

std::string to_string(AmplitudeKind kind);

// r and the derivatives the fast-forward construction needs, on a grid.
struct AmplitudeSample {
    Eigen::VectorXd r, r_x, r_xx;
    Eigen::VectorXd r_t, r_tx;
};

// Symmetric amplitude r(x, t) splitting one bump at x = 0 into two centred
// at +-x0(t), x0 = x_f (3s^2 - 2s^3), s = t / t_f. Normalized on the grid.
class AmplitudeDesign {
public:
    // r ~ exp(-(x - x0)^2 / 2a0^2) + exp(-(x + x0)^2 / 2a0^2), a0 = sqrt(hbar / m omega).
    static AmplitudeDesign two_bump(double x_f, double omega, double t_f, double mass = constants::mass_rb87);
    // r ~ f(x - x0) + f(x + x0) with f = (1 - R) chi_N + R chi_{N/2}, R = 3s^2 - 2s^3,
    // where chi_N and chi_{N/2} are harmonic-trap ground states for g1N and g1N / 2.
    static AmplitudeDesign interpolated_gpe(double x_f, double omega, double t_f, double g1N, const Grid1D& grid,
                                            double mass = constants::mass_rb87);

    AmplitudeKind kind() const { return kind_; }
    double x_f() const { return x_f_; }
    double omega() const { return omega_; }
    double t_final() const { return t_f_; }
    double mass() const { return mass_; }
    double a0() const;
    double g1N() const { return g1N_; }

    double x0(double t) const;
    double x0_dot(double t) const;

    AmplitudeSample sample(double t, const Grid1D& grid) const;

private:
    struct Spectral;
    AmplitudeKind kind_ = AmplitudeKind::two_bump;
    double x_f_ = 0.0, omega_ = 0.0, t_f_ = 0.0, mass_ = constants::mass_rb87, g1N_ = 0.0;
    std::shared_ptr<const Spectral> spectral_;
};

// phi and phi' on [begin, end), the interior where r >= tail_cut * max r.
// Both vanish outside it.
struct PhaseSolution {
    Eigen::VectorXd phi, phi_x;
    Eigen::Index begin = 0, end = 0;
};

// Solves (r^2 phi')' = -(2m/hbar) r_t r with phi(0) = phi'(0) = 0. The inner
// integral runs outward from 0 up to the bump maximum and inward from the
// interior edge beyond it; both use the trapezoid rule with its h^2 end
// correction. Needs a mirror-symmetric grid with an even point count.
PhaseSolution phase_solve(const AmplitudeSample& amp, const Grid1D& grid, double mass, double tail_cut = 1e-6);
PhaseSolution phase_solve(const AmplitudeDesign& design, double t, const Grid1D& grid, double tail_cut = 1e-6);

// hbar r_t / r + hbar^2/2m (2 phi' r' / r + phi''), J, on the interior with
// phi'' from 9-point differences; zero elsewhere.
Eigen::VectorXd imaginary_residual(const AmplitudeSample& amp, const PhaseSolution& phase, const Grid1D& grid,
                                   double mass);

// -hbar phi_t + hbar^2/2m (r''/r - phi'^2) - g1N r^2 on the interior. Outside
// it the edge value rises by m omega_tail^2 d^2 / 2 with the distance d, which
// keeps stray high-k components from reaching the box edges. Shifted so min = 0.
Eigen::VectorXd vff(const AmplitudeSample& amp, const PhaseSolution& phase, const Eigen::VectorXd& phi_t,
                    double g1N, double mass, double omega_tail, const Grid1D& grid);

// V + lambda theta(x); theta = 1/2 only on a node exactly at x = 0.
Eigen::VectorXd perturbed_potential(const Eigen::VectorXd& v, double lambda, const Grid1D& grid);
PotentialOfTime perturbed_potential(PotentialOfTime v, double lambda, const Grid1D& grid);

struct FastForwardOptions {
    Grid1D grid{-15e-6, 15e-6, 2048};
    double tail_cut = 1e-6;
    double phase_dt_fraction = 1e-4;  // phi_t by differences over t_f * this
    double dt = 1e-5;                 // real-time step
    // The sharp step of the perturbation radiates a faint high-k flux; this
    // much probability may reach the box edges before a run is refused.
    double wrap_tolerance = 1e-5;
    ImaginaryTimeOptions ground;      // GPE ground states (g1N > 0)
};

// V_FF(t) for a design. At t <= 0 and t >= t_f the amplitude is stationary
// and the phase is dropped entirely, so r is an eigenstate there.
class FastForward {
public:
    FastForward(AmplitudeDesign design, FastForwardOptions opts = {});

    const AmplitudeDesign& design() const { return design_; }
    const FastForwardOptions& options() const { return opts_; }
    const Grid1D& grid() const { return opts_.grid; }
    double g1N() const { return design_.g1N(); }

    Eigen::VectorXd potential(double t) const;
    PotentialOfTime potential_of_time() const;
    // r(x, t) exp(i phi(x, t)), normalized.
    Wavefunction1D designed_state(double t) const;
    // d phi / dt by central differences (one-sided near the ends); narrows
    // the interior of at_t to where all stencil points are defined.
    Eigen::VectorXd phase_rate(double t, PhaseSolution& at_t) const;

private:
    AmplitudeDesign design_;
    FastForwardOptions opts_;
};

struct FidelityQuad {
    double F_S = 0.0, F_D = 0.0, F_D0 = 0.0, F_I = 0.0;
};

// Ground state of the static potential: lowest eigenvector of the 3-point
// discretization for g1N = 0, imaginary-time GPE ground state otherwise.
Wavefunction1D ff_ground_state(const FastForward& ff, const Eigen::VectorXd& v, const Wavefunction1D* guess = nullptr);

// F_S = |<psi0-(t_f)|psil-(t_f)>|, F_D0 = |<psi0-(t_f)|psi(t_f)>|,
// F_D = |<psi(t_f)|psil-(t_f)>|, F_I = |<psil-(0)|psi0-(0)>|, with psi evolved
// under V_FF + lambda theta from psil-(0). lambda in J.
FidelityQuad fidelity_quad(const FastForward& ff, double lambda);
// Only F_S; no propagation.
double structural_fidelity(const FastForward& ff, double lambda);

struct TwoModeOptions {
    int n_slices = 200;
    bool mean_field = true;  // diagonal g1N int|R|^4 |c|^2 terms when g1N > 0
};

// Splitting E+ - E- (rad/s) of the unperturbed instantaneous eigenstates at
// the slices. With g1N > 0 the basis comes from V_FF + g1N r^2.
struct TwoModeSplitting {
    std::vector<double> times, delta, r4;  // r4 = int R^4 dx, 1/m
};

TwoModeSplitting two_mode_splitting(const FastForward& ff, int n_slices);

// 2x2 dynamics in the moving L/R basis built from the instantaneous FF
// eigenstates: H/hbar = 1/2 [[-lambda, -delta(t)], [-delta(t), lambda]] in (L, R),
// constant lambda, delta interpolated in log between slices.
FidelityQuad moving_two_mode(const FastForward& ff, double lambda, const TwoModeOptions& opts = {});
FidelityQuad moving_two_mode(const TwoModeSplitting& split, double lambda, double g1N = 0.0);

// Sudden-regime bound 2 hbar / t_f (J); the usual plot marker is 0.1 of it.
double sudden_bound(double t_f);
double sudden_marker(double t_f);

// Two-well harmonic-approximation energies for populations n_L + n_R = 1
// (per particle, J), lambda in J, g1N_hat = g1 N / (hbar omega a0).
struct HarmonicWellEnergies {
    double lambda = 0.0, omega = 0.0, g1N_hat = 0.0;

    double e_left(double n_left) const;
    double e_right(double n_right) const;
    double total(double n_right) const { return e_left(1.0 - n_right) + e_right(n_right); }
};

// (N_L - N_R) / N = min(1, sqrt(2 pi) (lambda / hbar omega) / g1N_hat).
double appendix_a_imbalance(double lambda, double omega, double g1N_hat);
// lambda at which the imbalance reaches 1: hbar omega g1N_hat / sqrt(2 pi).
double collapse_bias(double omega, double g1N_hat);
// Imbalance from minimizing the total energy over n_R in [0, 1] directly.
double minimized_imbalance(const HarmonicWellEnergies& e);

struct FidelityScanRow {
    double lambda_over_hbar_omega = 0.0;
    FidelityQuad full, model;
};

// lambda scan over workers; rows keep the input order.
std::vector<FidelityScanRow> fidelity_scan(const FastForward& ff, const std::vector<double>& lambda_over_hbar_omega,
                                           int workers = 1, const TwoModeOptions& model = {});
void write_fidelity_scan_csv(std::ostream& out, const std::vector<FidelityScanRow>& rows);

}  // namespace stasplit
