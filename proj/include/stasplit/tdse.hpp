#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "constants.hpp"
#include "grid.hpp"
#include "lattice1d.hpp"

namespace stasplit {

struct Wavefunction1D {
    Grid1D grid;
    Eigen::VectorXcd amplitudes;

    Wavefunction1D() = default;
    Wavefunction1D(const Grid1D& g, Eigen::VectorXcd a) : grid(g), amplitudes(std::move(a)) {}

    double norm() const { return std::sqrt(grid_norm2(amplitudes, grid.spacing())); }
    void normalize() { grid_normalize(amplitudes, grid.spacing()); }
    Eigen::VectorXd density() const { return amplitudes.cwiseAbs2(); }
    Complex overlap(const Wavefunction1D& other) const {
        return grid_dot(amplitudes, other.amplitudes, grid.spacing());
    }
};

// Potential energy on the grid (J) at time t.
using PotentialOfTime = std::function<Eigen::VectorXd(double)>;

PotentialOfTime static_potential(Eigen::VectorXd v);
// Harmonic-plus-lattice potential along a parameter path; the fixed
// profiles are computed once.
PotentialOfTime trap_potential(std::function<TrapParameters(double)> params_of_t, const Grid1D& grid);

// Kinetic energy -hbar^2/2m d^2/dx^2 applied spectrally on the periodic box
// of length n * spacing.
class SpectralKinetic {
public:
    SpectralKinetic(const Grid1D& grid, double mass);

    const Eigen::VectorXd& wavenumbers() const { return k_; }
    Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;  // J
    double expectation(const Eigen::VectorXcd& psi) const;      // J, psi normalized on the grid

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
    Eigen::VectorXd k_;
    double mass_;
};

// H psi with H = T + V + g1N |psi|^2, in J.
Eigen::VectorXcd apply_hamiltonian(const SpectralKinetic& kinetic, const Eigen::VectorXcd& psi,
                                   const Eigen::VectorXd& potential, double g1N);
// Per-particle energy T + V + g1N/2 int |psi|^4, in J.
double gpe_energy(const SpectralKinetic& kinetic, const Wavefunction1D& psi, const Eigen::VectorXd& potential,
                  double g1N);

// One Strang step exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2). The mean-field
// term uses the density before the step in the first half and after the
// kinetic step in the second.
class SplitStepPropagator {
public:
    SplitStepPropagator(const Grid1D& grid, double mass, double dt, double g1N = 0.0);

    double dt() const { return dt_; }
    void step(Eigen::VectorXcd& psi, const Eigen::VectorXd& potential_mid);

private:
    void potential_half(Eigen::VectorXcd& psi, const Eigen::VectorXd& v) const;

    struct Impl;
    std::shared_ptr<Impl> impl_;
    double dt_;
    double g1N_;
};

struct PropagationOptions {
    double g1N = 0.0;  // J m
    double mass = constants::mass_rb87;
    double t_start = 0.0;
    int observe_every = 0;  // steps between observer calls; 0 calls it only at the ends
    std::function<void(double, const Eigen::VectorXcd&)> observer;
    double edge_fraction = 1.0 / 32.0;  // outer band on each side watched for wrap-around
    double wrap_tolerance = 1e-10;
};

// Propagates from t_start to t_start + t_final. The step is shortened so an
// integer number of steps lands exactly on the end time.
Wavefunction1D propagate_tdse(const Wavefunction1D& psi0, const PotentialOfTime& potential, double t_final,
                              double dt, const PropagationOptions& opts = {});

double edge_density(const Wavefunction1D& psi, double edge_fraction);

struct GroundState {
    Wavefunction1D psi;
    double chemical_potential = 0.0;  // J
    double energy = 0.0;              // J per particle
    int steps = 0;
};

struct ImaginaryTimeOptions {
    double mass = constants::mass_rb87;
    double energy_tolerance = 1e-12;    // relative change per step
    double residual_tolerance = 1e-10;  // |(H - mu) psi| / |mu| on the last stage
    int max_steps = 400000;
    int stages = 3;                     // each stage divides the step by 4
    double initial_step = 0.0;          // s; 0 picks 0.5 hbar / (potential span)
};

// Imaginary-time split-step relaxation, seeded with the linear ground state
// of the 3-point discretization unless a guess is supplied.
GroundState gpe_ground_state(const Eigen::VectorXd& potential, double g1N, const Grid1D& grid,
                             const ImaginaryTimeOptions& opts = {}, const Wavefunction1D* guess = nullptr);
GroundState gpe_ground_state(const TrapParameters& params, double g1N, const Grid1D& grid,
                             const ImaginaryTimeOptions& opts = {});

// P_n = |<phi_n|psi>|^2 in the instantaneous eigenbasis of the full trap.
Eigen::VectorXd instantaneous_populations(const Wavefunction1D& psi, const TrapParameters& params, int k);

Wavefunction1D eigenstate(const TrapParameters& params, const Grid1D& grid, int n);

struct FidelityTrace {
    std::string abscissa = "t";
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;

    const std::vector<double>& series(const std::string& name) const;
    std::vector<double>& add_series(const std::string& name);
};

void write_trace_csv(std::ostream& out, const FidelityTrace& trace);
void write_snapshot_csv(std::ostream& out, const Wavefunction1D& psi);

enum class StartState { ground, excited };
std::string to_string(StartState s);

struct DemuxRun {
    double t_final = 0.0;
    std::function<TrapParameters(double)> params_of_t;
};

struct DemuxOptions {
    Grid1D grid{-15e-6, 15e-6, 2048};
    double dt = 1e-6;
    double stop_early = 2e-3;
    int workers = 1;
};

// Starts in eigenstate n (0 ground, 1 excited) of the t = 0 trap and returns
// |<phi_n(t_e)|psi(t_e)>| at t_e = t_final - stop_early.
double demux_fidelity(const DemuxRun& run, StartState start, const DemuxOptions& opts);
// One row per run (abscissa t_f, series "F"); runs are spread over workers
// and the rows keep the input order.
FidelityTrace demux_fidelity_scan(const std::vector<DemuxRun>& runs, StartState start, const DemuxOptions& opts);

// P0..P{k-1} sampled every sample_interval along a run, up to t_final, or
// t_final - stop_early when stop is set.
FidelityTrace population_trace(const DemuxRun& run, StartState start, const DemuxOptions& opts,
                               double sample_interval, int k = 3, bool stop = false);

}  // namespace stasplit
