#include "stasplit/tdse.hpp"

#include <unsupported/Eigen/FFT>

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

using constants::hbar;

PotentialOfTime static_potential(Eigen::VectorXd v) {
    return [v = std::move(v)](double) { return v; };
}

PotentialOfTime trap_potential(std::function<TrapParameters(double)> params_of_t, const Grid1D& grid) {
    TrapParameters p0 = params_of_t(0.0);
    Eigen::VectorXd x = grid.points();
    Eigen::VectorXd half_x2 = 0.5 * x.array().square();
    Eigen::VectorXd lattice = (constants::pi * (x.array() - p0.dx_offset) / p0.d_lattice).cos().square();
    return [params_of_t = std::move(params_of_t), half_x2, lattice, p0](double t) -> Eigen::VectorXd {
        TrapParameters p = params_of_t(t);
        if (p.dx_offset != p0.dx_offset || p.d_lattice != p0.d_lattice || p.mass != p0.mass)
            throw ConfigError("trap_potential: only V0 and omega may vary along the path");
        return p.mass * p.omega * p.omega * half_x2 + p.v0 * lattice;
    };
}

namespace {

Eigen::VectorXd fft_wavenumbers(const Grid1D& grid) {
    const Eigen::Index n = grid.n_points;
    const double dk = 2.0 * constants::pi / (static_cast<double>(n) * grid.spacing());
    Eigen::VectorXd k(n);
    for (Eigen::Index j = 0; j < n; ++j)
        k(j) = dk * static_cast<double>(j < n / 2 ? j : j - n);
    return k;
}

}  // namespace

struct SpectralKinetic::Impl {
    Eigen::FFT<double> fft;
    Eigen::VectorXd energy;  // hbar^2 k^2 / 2m, J
    std::mutex lock;
};

SpectralKinetic::SpectralKinetic(const Grid1D& grid, double mass)
    : impl_(std::make_shared<Impl>()), k_(fft_wavenumbers(grid)), mass_(mass) {
    impl_->energy = hbar * hbar * k_.array().square() / (2.0 * mass);
}

Eigen::VectorXcd SpectralKinetic::apply(const Eigen::VectorXcd& psi) const {
    std::lock_guard<std::mutex> guard(impl_->lock);
    Eigen::VectorXcd spec, out;
    impl_->fft.fwd(spec, psi);
    spec.array() *= impl_->energy.array();
    impl_->fft.inv(out, spec);
    return out;
}

double SpectralKinetic::expectation(const Eigen::VectorXcd& psi) const {
    std::lock_guard<std::mutex> guard(impl_->lock);
    Eigen::VectorXcd spec;
    impl_->fft.fwd(spec, psi);
    return (spec.cwiseAbs2().array() * impl_->energy.array()).sum() / spec.squaredNorm();
}

Eigen::VectorXcd apply_hamiltonian(const SpectralKinetic& kinetic, const Eigen::VectorXcd& psi,
                                   const Eigen::VectorXd& potential, double g1N) {
    Eigen::VectorXcd out = kinetic.apply(psi);
    out.array() += (potential.array() + g1N * psi.cwiseAbs2().array()) * psi.array();
    return out;
}

double gpe_energy(const SpectralKinetic& kinetic, const Wavefunction1D& psi, const Eigen::VectorXd& potential,
                  double g1N) {
    const double dx = psi.grid.spacing();
    const double n2 = psi.norm() * psi.norm();
    Eigen::VectorXd rho = psi.density();
    double t = kinetic.expectation(psi.amplitudes);
    double v = rho.dot(potential) * dx / n2;
    double mf = 0.5 * g1N * rho.squaredNorm() * dx / (n2 * n2);
    return t + v + mf;
}

struct SplitStepPropagator::Impl {
    Eigen::FFT<double> fft;
    Eigen::VectorXcd kinetic_phase;
    Eigen::VectorXcd spectrum;
};

SplitStepPropagator::SplitStepPropagator(const Grid1D& grid, double mass, double dt, double g1N)
    : impl_(std::make_shared<Impl>()), dt_(dt), g1N_(g1N) {
    if (!(dt > 0.0))
        throw ConfigError("split step: dt must be positive");
    Eigen::VectorXd k = fft_wavenumbers(grid);
    Eigen::ArrayXd phase = -hbar * k.array().square() / (2.0 * mass) * dt;
    impl_->kinetic_phase = phase.cos().cast<Complex>() + Complex(0.0, 1.0) * phase.sin().cast<Complex>();
}

void SplitStepPropagator::potential_half(Eigen::VectorXcd& psi, const Eigen::VectorXd& v) const {
    Eigen::ArrayXd phase = -0.5 * dt_ / hbar * v.array();
    if (g1N_ != 0.0)
        phase -= 0.5 * dt_ / hbar * g1N_ * psi.cwiseAbs2().array();
    psi.array() *= phase.cos().cast<Complex>() + Complex(0.0, 1.0) * phase.sin().cast<Complex>();
}

void SplitStepPropagator::step(Eigen::VectorXcd& psi, const Eigen::VectorXd& potential_mid) {
    potential_half(psi, potential_mid);
    impl_->fft.fwd(impl_->spectrum, psi);
    impl_->spectrum.array() *= impl_->kinetic_phase.array();
    impl_->fft.inv(psi, impl_->spectrum);
    potential_half(psi, potential_mid);
}

double edge_density(const Wavefunction1D& psi, double edge_fraction) {
    const Eigen::Index n = psi.amplitudes.size();
    const Eigen::Index band = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(edge_fraction * n));
    double s = psi.amplitudes.head(band).squaredNorm() + psi.amplitudes.tail(band).squaredNorm();
    return s * psi.grid.spacing();
}

Wavefunction1D propagate_tdse(const Wavefunction1D& psi0, const PotentialOfTime& potential, double t_final,
                              double dt, const PropagationOptions& opts) {
    if (psi0.amplitudes.size() != psi0.grid.n_points)
        throw ConfigError("propagate: amplitude count does not match the grid");
    if (std::abs(psi0.norm() - 1.0) > 1e-9)
        throw ConfigError("propagate: initial state is not normalized");
    if (!(t_final >= 0.0) || !(dt > 0.0))
        throw ConfigError("propagate: need t_final >= 0 and dt > 0");
    const long n_steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt - 1e-9)));
    const double h = t_final / static_cast<double>(n_steps);
    Wavefunction1D psi = psi0;
    if (t_final == 0.0) {
        if (opts.observer)
            opts.observer(opts.t_start, psi.amplitudes);
        return psi;
    }
    SplitStepPropagator stepper(psi.grid, opts.mass, h, opts.g1N);
    auto check_edges = [&](double t) {
        double e = edge_density(psi, opts.edge_fraction);
        if (e > opts.wrap_tolerance)
            throw NumericalError("propagate: density " + format_number(e) + " reached the box edges at t = " +
                                 format_number(t) + " s; enlarge the grid");
    };
    if (opts.observer)
        opts.observer(opts.t_start, psi.amplitudes);
    for (long s = 0; s < n_steps; ++s) {
        const double t = opts.t_start + static_cast<double>(s) * h;
        Eigen::VectorXd v = potential(t + 0.5 * h);
        if (v.size() != psi.amplitudes.size())
            throw ConfigError("propagate: potential size does not match the grid");
        if (s == 0 || s % 256 == 0) {
            double span = (v.maxCoeff() - v.minCoeff()) * h / hbar;
            if (opts.g1N != 0.0)
                span += opts.g1N * psi.density().maxCoeff() * h / hbar;
            if (span > constants::pi / 4)
                throw NumericalError("propagate: potential phase per step " + format_number(span) +
                                     " rad exceeds pi/4 at t = " + format_number(t) + " s; reduce dt");
        }
        stepper.step(psi.amplitudes, v);
        const bool last = s + 1 == n_steps;
        if ((s + 1) % 1024 == 0 || last)
            check_edges(t + h);
        if (opts.observer && (last || (opts.observe_every > 0 && (s + 1) % opts.observe_every == 0)))
            opts.observer(last ? opts.t_start + t_final : t + h, psi.amplitudes);
    }
    if (!std::isfinite(psi.norm()) || std::abs(psi.norm() - 1.0) > 1e-9)
        throw NumericalError("propagate: norm drifted to " + format_number(psi.norm()));
    return psi;
}

GroundState gpe_ground_state(const Eigen::VectorXd& potential, double g1N, const Grid1D& grid,
                             const ImaginaryTimeOptions& opts, const Wavefunction1D* guess) {
    if (potential.size() != grid.n_points)
        throw ConfigError("gpe ground state: potential size does not match the grid");
    Wavefunction1D psi;
    if (guess) {
        psi = *guess;
    } else {
        auto lin = lowest_eigenpairs(hamiltonian_matrix(potential, grid, opts.mass), grid, 1);
        psi = Wavefunction1D(grid, lin.states.col(0).cast<Complex>());
    }
    psi.normalize();
    const double dx = grid.spacing();
    SpectralKinetic kinetic(grid, opts.mass);
    const Eigen::VectorXd kin = hbar * kinetic.wavenumbers().array().square() / (2.0 * opts.mass);  // rad/s
    const Eigen::VectorXd v = potential.array() - potential.minCoeff();
    Eigen::FFT<double> fft;
    Eigen::VectorXcd spec;

    // Largest initial rate sets the first step; later stages refine it.
    double span = v.maxCoeff() + g1N * psi.density().maxCoeff();
    double tau = opts.initial_step > 0.0 ? opts.initial_step : 0.5 * hbar / std::max(span, 1e-300);
    int total = 0;
    double energy = gpe_energy(kinetic, psi, potential, g1N);
    // |(H - mu) psi| / |mu|, with mu the mean-field Rayleigh quotient
    auto residual = [&] {
        Eigen::VectorXcd hpsi = apply_hamiltonian(kinetic, psi.amplitudes, potential, g1N);
        Complex mu = grid_dot(psi.amplitudes, hpsi, dx);
        return std::sqrt(grid_norm2(hpsi - mu * psi.amplitudes, dx)) / std::abs(mu);
    };
    for (int stage = 0; stage < opts.stages; ++stage, tau *= 0.25) {
        const bool last_stage = stage + 1 == opts.stages;
        Eigen::ArrayXd kin_decay = (-kin.array() * tau).exp();
        bool converged = false;
        double last_residual = std::numeric_limits<double>::infinity();
        int checks = 0;
        while (total < opts.max_steps) {
            for (int sub = 0; sub < 10; ++sub, ++total) {
                psi.amplitudes.array() *= (-0.5 * tau / hbar * (v.array() + g1N * psi.density().array())).exp();
                fft.fwd(spec, psi.amplitudes);
                spec.array() *= kin_decay;
                fft.inv(psi.amplitudes, spec);
                psi.normalize();
                if (g1N == 0.0) {
                    psi.amplitudes.array() *= (-0.5 * tau / hbar * v.array()).exp();
                } else {
                    // Second half with the density of its own output keeps the
                    // step symmetric; a few fixed-point passes settle it.
                    const Eigen::VectorXcd mid = psi.amplitudes;
                    for (int pass = 0; pass < 3; ++pass) {
                        Eigen::ArrayXd factor = (-0.5 * tau / hbar * (v.array() + g1N * psi.density().array())).exp();
                        psi.amplitudes = (mid.array() * factor).matrix();
                        psi.normalize();
                    }
                }
                psi.normalize();
            }
            double e = gpe_energy(kinetic, psi, potential, g1N);
            double change = std::abs(e - energy) / 10.0;
            energy = e;
            if (!std::isfinite(e))
                throw NumericalError("gpe ground state: energy diverged");
            if (!(change < opts.energy_tolerance * std::abs(e)))
                continue;
            if (!last_stage) {
                converged = true;
                break;
            }
            // The energy test alone is quadratic in the state error; finish on
            // the residual, or once it stalls at the splitting floor.
            if (++checks % 10 != 0)
                continue;
            double r = residual();
            if (r < opts.residual_tolerance || r > 0.999 * last_residual) {
                converged = true;
                break;
            }
            last_residual = r;
        }
        if (!converged)
            throw NumericalError("gpe ground state: no convergence in " + std::to_string(opts.max_steps) +
                                 " imaginary-time steps");
    }
    GroundState gs;
    gs.energy = energy;
    Eigen::VectorXd rho = psi.density();
    gs.chemical_potential = energy + 0.5 * g1N * rho.squaredNorm() * dx;
    gs.steps = total;
    gs.psi = std::move(psi);
    return gs;
}

GroundState gpe_ground_state(const TrapParameters& params, double g1N, const Grid1D& grid,
                             const ImaginaryTimeOptions& opts) {
    ImaginaryTimeOptions o = opts;
    o.mass = params.mass;
    return gpe_ground_state(potential(params, grid), g1N, grid, o);
}

Wavefunction1D eigenstate(const TrapParameters& params, const Grid1D& grid, int n) {
    auto s = lowest_eigenpairs(hamiltonian_matrix(params, grid), grid, n + 1);
    return Wavefunction1D(grid, s.states.col(n).cast<Complex>());
}

Eigen::VectorXd instantaneous_populations(const Wavefunction1D& psi, const TrapParameters& params, int k) {
    auto s = lowest_eigenpairs(hamiltonian_matrix(params, psi.grid), psi.grid, k);
    Eigen::VectorXd p(k);
    for (int n = 0; n < k; ++n)
        p(n) = std::norm(grid_dot(s.states.col(n).cast<Complex>(), psi.amplitudes, psi.grid.spacing()));
    return p;
}

const std::vector<double>& FidelityTrace::series(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return values[i];
    throw Error("trace has no series named " + name);
}

std::vector<double>& FidelityTrace::add_series(const std::string& name) {
    names.push_back(name);
    values.emplace_back();
    return values.back();
}

void write_trace_csv(std::ostream& out, const FidelityTrace& trace) {
    CsvTable t;
    t.header.push_back(trace.abscissa);
    t.header.insert(t.header.end(), trace.names.begin(), trace.names.end());
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        std::vector<double> row{trace.times[i]};
        for (const auto& v : trace.values)
            row.push_back(v.at(i));
        t.rows.push_back(std::move(row));
    }
    write_csv(out, t);
}

void write_snapshot_csv(std::ostream& out, const Wavefunction1D& psi) {
    CsvTable t;
    t.header = {"x", "re_psi", "im_psi", "density"};
    for (Eigen::Index i = 0; i < psi.amplitudes.size(); ++i) {
        Complex a = psi.amplitudes(i);
        t.rows.push_back({psi.grid.x(i), a.real(), a.imag(), std::norm(a)});
    }
    write_csv(out, t);
}

std::string to_string(StartState s) { return s == StartState::ground ? "ground" : "excited"; }

namespace {

int level(StartState s) { return s == StartState::ground ? 0 : 1; }

}  // namespace

double demux_fidelity(const DemuxRun& run, StartState start, const DemuxOptions& opts) {
    const double t_eval = run.t_final - opts.stop_early;
    if (!(t_eval > 0.0))
        throw ConfigError("demux: stop_early must be shorter than t_final");
    const int n = level(start);
    Wavefunction1D psi = eigenstate(run.params_of_t(0.0), opts.grid, n);
    PropagationOptions po;
    po.mass = run.params_of_t(0.0).mass;
    psi = propagate_tdse(psi, trap_potential(run.params_of_t, opts.grid), t_eval, opts.dt, po);
    Wavefunction1D target = eigenstate(run.params_of_t(t_eval), opts.grid, n);
    return std::abs(target.overlap(psi));
}

FidelityTrace demux_fidelity_scan(const std::vector<DemuxRun>& runs, StartState start, const DemuxOptions& opts) {
    FidelityTrace trace;
    trace.abscissa = "t_f";
    for (const auto& r : runs)
        trace.times.push_back(r.t_final);
    auto& f = trace.add_series("F");
    f.assign(runs.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
            try {
                f[i] = demux_fidelity(runs[i], start, opts);
            } catch (...) {
                std::lock_guard<std::mutex> g(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(runs.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
    return trace;
}

FidelityTrace population_trace(const DemuxRun& run, StartState start, const DemuxOptions& opts,
                               double sample_interval, int k, bool stop) {
    const double t_end = stop ? run.t_final - opts.stop_early : run.t_final;
    FidelityTrace trace;
    for (int n = 0; n < k; ++n)
        trace.add_series("P" + std::to_string(n));
    Wavefunction1D psi = eigenstate(run.params_of_t(0.0), opts.grid, level(start));
    PropagationOptions po;
    po.mass = run.params_of_t(0.0).mass;
    po.observe_every = std::max(1, static_cast<int>(std::lround(sample_interval / opts.dt)));
    po.observer = [&](double t, const Eigen::VectorXcd& a) {
        Eigen::VectorXd p = instantaneous_populations(Wavefunction1D(opts.grid, a), run.params_of_t(t), k);
        trace.times.push_back(t);
        for (int n = 0; n < k; ++n)
            trace.values[n].push_back(p(n));
    };
    propagate_tdse(psi, trap_potential(run.params_of_t, opts.grid), t_end, opts.dt, po);
    return trace;
}

}  // namespace stasplit
