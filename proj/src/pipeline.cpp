#include "stasplit/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/protocols.hpp"

namespace stasplit {

using constants::hbar;
using constants::pi;

namespace {

namespace fs = std::filesystem;

std::string path_in(const RunContext& ctx, const std::string& name) { return (fs::path(ctx.out_dir) / name).string(); }

void prepare(const ExperimentConfig& cfg, const RunContext& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory " + ctx.out_dir + ": " + ec.message());
    std::ofstream out(path_in(ctx, "resolved_config.ini"));
    if (!out)
        throw Error("cannot write " + path_in(ctx, "resolved_config.ini"));
    write_resolved_config(out, cfg);
}

void note(const RunContext& ctx, const std::string& line) {
    if (ctx.log)
        *ctx.log << line << std::endl;
}

template <typename F>
auto in_context(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(where + ": " + e.what());
    }
}

// body(i) for i < n over a worker pool; the first failure is rethrown.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& body) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex lock;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (!failure)
                    failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < std::min<int>(workers, static_cast<int>(n)); ++w)
        pool.emplace_back(work);
    work();
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
}

double omega0(const ExperimentConfig& cfg) { return 2.0 * pi * cfg.trap.omega0_hz; }

ControlProtocol design_protocol(const ExperimentConfig& cfg, double t_final) {
    const auto& p = cfg.protocol;
    if (p.kind == "faquad")
        return faquad_schedule(omega0(cfg), p.lambda_f_per_s, t_final).protocol;
    return invariant_protocol(omega0(cfg), p.lambda_f_per_s, p.lambda_dot0_per_s2, t_final);
}

std::vector<StartState> start_states(const ExperimentConfig& cfg) {
    const auto& s = cfg.tdse.start_state;
    if (s == "ground")
        return {StartState::ground};
    if (s == "excited")
        return {StartState::excited};
    return {StartState::ground, StartState::excited};
}

DemuxRun shortcut_run(const MappedTrajectory& traj) {
    TrajectoryInterpolant f(traj);
    return {f.t_final(), [f](double t) { return f(t); }};
}

// omega held at omega0, V0 rising linearly to the shortcut's final value
DemuxRun linear_run(const ExperimentConfig& cfg, double v0_final, double t_final) {
    ScalarSchedule ramp = linear_ramp(v0_final, t_final);
    TrapParameters fixed = trap_fixed(cfg);
    return {t_final, [ramp, fixed](double t) {
                TrapParameters p = fixed;
                p.v0 = ramp(t);
                return p;
            }};
}

double mean_x(const Wavefunction1D& psi) {
    return (psi.density().array() * psi.grid.points().array()).sum() * psi.grid.spacing();
}

}  // namespace

void cmd_design(const ExperimentConfig& cfg, const RunContext& ctx) {
    prepare(cfg, ctx);
    auto protocol = in_context("design", [&] { return design_protocol(cfg, cfg.protocol.t_final_ms * 1e-3); });
    std::ofstream out(path_in(ctx, "protocol.csv"));
    write_protocol_csv(out, protocol, static_cast<std::size_t>(cfg.protocol.rows));
    note(ctx, "design: " + cfg.protocol.kind + " protocol, " + std::to_string(cfg.protocol.rows) + " rows");
}

void cmd_map(const ExperimentConfig& cfg, const RunContext& ctx) {
    prepare(cfg, ctx);
    const std::string src = path_in(ctx, "protocol.csv");
    std::ifstream in(src);
    if (!in)
        throw ConfigError("map: missing " + src + " (run design first)");
    ControlProtocol target = in_context("map: " + src, [&] { return read_protocol_csv(in); });
    if (std::abs(target.t_final() - cfg.protocol.t_final_ms * 1e-3) > 1e-9 * target.t_final())
        throw ConfigError("map: " + src + " ends at t = " + format_number(target.t_final()) +
                          " s but the config has t_final_ms = " + format_number(cfg.protocol.t_final_ms));
    MappedTrajectory traj = in_context("map", [&] { return map_protocol(target, mapping_config(cfg)); });
    std::ofstream out(path_in(ctx, "trajectory.csv"));
    write_trajectory_csv(out, traj, trap_hash(cfg));
    double worst = 0.0;
    for (double r : traj.residuals)
        worst = std::max(worst, r);
    note(ctx, "map: " + std::to_string(traj.size()) + " slices, max residual " + format_number(worst));
}

void cmd_propagate(const ExperimentConfig& cfg, const RunContext& ctx) {
    prepare(cfg, ctx);
    const std::string src = path_in(ctx, "trajectory.csv");
    std::ifstream in(src);
    if (!in)
        throw ConfigError("propagate: missing " + src + " (run map first)");
    std::string hash;
    MappedTrajectory traj =
        in_context("propagate: " + src, [&] { return read_trajectory_csv(in, trap_fixed(cfg), &hash); });
    if (hash != trap_hash(cfg))
        throw ConfigError("propagate: " + src + " was mapped for trap hash '" + hash +
                          "', the config's [trap] section hashes to '" + trap_hash(cfg) + "'");
    if (traj.size() < 2)
        throw ConfigError("propagate: " + src + " needs at least 2 slices");

    DemuxRun run = shortcut_run(traj);
    if (cfg.tdse.ramp == "linear")
        run = linear_run(cfg, traj.v0.back(), run.t_final);
    const DemuxOptions o = demux_options(cfg, ctx.workers);
    const double t_eval = run.t_final - o.stop_early;
    if (!(t_eval > 0.0))
        throw ConfigError("propagate: stop_early_ms must be shorter than the trajectory");
    const int k = cfg.tdse.populations;
    const std::vector<StartState> starts = start_states(cfg);

    struct Outcome {
        FidelityTrace pops;
        Wavefunction1D psi;
        double F = 0.0;
    };
    std::vector<Outcome> outcomes(starts.size());
    parallel_for(starts.size(), ctx.workers, [&](std::size_t j) {
        const int n = starts[j] == StartState::ground ? 0 : 1;
        Outcome& r = outcomes[j];
        for (int m = 0; m < k; ++m)
            r.pops.add_series("P" + std::to_string(m));
        PropagationOptions po;
        po.mass = cfg.trap.mass_kg;
        po.observe_every = std::max(1, static_cast<int>(std::lround(cfg.tdse.population_interval_ms * 1e-3 / o.dt)));
        po.observer = [&](double t, const Eigen::VectorXcd& a) {
            Eigen::VectorXd p = instantaneous_populations(Wavefunction1D(o.grid, a), run.params_of_t(t), k);
            r.pops.times.push_back(t);
            for (int m = 0; m < k; ++m)
                r.pops.values[m].push_back(p(m));
        };
        in_context("propagate " + to_string(starts[j]), [&] {
            Wavefunction1D psi0 = eigenstate(run.params_of_t(0.0), o.grid, n);
            r.psi = propagate_tdse(psi0, trap_potential(run.params_of_t, o.grid), t_eval, o.dt, po);
            r.F = std::abs(eigenstate(run.params_of_t(t_eval), o.grid, n).overlap(r.psi));
            return 0;
        });
    });

    CsvTable fid;
    fid.comments.push_back(" ramp=" + cfg.tdse.ramp + " state: 0 ground, 1 excited");
    fid.header = {"state", "t_eval", "F", "mean_x"};
    for (std::size_t j = 0; j < starts.size(); ++j) {
        const std::string name = to_string(starts[j]);
        fid.rows.push_back({starts[j] == StartState::ground ? 0.0 : 1.0, t_eval, outcomes[j].F, mean_x(outcomes[j].psi)});
        std::ofstream pops(path_in(ctx, "populations_" + name + ".csv"));
        write_trace_csv(pops, outcomes[j].pops);
        std::ofstream snap(path_in(ctx, "snapshot_" + name + ".csv"));
        write_snapshot_csv(snap, outcomes[j].psi);
        note(ctx, "propagate: " + name + " F = " + format_number(outcomes[j].F));
    }
    write_csv_file(path_in(ctx, "fidelity.csv"), fid);
}

void cmd_scan(const ExperimentConfig& cfg, const RunContext& ctx) {
    prepare(cfg, ctx);
    const std::vector<StartState> starts = start_states(cfg);

    // shortcut vs linear ramp over t_f
    {
        const auto& tfs = cfg.scan.t_final_ms;
        CsvTable t;
        t.header = {"t_f"};
        for (auto s : starts) {
            t.header.push_back("shortcut_" + to_string(s));
            t.header.push_back("linear_" + to_string(s));
        }
        t.rows.assign(tfs.size(), {});
        const DemuxOptions o = demux_options(cfg, 1);
        const double slice = cfg.protocol.t_final_ms * 1e-3 / (cfg.mapping.n_slices - 1);
        parallel_for(tfs.size(), ctx.workers, [&](std::size_t i) {
            const double tf = tfs[i] * 1e-3;
            const std::string where = "scan t_f = " + format_number(tf) + " s";
            MappingConfig m = mapping_config(cfg);
            m.n_slices = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(tf / slice)) + 1);
            MappedTrajectory traj = in_context(where, [&] { return map_protocol(design_protocol(cfg, tf), m); });
            DemuxRun sc = shortcut_run(traj), lin = linear_run(cfg, traj.v0.back(), tf);
            std::vector<double> row{tf};
            for (auto s : starts) {
                row.push_back(in_context(where + " shortcut", [&] { return demux_fidelity(sc, s, o); }));
                row.push_back(in_context(where + " linear", [&] { return demux_fidelity(lin, s, o); }));
            }
            t.rows[i] = std::move(row);
            note(ctx, where + " done");
        });
        write_csv_file(path_in(ctx, "scan_tf.csv"), t);
    }

    // fast-forward bias scans
    for (double tf_ms : cfg.scan.lambda_t_final_ms) {
        const std::string name = "scan_lambda_" + format_number(tf_ms) + "ms.csv";
        std::vector<FidelityScanRow> rows;
        if (!cfg.scan.lambda_over_hbar_omega.empty()) {
            rows = in_context("scan " + name, [&] {
                FastForward ff(ff_design(cfg, tf_ms * 1e-3, cfg.ffsplit.g1N_hat), ff_options(cfg));
                TwoModeOptions tm;
                tm.n_slices = cfg.ffsplit.two_mode_slices;
                return fidelity_scan(ff, cfg.scan.lambda_over_hbar_omega, ctx.workers, tm);
            });
        }
        std::ofstream out(path_in(ctx, name));
        write_fidelity_scan_csv(out, rows);
        note(ctx, "scan: wrote " + name);
    }

    // structural fidelity against the interaction strength
    {
        const auto& gs = cfg.scan.g1N_hat;
        const double w = cfg.ffsplit.omega_rad_s;
        const double lambda = cfg.scan.g_scan_lambda_over_hbar_omega * hbar * w;
        CsvTable t;
        t.comments.push_back(" lambda_over_hbar_omega=" + format_number(cfg.scan.g_scan_lambda_over_hbar_omega));
        t.header = {"g1N_hat", "F_S", "imbalance_closed_form", "imbalance_minimized"};
        t.rows.assign(gs.size(), {});
        parallel_for(gs.size(), ctx.workers, [&](std::size_t i) {
            const std::string where = "scan g1N_hat = " + format_number(gs[i]);
            double fs = in_context(where, [&] {
                FastForward ff(ff_design(cfg, cfg.ffsplit.t_final_ms * 1e-3, gs[i]), ff_options(cfg));
                return structural_fidelity(ff, lambda);
            });
            t.rows[i] = {gs[i], fs, appendix_a_imbalance(lambda, w, gs[i]),
                         minimized_imbalance(HarmonicWellEnergies{lambda, w, gs[i]})};
            note(ctx, where + " done");
        });
        write_csv_file(path_in(ctx, "scan_g1N.csv"), t);
    }
}

void cmd_ffsplit(const ExperimentConfig& cfg, const RunContext& ctx) {
    prepare(cfg, ctx);
    const auto& f = cfg.ffsplit;
    const double tf = f.t_final_ms * 1e-3;
    FastForward ff = in_context("ffsplit", [&] { return FastForward(ff_design(cfg, tf, f.g1N_hat), ff_options(cfg)); });
    const Grid1D& grid = ff.grid();

    CsvTable pot;
    pot.header = {"t", "x", "V_FF"};
    for (int j = 0; j < f.potential_samples; ++j) {
        double t = j + 1 == f.potential_samples ? tf : tf * j / (f.potential_samples - 1);
        Eigen::VectorXd v = in_context("ffsplit potential at t = " + format_number(t) + " s", [&] { return ff.potential(t); });
        for (Eigen::Index i = 0; i < grid.n_points; ++i)
            pot.rows.push_back({t, grid.x(i), v(i)});
    }
    write_csv_file(path_in(ctx, "ff_potential.csv"), pot);

    TwoModeSplitting split = in_context("ffsplit two-mode basis", [&] { return two_mode_splitting(ff, f.two_mode_slices); });
    CsvTable sp;
    sp.header = {"t", "delta", "r4"};
    for (std::size_t j = 0; j < split.times.size(); ++j)
        sp.rows.push_back({split.times[j], split.delta[j], split.r4[j]});
    write_csv_file(path_in(ctx, "ff_splitting.csv"), sp);
    note(ctx, "ffsplit: final splitting " + format_number(split.delta.back()) + " rad/s");

    std::vector<FidelityScanRow> rows;
    if (!f.lambda_over_hbar_omega.empty()) {
        TwoModeOptions tm;
        tm.n_slices = f.two_mode_slices;
        rows = in_context("ffsplit scan", [&] { return fidelity_scan(ff, f.lambda_over_hbar_omega, ctx.workers, tm); });
    }
    std::ofstream out(path_in(ctx, "ff_fidelity.csv"));
    write_fidelity_scan_csv(out, rows);
    note(ctx, "ffsplit: " + std::to_string(rows.size()) + " bias values");
}

}  // namespace stasplit
