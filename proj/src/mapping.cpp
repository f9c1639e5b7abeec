#include "stasplit/mapping.hpp"

#include <cmath>

// Boost 1.74 pchip.hpp calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include <istream>
#include <limits>
#include <ostream>

#include "stasplit/constants.hpp"
#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

using constants::hbar;

TrapParameters MappedTrajectory::params(std::size_t i) const {
    TrapParameters p = fixed;
    p.v0 = v0.at(i);
    p.omega = omega.at(i);
    return p;
}

struct TrajectoryInterpolant::Impl {
    using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
    std::unique_ptr<Pchip> v0, omega;
    TrapParameters fixed;
    double t0 = 0.0, t1 = 0.0;
};

TrajectoryInterpolant::TrajectoryInterpolant(const MappedTrajectory& traj) {
    if (traj.size() < 4)
        throw ConfigError("trajectory needs at least 4 slices for interpolation");
    auto impl = std::make_shared<Impl>();
    impl->fixed = traj.fixed;
    impl->t0 = traj.times.front();
    impl->t1 = traj.times.back();
    impl->v0 = std::make_unique<Impl::Pchip>(std::vector<double>(traj.times), std::vector<double>(traj.v0));
    impl->omega = std::make_unique<Impl::Pchip>(std::vector<double>(traj.times), std::vector<double>(traj.omega));
    t_final_ = impl->t1;
    impl_ = std::move(impl);
}

TrapParameters TrajectoryInterpolant::operator()(double t) const {
    t = std::clamp(t, impl_->t0, impl_->t1);
    TrapParameters p = impl_->fixed;
    p.v0 = std::max(0.0, (*impl_->v0)(t));
    p.omega = std::max(0.0, (*impl_->omega)(t));
    return p;
}

TwoLevelExtraction extract_at(const TrapParameters& p, const Grid1D& grid) {
    return extract_two_level(p, lr_basis(p, grid), grid);
}

namespace {

constexpr double bad_cost = std::numeric_limits<double>::infinity();

TrapParameters make_params(const MappingConfig& cfg, double v0, double omega) {
    TrapParameters p = cfg.fixed;
    p.v0 = v0;
    p.omega = omega;
    return p;
}

double normalized_cost(const TwoLevelExtraction& e, const SliceTarget& target, const MappingConfig& cfg,
                       double omega_ref) {
    double dd = (e.delta - target.delta) / omega_ref;
    double dl = (e.lambda - target.lambda) / omega_ref;
    return cfg.weight_delta * dd * dd + cfg.weight_lambda * dl * dl;
}

double lambda_cost(const TwoLevelExtraction& e, const SliceTarget& target, const MappingConfig& cfg,
                   double omega_ref) {
    double dl = (e.lambda - target.lambda) / omega_ref;
    return cfg.weight_lambda * dl * dl;
}

// Unbound or ill-posed trial points count as infinitely bad for the simplex.
template <typename F>
double guarded(F&& f) {
    try {
        return f();
    } catch (const NumericalError&) {
        return bad_cost;
    }
}

SliceFit finish(const MappingConfig& cfg, double v0, double omega, double residual) {
    SliceFit fit;
    fit.v0 = v0;
    fit.omega = omega;
    fit.residual = residual;
    fit.achieved = extract_at(make_params(cfg, v0, omega), cfg.grid);
    return fit;
}

}  // namespace

SliceFit fit_slice(const SliceTarget& target, double v0_start, double omega_start, const MappingConfig& cfg,
                   double omega_ref) {
    const double e_ref = hbar * omega_ref;
    auto cost = [&](const Eigen::Vector2d& y) {
        return guarded([&] {
            auto e = extract_at(make_params(cfg, std::abs(y(0)) * e_ref, std::abs(y(1)) * omega_ref), cfg.grid);
            return normalized_cost(e, target, cfg, omega_ref);
        });
    };
    Eigen::Vector2d start(v0_start / e_ref, omega_start / omega_ref);
    Eigen::Vector2d scale(0.02, 0.005);
    NelderMeadResult<2> best;
    for (int attempt = 0; attempt < 3; ++attempt) {
        try {
            best = nelder_mead<2>(cost, start, scale, cfg.tolerance, cfg.max_iter);
        } catch (const NelderMeadError<2>& e) {
            best = e.best;
        }
        if (best.value <= cfg.residual_threshold)
            break;
        start = best.argmin;
        scale *= 10.0;  // restart with an enlarged simplex
    }
    return finish(cfg, std::abs(best.argmin(0)) * e_ref, std::abs(best.argmin(1)) * omega_ref, best.value);
}

SliceFit fit_slice_hold(const SliceTarget& target, double v0_held, double omega_start, const MappingConfig& cfg,
                        double omega_ref) {
    auto cost = [&](const Eigen::Matrix<double, 1, 1>& y) {
        return guarded([&] {
            auto e = extract_at(make_params(cfg, v0_held, std::abs(y(0)) * omega_ref), cfg.grid);
            return lambda_cost(e, target, cfg, omega_ref);
        });
    };
    Eigen::Matrix<double, 1, 1> start(omega_start / omega_ref), scale(0.005);
    NelderMeadResult<1> best;
    for (int attempt = 0; attempt < 3; ++attempt) {
        try {
            best = nelder_mead<1>(cost, start, scale, cfg.tolerance, cfg.max_iter);
        } catch (const NelderMeadError<1>& e) {
            best = e.best;
        }
        if (best.value <= cfg.residual_threshold)
            break;
        start = best.argmin;
        scale *= 10.0;
    }
    return finish(cfg, v0_held, std::abs(best.argmin(0)) * omega_ref, best.value);
}

SliceFit fit_slice_terminal(const SliceTarget& target, double v0_start, double omega_start,
                            const MappingConfig& cfg, double omega_ref) {
    const double e_ref = hbar * omega_ref;
    const double v0_max = cfg.v0_max_hbar_omega * e_ref;
    const double goal = cfg.terminal_delta_fraction * target.lambda;
    // Raise V0 (refitting omega to lambda at each height) until the wells
    // decouple down to delta = goal.
    double omega = omega_start;
    auto probe = [&](double v0) {
        auto fit = fit_slice_hold(target, v0, omega, cfg, omega_ref);
        omega = fit.omega;
        return fit;
    };
    double lo = v0_start;
    SliceFit at_lo = probe(lo);
    if (at_lo.achieved.delta <= goal)
        return at_lo;
    double hi = std::max(lo, 0.5 * e_ref);
    SliceFit at_hi = at_lo;
    while (true) {
        hi *= 1.25;
        if (hi > v0_max)
            throw NumericalError("terminal slice: V0 above cap before the wells decouple (delta = " +
                                 format_number(at_hi.achieved.delta) + " rad/s)");
        at_hi = probe(hi);
        if (at_hi.achieved.delta <= goal)
            break;
        lo = hi;
        at_lo = at_hi;
    }
    // bisection on log(delta)
    for (int it = 0; it < 60; ++it) {
        if (std::abs(std::log(at_hi.achieved.delta / goal)) < 1e-3 || hi - lo < 1e-9 * hi)
            break;
        double mid = 0.5 * (lo + hi);
        SliceFit m = probe(mid);
        if (m.achieved.delta <= goal) {
            hi = mid;
            at_hi = m;
        } else {
            lo = mid;
        }
    }
    at_hi.residual = normalized_cost(at_hi.achieved, target, cfg, omega_ref);
    return at_hi;
}

MappedTrajectory map_protocol(const ControlProtocol& target, const MappingConfig& cfg) {
    if (cfg.n_slices < 100)
        throw ConfigError("mapping: n_slices must be at least 100");
    cfg.fixed.validate();
    double omega_ref = cfg.omega_ref;
    if (omega_ref <= 0.0) {
        auto h0 = target(0.0);
        omega_ref = h0.delta_tunnel > 0.0 ? h0.delta_tunnel : std::hypot(h0.delta_tunnel, h0.lambda_bias);
    }
    if (!(omega_ref > 0.0))
        throw ConfigError("mapping: cannot infer omega_ref from the protocol");
    const double e_ref = hbar * omega_ref;
    const double v0_max = cfg.v0_max_hbar_omega * e_ref;

    MappedTrajectory traj;
    traj.fixed = cfg.fixed;
    double v0 = cfg.fixed.v0;
    double omega = cfg.fixed.omega > 0.0 ? cfg.fixed.omega : omega_ref;
    const std::size_t n = cfg.n_slices;
    for (std::size_t i = 0; i < n; ++i) {
        double t = i + 1 == n ? target.t_final() : target.t_final() * static_cast<double>(i) / (n - 1);
        auto h = target(t);
        SliceTarget st{h.delta_tunnel, h.lambda_bias};
        bool weak = st.delta < cfg.hold_fraction * omega_ref;
        SliceMode mode = SliceMode::full;
        SliceFit fit;
        if (weak && i + 1 == n && cfg.terminal_delta_fraction > 0.0) {
            mode = SliceMode::terminal;
            fit = fit_slice_terminal(st, v0, omega, cfg, omega_ref);
        } else if (weak && i > 0) {
            mode = SliceMode::hold;
            fit = fit_slice_hold(st, v0, omega, cfg, omega_ref);
        } else {
            fit = fit_slice(st, v0, omega, cfg, omega_ref);
        }
        if (fit.v0 > v0_max)
            throw NumericalError("mapping: slice " + std::to_string(i) + " (t = " + format_number(t) +
                                 " s) needs V0 above the cap of " + format_number(cfg.v0_max_hbar_omega) +
                                 " hbar omega");
        if (!(fit.residual <= cfg.residual_threshold))
            throw NumericalError("mapping: slice " + std::to_string(i) + " (t = " + format_number(t) +
                                 " s) unreachable, residual " + format_number(fit.residual));
        v0 = fit.v0;
        omega = fit.omega;
        traj.times.push_back(t);
        traj.v0.push_back(v0);
        traj.omega.push_back(omega);
        traj.residuals.push_back(fit.residual);
        traj.modes.push_back(mode);
    }
    return traj;
}

void write_trajectory_csv(std::ostream& out, const MappedTrajectory& traj, const std::string& trap_hash) {
    CsvTable t;
    t.comments.push_back(" trap_hash=" + trap_hash);
    t.header = {"t", "V0_joule", "omega_rad_s", "residual"};
    for (std::size_t i = 0; i < traj.size(); ++i)
        t.rows.push_back({traj.times[i], traj.v0[i], traj.omega[i], traj.residuals[i]});
    write_csv(out, t);
}

MappedTrajectory read_trajectory_csv(std::istream& in, const TrapParameters& fixed, std::string* trap_hash) {
    auto t = read_csv(in);
    if (t.header != std::vector<std::string>{"t", "V0_joule", "omega_rad_s", "residual"})
        throw ConfigError("trajectory csv: header must be t,V0_joule,omega_rad_s,residual");
    if (trap_hash) {
        trap_hash->clear();
        for (const auto& c : t.comments) {
            auto pos = c.find("trap_hash=");
            if (pos != std::string::npos)
                *trap_hash = c.substr(pos + 10);
        }
    }
    MappedTrajectory traj;
    traj.fixed = fixed;
    for (const auto& r : t.rows) {
        if (!traj.times.empty() && !(r[0] > traj.times.back()))
            throw ConfigError("trajectory csv: times must be strictly ascending");
        if (r[1] < 0.0 || r[2] < 0.0)
            throw ConfigError("trajectory csv: negative V0 or omega");
        traj.times.push_back(r[0]);
        traj.v0.push_back(r[1]);
        traj.omega.push_back(r[2]);
        traj.residuals.push_back(r[3]);
        traj.modes.push_back(SliceMode::full);
    }
    return traj;
}

}  // namespace stasplit
