#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "control_protocol.hpp"
#include "lattice1d.hpp"
#include "nelder_mead.hpp"

namespace stasplit {

struct MappingConfig {
    TrapParameters fixed;        // dx_offset, d_lattice, mass; v0 and omega seed the first slice
    Grid1D grid{-15e-6, 15e-6, 2048};
    std::size_t n_slices = 551;
    double omega_ref = 0.0;      // cost normalization, rad/s; 0 means delta(0) of the target
    double residual_threshold = 1e-6;
    double tolerance = 1e-10;    // simplex tolerance in units of the start scale
    int max_iter = 4000;
    double hold_fraction = 1e-3;              // below delta = hold_fraction omega_ref, hold V0
    double terminal_delta_fraction = 1e-8;    // last slice: raise V0 until delta = this * lambda; 0 disables
    double v0_max_hbar_omega = 100.0;         // V0 cap in units of hbar omega_ref
    double weight_delta = 1.0;
    double weight_lambda = 1.0;
};

enum class SliceMode { full, hold, terminal };

struct MappedTrajectory {
    std::vector<double> times;
    std::vector<double> v0;
    std::vector<double> omega;
    std::vector<double> residuals;
    std::vector<SliceMode> modes;
    TrapParameters fixed;

    std::size_t size() const { return times.size(); }
    TrapParameters params(std::size_t i) const;
};

// Monotone cubic (PCHIP) interpolation of (V0, omega) between slices.
class TrajectoryInterpolant {
public:
    explicit TrajectoryInterpolant(const MappedTrajectory& traj);
    TrapParameters operator()(double t) const;
    double t_final() const { return t_final_; }

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    double t_final_;
};

struct SliceTarget {
    double delta = 0.0;   // rad/s
    double lambda = 0.0;  // rad/s
};

struct SliceFit {
    double v0 = 0.0;     // J
    double omega = 0.0;  // rad/s
    double residual = 0.0;
    TwoLevelExtraction achieved;
};

// Per-slice solvers, exposed for diagnostics. The residual is the normalized
// cost (weighted squared mismatch over omega_ref^2); held slices count only lambda.
SliceFit fit_slice(const SliceTarget& target, double v0_start, double omega_start, const MappingConfig& cfg,
                   double omega_ref);
SliceFit fit_slice_hold(const SliceTarget& target, double v0_held, double omega_start, const MappingConfig& cfg,
                        double omega_ref);
SliceFit fit_slice_terminal(const SliceTarget& target, double v0_start, double omega_start,
                            const MappingConfig& cfg, double omega_ref);

TwoLevelExtraction extract_at(const TrapParameters& p, const Grid1D& grid);

MappedTrajectory map_protocol(const ControlProtocol& target, const MappingConfig& cfg);

void write_trajectory_csv(std::ostream& out, const MappedTrajectory& traj, const std::string& trap_hash);
// Returns the trap hash recorded in the header comment (empty if absent).
MappedTrajectory read_trajectory_csv(std::istream& in, const TrapParameters& fixed, std::string* trap_hash);

}  // namespace stasplit
