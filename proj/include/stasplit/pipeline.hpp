#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace stasplit {

struct RunContext {
    std::string out_dir = ".";
    int workers = 1;
    std::ostream* log = nullptr;  // progress lines when set
};

// Each command writes resolved_config.ini next to its outputs.

// protocol.csv: t, delta, lambda (rad/s).
void cmd_design(const ExperimentConfig& cfg, const RunContext& ctx);
// protocol.csv -> trajectory.csv, tagged with the trap hash.
void cmd_map(const ExperimentConfig& cfg, const RunContext& ctx);
// trajectory.csv -> fidelity.csv, populations_<state>.csv, snapshot_<state>.csv.
// Refuses a trajectory whose trap hash differs from the config.
void cmd_propagate(const ExperimentConfig& cfg, const RunContext& ctx);
// scan_tf.csv (shortcut vs linear demultiplexing), scan_lambda_<t_f>ms.csv per
// fast-forward duration and scan_g1N.csv.
void cmd_scan(const ExperimentConfig& cfg, const RunContext& ctx);
// ff_potential.csv, ff_splitting.csv and ff_fidelity.csv.
void cmd_ffsplit(const ExperimentConfig& cfg, const RunContext& ctx);

}  // namespace stasplit
