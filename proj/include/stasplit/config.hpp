#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ffsplit.hpp"
#include "lattice1d.hpp"
#include "mapping.hpp"
#include "tdse.hpp"

namespace stasplit {

// INI file, one section per module. Every physical key carries its unit.
struct ExperimentConfig {
    struct Trap {
        double omega0_hz = 78.0;
        double lattice_spacing_um = 5.18;
        double lattice_offset_nm = 200.0;
        double mass_kg = constants::mass_rb87;
        double x_min_um = -15.0;
        double x_max_um = 15.0;
        int n_points = 2048;
    } trap;

    struct Protocol {
        std::string kind = "invariant";  // invariant | faquad
        double t_final_ms = 55.0;
        double lambda_f_per_s = 190.0;
        double lambda_dot0_per_s2 = 190.0;
        int rows = 1101;
    } protocol;

    struct Mapping {
        int n_slices = 551;
        double residual_threshold = 1e-6;
        double tolerance = 1e-10;
        int max_iter = 4000;
        double hold_fraction = 1e-3;
        double terminal_delta_fraction = 1e-8;
        double v0_max_hbar_omega = 100.0;
    } mapping;

    struct Tdse {
        std::string ramp = "shortcut";     // shortcut | linear
        std::string start_state = "both";  // ground | excited | both
        double dt_us = 1.0;
        double stop_early_ms = 2.0;
        double population_interval_ms = 0.5;
        int populations = 3;
    } tdse;

    struct Scan {
        std::vector<double> t_final_ms;              // demultiplexing, shortcut vs linear
        std::vector<double> lambda_t_final_ms;       // fast-forward bias scans, one per t_f
        std::vector<double> lambda_over_hbar_omega;
        std::vector<double> g1N_hat;                 // structural fidelity vs interaction
        double g_scan_lambda_over_hbar_omega = 0.02;
    } scan;

    struct Ffsplit {
        std::string amplitude = "two_bump";  // two_bump | interpolated_gpe
        double omega_rad_s = 780.0;
        double x_f_um = 4.0;
        double t_final_ms = 320.0;
        double g1N_hat = 0.0;
        double x_min_um = -15.0;
        double x_max_um = 15.0;
        int n_points = 2048;
        double dt_us = 10.0;
        double tail_cut = 1e-6;
        double wrap_tolerance = 1e-5;
        int two_mode_slices = 200;
        int potential_samples = 11;
        std::vector<double> lambda_over_hbar_omega{1e-8, 1e-5, 1e-4, 8e-4, 1e-2};
    } ffsplit;
};

// Throws ConfigError naming the offending section and key.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);

// Every key with its resolved value, in a fixed order.
void write_resolved_config(std::ostream& out, const ExperimentConfig& cfg);

// FNV-1a over the resolved [trap] section, 16 hex digits.
std::string trap_hash(const ExperimentConfig& cfg);

Grid1D trap_grid(const ExperimentConfig& cfg);
TrapParameters trap_fixed(const ExperimentConfig& cfg);  // v0 = 0, omega = omega0
MappingConfig mapping_config(const ExperimentConfig& cfg);
DemuxOptions demux_options(const ExperimentConfig& cfg, int workers);
FastForwardOptions ff_options(const ExperimentConfig& cfg);
// g1N in J m from the dimensionless coupling of [ffsplit].
double ff_g1N(const ExperimentConfig& cfg, double g1N_hat);
AmplitudeDesign ff_design(const ExperimentConfig& cfg, double t_final, double g1N_hat);

}  // namespace stasplit
