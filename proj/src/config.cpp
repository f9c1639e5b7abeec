#include "stasplit/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

using constants::hbar;
using constants::pi;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text) {
    std::string s = trim(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

int parse_int(const std::string& text) {
    std::string s = trim(text);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("not an integer: '" + s + "'");
    return v;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::string s = trim(text);
    if (s.empty())
        return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_double(item));
    if (s.back() == ',')
        throw ConfigError("trailing comma in list");
    return out;
}

std::string print_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + format_number(v[i]);
    return s;
}

struct Field {
    std::string section, key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename S>
struct Section {
    std::string name;
    S ExperimentConfig::*member;
    std::vector<Field>* out;

    void add(const std::string& key, double S::*m) const {
        auto s = member;
        out->push_back({name, key, [s, m](ExperimentConfig& c, const std::string& v) { (c.*s).*m = parse_double(v); },
                        [s, m](const ExperimentConfig& c) { return format_number((c.*s).*m); }});
    }
    void add(const std::string& key, int S::*m) const {
        auto s = member;
        out->push_back({name, key, [s, m](ExperimentConfig& c, const std::string& v) { (c.*s).*m = parse_int(v); },
                        [s, m](const ExperimentConfig& c) { return std::to_string((c.*s).*m); }});
    }
    void add(const std::string& key, std::string S::*m) const {
        auto s = member;
        out->push_back({name, key, [s, m](ExperimentConfig& c, const std::string& v) { (c.*s).*m = trim(v); },
                        [s, m](const ExperimentConfig& c) { return (c.*s).*m; }});
    }
    void add(const std::string& key, std::vector<double> S::*m) const {
        auto s = member;
        out->push_back({name, key, [s, m](ExperimentConfig& c, const std::string& v) { (c.*s).*m = parse_list(v); },
                        [s, m](const ExperimentConfig& c) { return print_list((c.*s).*m); }});
    }
};

const std::vector<Field>& fields() {
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        using C = ExperimentConfig;
        Section<C::Trap> trap{"trap", &C::trap, &f};
        trap.add("omega0_hz", &C::Trap::omega0_hz);
        trap.add("lattice_spacing_um", &C::Trap::lattice_spacing_um);
        trap.add("lattice_offset_nm", &C::Trap::lattice_offset_nm);
        trap.add("mass_kg", &C::Trap::mass_kg);
        trap.add("x_min_um", &C::Trap::x_min_um);
        trap.add("x_max_um", &C::Trap::x_max_um);
        trap.add("n_points", &C::Trap::n_points);

        Section<C::Protocol> protocol{"protocol", &C::protocol, &f};
        protocol.add("kind", &C::Protocol::kind);
        protocol.add("t_final_ms", &C::Protocol::t_final_ms);
        protocol.add("lambda_f_per_s", &C::Protocol::lambda_f_per_s);
        protocol.add("lambda_dot0_per_s2", &C::Protocol::lambda_dot0_per_s2);
        protocol.add("rows", &C::Protocol::rows);

        Section<C::Mapping> mapping{"mapping", &C::mapping, &f};
        mapping.add("n_slices", &C::Mapping::n_slices);
        mapping.add("residual_threshold", &C::Mapping::residual_threshold);
        mapping.add("tolerance", &C::Mapping::tolerance);
        mapping.add("max_iter", &C::Mapping::max_iter);
        mapping.add("hold_fraction", &C::Mapping::hold_fraction);
        mapping.add("terminal_delta_fraction", &C::Mapping::terminal_delta_fraction);
        mapping.add("v0_max_hbar_omega", &C::Mapping::v0_max_hbar_omega);

        Section<C::Tdse> tdse{"tdse", &C::tdse, &f};
        tdse.add("ramp", &C::Tdse::ramp);
        tdse.add("start_state", &C::Tdse::start_state);
        tdse.add("dt_us", &C::Tdse::dt_us);
        tdse.add("stop_early_ms", &C::Tdse::stop_early_ms);
        tdse.add("population_interval_ms", &C::Tdse::population_interval_ms);
        tdse.add("populations", &C::Tdse::populations);

        Section<C::Scan> scan{"scan", &C::scan, &f};
        scan.add("t_final_ms", &C::Scan::t_final_ms);
        scan.add("lambda_t_final_ms", &C::Scan::lambda_t_final_ms);
        scan.add("lambda_over_hbar_omega", &C::Scan::lambda_over_hbar_omega);
        scan.add("g1N_hat", &C::Scan::g1N_hat);
        scan.add("g_scan_lambda_over_hbar_omega", &C::Scan::g_scan_lambda_over_hbar_omega);

        Section<C::Ffsplit> ff{"ffsplit", &C::ffsplit, &f};
        ff.add("amplitude", &C::Ffsplit::amplitude);
        ff.add("omega_rad_s", &C::Ffsplit::omega_rad_s);
        ff.add("x_f_um", &C::Ffsplit::x_f_um);
        ff.add("t_final_ms", &C::Ffsplit::t_final_ms);
        ff.add("g1N_hat", &C::Ffsplit::g1N_hat);
        ff.add("x_min_um", &C::Ffsplit::x_min_um);
        ff.add("x_max_um", &C::Ffsplit::x_max_um);
        ff.add("n_points", &C::Ffsplit::n_points);
        ff.add("dt_us", &C::Ffsplit::dt_us);
        ff.add("tail_cut", &C::Ffsplit::tail_cut);
        ff.add("wrap_tolerance", &C::Ffsplit::wrap_tolerance);
        ff.add("two_mode_slices", &C::Ffsplit::two_mode_slices);
        ff.add("potential_samples", &C::Ffsplit::potential_samples);
        ff.add("lambda_over_hbar_omega", &C::Ffsplit::lambda_over_hbar_omega);
        return f;
    }();
    return all;
}

[[noreturn]] void bad(const std::string& section, const std::string& key, const std::string& what) {
    throw ConfigError("config: [" + section + "] " + key + ": " + what);
}

void check(bool ok, const std::string& section, const std::string& key, const std::string& what) {
    if (!ok)
        bad(section, key, what);
}

bool all_positive(const std::vector<double>& v) {
    for (double x : v)
        if (!(x > 0.0))
            return false;
    return true;
}

void check_grid(const std::string& s, double lo, double hi, int n) {
    check(hi > lo, s, "x_max_um", "must exceed x_min_um");
    check(n >= 64 && (n & (n - 1)) == 0, s, "n_points", "must be a power of two >= 64");
}

}  // namespace

void validate(const ExperimentConfig& c) {
    const auto& t = c.trap;
    check(t.omega0_hz > 0.0, "trap", "omega0_hz", "must be positive");
    check(t.lattice_spacing_um > 0.0, "trap", "lattice_spacing_um", "must be positive");
    check(t.mass_kg > 0.0, "trap", "mass_kg", "must be positive");
    check_grid("trap", t.x_min_um, t.x_max_um, t.n_points);

    const auto& p = c.protocol;
    check(p.kind == "invariant" || p.kind == "faquad", "protocol", "kind", "must be invariant or faquad");
    check(p.t_final_ms > 0.0, "protocol", "t_final_ms", "must be positive");
    check(p.lambda_f_per_s > 0.0, "protocol", "lambda_f_per_s", "must be positive");
    check(p.rows >= 2, "protocol", "rows", "must be at least 2");

    const auto& m = c.mapping;
    check(m.n_slices >= 2, "mapping", "n_slices", "must be at least 2");
    check(m.residual_threshold > 0.0, "mapping", "residual_threshold", "must be positive");
    check(m.tolerance > 0.0, "mapping", "tolerance", "must be positive");
    check(m.max_iter > 0, "mapping", "max_iter", "must be positive");
    check(m.hold_fraction >= 0.0, "mapping", "hold_fraction", "must be non-negative");
    check(m.terminal_delta_fraction >= 0.0, "mapping", "terminal_delta_fraction", "must be non-negative");
    check(m.v0_max_hbar_omega > 0.0, "mapping", "v0_max_hbar_omega", "must be positive");

    const auto& d = c.tdse;
    check(d.ramp == "shortcut" || d.ramp == "linear", "tdse", "ramp", "must be shortcut or linear");
    check(d.start_state == "ground" || d.start_state == "excited" || d.start_state == "both", "tdse",
          "start_state", "must be ground, excited or both");
    check(d.dt_us > 0.0, "tdse", "dt_us", "must be positive");
    check(d.stop_early_ms >= 0.0 && d.stop_early_ms < p.t_final_ms, "tdse", "stop_early_ms",
          "must lie in [0, t_final_ms)");
    check(d.population_interval_ms > 0.0, "tdse", "population_interval_ms", "must be positive");
    check(d.populations >= 1 && d.populations <= 8, "tdse", "populations", "must lie in [1, 8]");

    const auto& s = c.scan;
    check(all_positive(s.t_final_ms), "scan", "t_final_ms", "entries must be positive");
    for (double tf : s.t_final_ms)
        check(tf > d.stop_early_ms, "scan", "t_final_ms", "entries must exceed tdse stop_early_ms");
    check(all_positive(s.lambda_t_final_ms), "scan", "lambda_t_final_ms", "entries must be positive");
    for (double l : s.lambda_over_hbar_omega)
        check(l >= 0.0, "scan", "lambda_over_hbar_omega", "entries must be non-negative");
    check(all_positive(s.g1N_hat), "scan", "g1N_hat", "entries must be positive");

    const auto& f = c.ffsplit;
    check(f.amplitude == "two_bump" || f.amplitude == "interpolated_gpe", "ffsplit", "amplitude",
          "must be two_bump or interpolated_gpe");
    check(f.omega_rad_s > 0.0, "ffsplit", "omega_rad_s", "must be positive");
    check(f.x_f_um > 0.0, "ffsplit", "x_f_um", "must be positive");
    check(f.t_final_ms > 0.0, "ffsplit", "t_final_ms", "must be positive");
    check(f.g1N_hat >= 0.0, "ffsplit", "g1N_hat", "must be non-negative");
    check(f.amplitude == "interpolated_gpe" || f.g1N_hat == 0.0, "ffsplit", "g1N_hat",
          "needs amplitude = interpolated_gpe");
    check_grid("ffsplit", f.x_min_um, f.x_max_um, f.n_points);
    check(std::abs(f.x_min_um + f.x_max_um) <= 1e-12 * (f.x_max_um - f.x_min_um), "ffsplit", "x_max_um",
          "grid must be mirror-symmetric");
    check(f.dt_us > 0.0, "ffsplit", "dt_us", "must be positive");
    check(f.tail_cut > 0.0 && f.tail_cut < 1e-2, "ffsplit", "tail_cut", "must lie in (0, 1e-2)");
    check(f.wrap_tolerance > 0.0, "ffsplit", "wrap_tolerance", "must be positive");
    check(f.two_mode_slices >= 4, "ffsplit", "two_mode_slices", "must be at least 4");
    check(f.potential_samples >= 2, "ffsplit", "potential_samples", "must be at least 2");
    for (double l : f.lambda_over_hbar_omega)
        check(l >= 0.0, "ffsplit", "lambda_over_hbar_omega", "entries must be non-negative");
}

ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::map<std::string, std::map<std::string, const Field*>> known;
    for (const auto& f : fields())
        known[f.section][f.key] = &f;
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        auto s = known.find(section);
        if (!body.data().empty())
            throw ConfigError("config: key '" + section + "' outside any section");
        if (s == known.end())
            throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            auto k = s->second.find(key);
            if (k == s->second.end())
                bad(section, key, "unknown key");
            try {
                k->second->set(cfg, value.data());
            } catch (const ConfigError& e) {
                bad(section, key, e.what());
            }
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

void write_resolved_config(std::ostream& out, const ExperimentConfig& cfg) {
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
            section = f.section;
        }
        out << f.key << " = " << f.get(cfg) << '\n';
    }
}

std::string trap_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& f : fields()) {
        if (f.section != "trap")
            continue;
        for (char c : f.key + "=" + f.get(cfg) + "\n") {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Grid1D trap_grid(const ExperimentConfig& cfg) {
    return Grid1D(cfg.trap.x_min_um * 1e-6, cfg.trap.x_max_um * 1e-6, cfg.trap.n_points);
}

TrapParameters trap_fixed(const ExperimentConfig& cfg) {
    TrapParameters p;
    p.omega = 2.0 * pi * cfg.trap.omega0_hz;
    p.dx_offset = cfg.trap.lattice_offset_nm * 1e-9;
    p.d_lattice = cfg.trap.lattice_spacing_um * 1e-6;
    p.mass = cfg.trap.mass_kg;
    return p;
}

MappingConfig mapping_config(const ExperimentConfig& cfg) {
    MappingConfig m;
    m.fixed = trap_fixed(cfg);
    m.grid = trap_grid(cfg);
    m.n_slices = static_cast<std::size_t>(cfg.mapping.n_slices);
    m.residual_threshold = cfg.mapping.residual_threshold;
    m.tolerance = cfg.mapping.tolerance;
    m.max_iter = cfg.mapping.max_iter;
    m.hold_fraction = cfg.mapping.hold_fraction;
    m.terminal_delta_fraction = cfg.mapping.terminal_delta_fraction;
    m.v0_max_hbar_omega = cfg.mapping.v0_max_hbar_omega;
    return m;
}

DemuxOptions demux_options(const ExperimentConfig& cfg, int workers) {
    DemuxOptions o;
    o.grid = trap_grid(cfg);
    o.dt = cfg.tdse.dt_us * 1e-6;
    o.stop_early = cfg.tdse.stop_early_ms * 1e-3;
    o.workers = workers;
    return o;
}

FastForwardOptions ff_options(const ExperimentConfig& cfg) {
    const auto& f = cfg.ffsplit;
    FastForwardOptions o;
    o.grid = Grid1D(f.x_min_um * 1e-6, f.x_max_um * 1e-6, f.n_points);
    o.tail_cut = f.tail_cut;
    o.dt = f.dt_us * 1e-6;
    o.wrap_tolerance = f.wrap_tolerance;
    return o;
}

double ff_g1N(const ExperimentConfig& cfg, double g1N_hat) {
    const double w = cfg.ffsplit.omega_rad_s;
    return g1N_hat * hbar * w * std::sqrt(hbar / (cfg.trap.mass_kg * w));
}

AmplitudeDesign ff_design(const ExperimentConfig& cfg, double t_final, double g1N_hat) {
    const auto& f = cfg.ffsplit;
    if (f.amplitude == "two_bump" && g1N_hat == 0.0)
        return AmplitudeDesign::two_bump(f.x_f_um * 1e-6, f.omega_rad_s, t_final, cfg.trap.mass_kg);
    return AmplitudeDesign::interpolated_gpe(f.x_f_um * 1e-6, f.omega_rad_s, t_final, ff_g1N(cfg, g1N_hat),
                                             ff_options(cfg).grid, cfg.trap.mass_kg);
}

}  // namespace stasplit
