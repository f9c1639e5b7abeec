#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

#include "stasplit/config.hpp"
#include "stasplit/errors.hpp"
#include "stasplit/pipeline.hpp"

using namespace stasplit;

namespace {

enum Exit { ok = 0, config_error = 2, numerical_error = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design, map and verify fast double-well splitting protocols"};
    app.require_subcommand(1, 1);

    std::string config_path, out_dir = ".";
    int workers = 1;
    bool verbose = false;

    using Command = std::function<void(const ExperimentConfig&, const RunContext&)>;
    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"design", {"write the control protocol (protocol.csv)", cmd_design}},
        {"map", {"map protocol.csv onto trap parameters (trajectory.csv)", cmd_map}},
        {"propagate", {"propagate along trajectory.csv; fidelities, populations, snapshots", cmd_propagate}},
        {"scan", {"duration, bias and interaction scans", cmd_scan}},
        {"ffsplit", {"fast-forward potential, splitting and fidelity scan", cmd_ffsplit}},
    };
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "experiment config (INI)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads for scans")->check(CLI::PositiveNumber);
        sub->add_flag("--verbose", verbose, "progress on stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config_error;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        ExperimentConfig cfg = load_config(config_path);
        RunContext ctx;
        ctx.out_dir = out_dir;
        ctx.workers = workers;
        ctx.log = verbose ? &std::cerr : nullptr;
        commands.at(name).second(cfg, ctx);
    } catch (const ConfigError& e) {
        std::cerr << "stasplit " << name << ": " << e.what() << '\n';
        return Exit::config_error;
    } catch (const NumericalError& e) {
        std::cerr << "stasplit " << name << ": " << e.what() << '\n';
        return Exit::numerical_error;
    } catch (const std::exception& e) {
        std::cerr << "stasplit " << name << ": " << e.what() << '\n';
        return 1;
    }
    return Exit::ok;
}
