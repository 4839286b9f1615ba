// Command-line front end: one command per process, artifacts under --out.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "potts/app.hpp"
#include "potts/errors.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Three-state Potts model: landscape, gates, dynamics and spectra"};
    cli.require_subcommand(1, 1);
    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 0;
    std::string out_dir;
    for (const char* name : {"check", "landscape", "gates", "simulate", "spectral", "refpath"}) {
        CLI::App* sub = cli.add_subcommand(name);
        sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--set", overrides, "override a config field, key.path=value");
        sub->add_option("--threads", threads, "worker cap");
        sub->add_option("--out", out_dir, "output directory");
    }
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = cli.exit(e);
        return code == 0 ? 0 : potts::kExitConfig;
    }
    std::string command = cli.get_subcommands().front()->get_name();
    try {
        potts::Json raw = potts::load_config_file(config_path);
        if (!raw.is_object()) throw potts::ConfigError("config must be a JSON object");
        raw["command"] = command;
        for (const auto& o : overrides) potts::apply_override(raw, o);
        if (threads > 0) raw["threads"] = threads;
        if (!out_dir.empty()) raw["output"]["dir"] = out_dir;
        potts::ExperimentConfig cfg = potts::parse_config(raw);
        potts::RunResult r = potts::run(cfg);
        std::cout << r.manifest.dump(2) << "\n";
        if (r.exit_code != 0) std::fprintf(stderr, "potts %s: %s\n", command.c_str(), r.message.c_str());
        return r.exit_code;
    } catch (const potts::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return potts::kExitConfig;
    } catch (const potts::BudgetExceeded& e) {
        std::fprintf(stderr, "budget refusal: %s\n", e.what());
        return potts::kExitBudget;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return potts::kExitAssertion;
    }
}
