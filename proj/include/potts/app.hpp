#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "potts/model.hpp"

namespace potts {

using Json = nlohmann::json;

struct Budgets {
    std::uint64_t states = 19683;          // full enumeration (3^9)
    std::size_t search_states = 2'000'000; // capped searches
    std::size_t saddle_expansions = 2'000'000;
    std::size_t family_members = 1'000'000;
};

struct ExperimentConfig {
    Json raw;  // after overrides; hashed for the manifest
    std::string command;
    TorusLattice lattice{2, 2};
    CouplingParams params = CouplingParams::from_gammas(1.0, 2.0, 2.0, 1.0);
    std::uint64_t seed = 1;
    Budgets budgets;
    std::vector<double> beta_grid;
    std::filesystem::path out_dir = "out";
    int threads = 1;
    Json block = Json::object();  // command-specific settings
};

// Parsing throws ConfigError with the offending field (or line/column for malformed JSON).
Json load_config_file(const std::filesystem::path& path);
Json parse_config_text(const std::string& text);
// "a.b.c=value"; value is read as JSON when it parses, otherwise as a string.
void apply_override(Json& cfg, const std::string& assignment);
ExperimentConfig parse_config(const Json& cfg);

// FNV-1a 64 over the canonical dump, as 16 hex digits.
std::string config_hash(const Json& cfg);
std::string version_string();

struct RunResult {
    int exit_code = 0;  // 0 ok, 1 assertion failure
    std::vector<std::string> artifacts;
    Json manifest;
    std::string message;
};

// Runs the configured command and writes its artifacts plus manifest.json into out_dir.
// Throws ConfigError or BudgetExceeded; the caller maps them to exit codes 2 and 3.
RunResult run(const ExperimentConfig& cfg);

// Writes via a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

enum ExitCode { kExitOk = 0, kExitAssertion = 1, kExitConfig = 2, kExitBudget = 3 };

}  // namespace potts
