#pragma once

#include "nuspec/dynamics.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nuspec {

using json = nlohmann::json;

enum class Experiment { Lyapunov, RecurrenceScaling, Nonlacunarity, Shadow, NsCert, GnsCert, Sublinearity, Domination };

std::optional<Experiment> parse_experiment(std::string_view name);
std::string experiment_name(Experiment e);
std::vector<std::string> experiment_names();

// {"kind": "...", "params": {...}}; errors name the offending field.
json system_to_json(const SystemSpec& system);
SystemSpec system_from_json(const json& j, const std::string& field = "system");

struct ExperimentConfig {
    SystemSpec system = SystemSpec::cat_map();
    std::uint64_t seed = 0;
    Experiment experiment = Experiment::Lyapunov;
    json parameters = json::object();
    std::string output_dir = ".";
};

// Applies "a.b.c=value" to a config document. The value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(json& doc, const std::string& assignment);

// Builds and fully validates a config, including experiment parameters.
ExperimentConfig load_config(const json& doc, Experiment experiment, const std::string& output_dir);

// Config with every default filled in, as echoed by the manifest.
json resolved_config(const ExperimentConfig& config);

struct RunResult {
    int exit_code = 0;
    json report;
    bool partial = false;
    std::optional<json> error;
};

// Runs the experiment and writes report.json, data.csv (when the experiment has
// tabular output) and manifest.json into config.output_dir.
RunResult run(const ExperimentConfig& config);

// Runs the experiment without touching the file system.
RunResult run_in_memory(const ExperimentConfig& config, std::string* csv = nullptr);

// Compares a recurrence-scaling report against a lyapunov report.
json compare_to_bound(const json& recurrence_report, const json& lyapunov_report, double tolerance = 0.35);

// Structured error document for a caught exception.
json error_json(const std::exception& e);

// Worker count from NUSPEC_THREADS (default 1, at least 1).
int worker_count();

} // namespace nuspec
