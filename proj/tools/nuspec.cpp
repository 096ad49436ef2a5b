// nuspec <experiment> --config path [--set k=v ...] [--out dir]
// nuspec compare --recurrence report.json --lyapunov report.json [--tolerance t]
#include "nuspec/error.hpp"
#include "nuspec/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using nuspec::json;

namespace {

json read_json(const std::string& path, const std::string& field) {
    std::ifstream f(path);
    if (!f) throw nuspec::ConfigError(field, "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw nuspec::ConfigError(field, path + ": " + e.what());
    }
}

int fail(const std::exception& e, int code) {
    std::cerr << "nuspec: " << e.what() << "\n" << nuspec::error_json(e).dump(2) << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments on hyperbolic surface maps"};
    std::string experiment;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    std::string rec_path, lyap_path;
    double tolerance = 0.35;

    auto names = nuspec::experiment_names();
    names.push_back("compare");
    std::string choices;
    for (const auto& n : names) choices += (choices.empty() ? "" : ", ") + n;

    app.add_option("experiment", experiment, "One of: " + choices)->required();
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", overrides, "Override a config field, e.g. system.params.kappa=0.05");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--recurrence", rec_path, "compare: recurrence-scaling report.json");
    app.add_option("--lyapunov", lyap_path, "compare: lyapunov report.json");
    app.add_option("--tolerance", tolerance, "compare: relative tolerance on the bound");
    CLI11_PARSE(app, argc, argv);

    if (experiment == "compare") {
        try {
            if (rec_path.empty() || lyap_path.empty()) {
                throw nuspec::ConfigError("compare", "compare needs --recurrence and --lyapunov");
            }
            const json out = nuspec::compare_to_bound(read_json(rec_path, "--recurrence"),
                                                      read_json(lyap_path, "--lyapunov"), tolerance);
            std::cout << out.dump(2) << "\n";
            return out.at("pass").get<bool>() ? 0 : 1;
        } catch (const nuspec::ConfigError& e) {
            return fail(e, 2);
        } catch (const std::exception& e) {
            return fail(e, 3);
        }
    }

    nuspec::ExperimentConfig cfg;
    try {
        const auto exp = nuspec::parse_experiment(experiment);
        if (!exp) throw nuspec::ConfigError("experiment", "unknown experiment \"" + experiment + "\" (expected " + choices + ")");
        if (config_path.empty()) throw nuspec::ConfigError("--config", "--config is required");
        json doc = read_json(config_path, "--config");
        for (const auto& s : overrides) nuspec::apply_override(doc, s);
        cfg = nuspec::load_config(doc, *exp, out_dir);
    } catch (const std::exception& e) {
        return fail(e, 2);
    }

    try {
        const auto res = nuspec::run(cfg);
        if (res.error) {
            std::cerr << "nuspec: " << res.error->at("error").at("message").get<std::string>() << "\n";
        }
        return res.exit_code;
    } catch (const std::exception& e) {
        return fail(e, 3);
    }
}
