#include "nuspec/csv.hpp"
#include "nuspec/error.hpp"
#include "nuspec/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nuspec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nuspec_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string config_field_of(const json& doc, Experiment e) {
    try {
        load_config(doc, e, ".");
    } catch (const ConfigError& err) {
        return err.field;
    }
    return "";
}

} // namespace

TEST(Csv, QuotingAndLineEnds) {
    CsvTable t({"a", "b,c"});
    t.push(CsvTable::Row().add("x\"y").add(1.5));
    t.push(CsvTable::Row().add(std::optional<double>{}).add(long(7)));
    EXPECT_EQ(t.str(), "a,\"b,c\"\r\n\"x\"\"y\",1.5\r\n,7\r\n");
    EXPECT_THROW(t.push(CsvTable::Row().add(1.0)), PreconditionError);
}

TEST(Csv, DoublesRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 2.0781, -1e-300, 6.02e23}) {
        EXPECT_EQ(std::stod(CsvTable::format_double(v)), v);
    }
    EXPECT_EQ(CsvTable::format_double(std::nan("")), "nan");
}

TEST(Config, SystemRoundTrip) {
    for (const auto& s : {SystemSpec::cat_map(), SystemSpec::perturbed_cat_map(0.05), SystemSpec::standard_map(2.5),
                          SystemSpec::henon(1.4, 0.3)}) {
        EXPECT_EQ(system_from_json(system_to_json(s)), s);
    }
}

TEST(Config, InvalidKindNamesField) {
    const json doc = {{"system", {{"kind", "catmap3"}}}, {"seed", 1}};
    EXPECT_EQ(config_field_of(doc, Experiment::Lyapunov), "system.kind");
}

TEST(Config, ValidationNamesFields) {
    EXPECT_EQ(config_field_of({{"parameters", {{"N", -5}}}}, Experiment::Lyapunov), "parameters.N");
    EXPECT_EQ(config_field_of({{"parameters", {{"bogus", 1}}}}, Experiment::Lyapunov), "parameters.bogus");
    EXPECT_EQ(config_field_of({{"parameters", {{"radii", {0.01, 0.1}}}}}, Experiment::RecurrenceScaling),
              "parameters.radii");
    EXPECT_EQ(config_field_of({{"system", {{"kind", "henon"}, {"params", {{"b", 0.0}}}}}}, Experiment::Lyapunov),
              "system.params.b");
    EXPECT_EQ(config_field_of({{"seed", -1}}, Experiment::Lyapunov), "seed");
    EXPECT_EQ(config_field_of({{"parameters", {{"theta", "big"}}}}, Experiment::NsCert), "parameters.theta");
    EXPECT_EQ(config_field_of({{"parameters", {{"q", {{"kind", "wavy"}}}}}}, Experiment::NsCert), "parameters.q.kind");
    EXPECT_EQ(config_field_of({{"experiment", "shadow"}}, Experiment::Lyapunov), "experiment");
    EXPECT_EQ(config_field_of({{"extra", 1}}, Experiment::Lyapunov), "config.extra");
}

TEST(Config, Overrides) {
    json doc = {{"system", {{"kind", "cat_map"}}}};
    apply_override(doc, "system.kind=perturbed_cat_map");
    apply_override(doc, "system.params.kappa=0.02");
    apply_override(doc, "parameters.S_list=[1,2]");
    EXPECT_EQ(doc["system"]["kind"], "perturbed_cat_map");
    EXPECT_DOUBLE_EQ(doc["system"]["params"]["kappa"].get<double>(), 0.02);
    EXPECT_EQ(doc["parameters"]["S_list"], json::array({1, 2}));
    EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
}

TEST(Config, ResolvedConfigFillsDefaults) {
    const auto cfg = load_config({{"parameters", {{"N", 5000}}}}, Experiment::Lyapunov, ".");
    const json r = resolved_config(cfg);
    EXPECT_EQ(r["parameters"]["N"], 5000);
    EXPECT_EQ(r["parameters"]["qr_period"], 10);
    EXPECT_EQ(r["experiment"], "lyapunov");
}

TEST(Run, LyapunovReportAndFiles) {
    const auto dir = scratch("lyap");
    const auto cfg = load_config({{"system", {{"kind", "cat_map"}}}, {"seed", 1}, {"parameters", {{"N", 100000}}}},
                                 Experiment::Lyapunov, dir.string());
    const auto res = run(cfg);
    EXPECT_EQ(res.exit_code, 0);
    const json rep = json::parse(slurp(dir / "report.json"));
    EXPECT_NEAR(rep["spectrum"]["lambda_u"].get<double>(), 0.962424, 1e-3);
    EXPECT_FALSE(rep["partial"].get<bool>());
    const json man = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(man["config"]["seed"], 1);
    EXPECT_FALSE(fs::exists(dir / "error.json"));
}

TEST(Run, FixedPointCertificate) {
    const json doc = {{"system", {{"kind", "cat_map"}}},
                      {"parameters",
                       {{"x", {0.0, 0.0}},
                        {"cover_points", {{0.0, 0.0}}},
                        {"sampling_start", {0.0, 0.0}},
                        {"sampling_length", 2000},
                        {"m", 50},
                        {"n", 50}}}};
    std::string csv;
    const auto res = run_in_memory(load_config(doc, Experiment::NsCert, "."), &csv);
    ASSERT_EQ(res.exit_code, 0) << res.report.dump();
    const auto& c = res.report["certificates"][0];
    EXPECT_TRUE(c["in_ball"].get<bool>());
    EXPECT_EQ(c["margins"]["max_distance"].get<double>(), 0.0);
    EXPECT_EQ(c["z"], json::array({0.0, 0.0}));
}

TEST(Run, ModuleErrorsProducePartialReport) {
    const auto dir = scratch("err");
    // Too short a return window: the glued pseudo-orbit cannot be closed.
    const auto cfg = load_config({{"parameters", {{"gap", 1e-9}, {"min_return", 1}, {"max_return", 2}}}},
                                 Experiment::Shadow, dir.string());
    const auto res = run(cfg);
    EXPECT_EQ(res.exit_code, 3);
    EXPECT_TRUE(res.partial);
    const json err = json::parse(slurp(dir / "error.json"));
    EXPECT_EQ(err["error"]["code"], "insufficient_horizon");
    EXPECT_TRUE(json::parse(slurp(dir / "report.json"))["partial"].get<bool>());
}

TEST(Run, ByteIdenticalReports) {
    const json doc = {{"system", {{"kind", "perturbed_cat_map"}, {"params", {{"kappa", 0.05}}}}},
                      {"seed", 9},
                      {"parameters", {{"count_fwd", 100}, {"count_bwd", 50}}}};
    const auto a = scratch("rep_a"), b = scratch("rep_b");
    run(load_config(doc, Experiment::Nonlacunarity, a.string()));
    run(load_config(doc, Experiment::Nonlacunarity, b.string()));
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
    EXPECT_EQ(slurp(a / "data.csv"), slurp(b / "data.csv"));
}

TEST(Run, ThreadCountDoesNotChangeOutput) {
    const json doc = {{"parameters", {{"points", 3}, {"m", 40}, {"n", 40}, {"sampling_length", 200000},
                                      {"block_samples", 100}}}};
    const auto cfg = load_config(doc, Experiment::NsCert, ".");
    setenv("NUSPEC_THREADS", "1", 1);
    const auto one = run_in_memory(cfg);
    setenv("NUSPEC_THREADS", "3", 1);
    const auto three = run_in_memory(cfg);
    unsetenv("NUSPEC_THREADS");
    EXPECT_EQ(one.report.dump(), three.report.dump());
}

TEST(Compare, CatMapPairPasses) {
    const json params = {{"x", {0.1234567, 0.7654321}}};
    const auto rec = run_in_memory(load_config({{"parameters", params}}, Experiment::RecurrenceScaling, "."));
    const auto lyap = run_in_memory(load_config({{"parameters", params}}, Experiment::Lyapunov, "."));
    const json out = compare_to_bound(rec.report, lyap.report);
    EXPECT_NEAR(out["bound"].get<double>(), 2.0781, 1e-3);
    EXPECT_TRUE(out["pass"].get<bool>());
}

TEST(Compare, FixedPointMeasuresNearZero) {
    const json params = {{"x", {0.0, 0.0}}};
    const auto rec = run_in_memory(load_config({{"parameters", params}}, Experiment::RecurrenceScaling, "."));
    const auto lyap = run_in_memory(load_config({{"parameters", params}}, Experiment::Lyapunov, "."));
    const json out = compare_to_bound(rec.report, lyap.report);
    EXPECT_LT(out["measured"].get<double>(), 0.2);
    EXPECT_TRUE(out["pass"].get<bool>());
}

TEST(Compare, Refusals) {
    const auto rec = run_in_memory(load_config({{"parameters", {{"x", {0.1, 0.2}}}}}, Experiment::RecurrenceScaling, "."));
    const auto other = run_in_memory(load_config({{"parameters", {{"x", {0.3, 0.2}}}}}, Experiment::Lyapunov, "."));
    EXPECT_THROW(compare_to_bound(rec.report, other.report), PreconditionError);

    json lyap = run_in_memory(load_config({{"parameters", {{"x", {0.1, 0.2}}}}}, Experiment::Lyapunov, ".")).report;
    lyap["spectrum"]["lambda_s"] = 0.5;
    try {
        compare_to_bound(rec.report, lyap);
        FAIL() << "expected refusal";
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("not hyperbolic"), std::string::npos);
    }
}

TEST(Cli, InvalidKindExitsNonzeroWithField) {
    const auto dir = scratch("cli");
    {
        std::ofstream f(dir / "bad.json");
        f << R"({"system": {"kind": "catmap3"}, "seed": 1})";
    }
    const std::string cmd = std::string(NUSPEC_CLI) + " lyapunov --config " + (dir / "bad.json").string() +
                            " --out " + (dir / "out").string() + " 2> " + (dir / "err.txt").string();
    const int status = std::system(cmd.c_str());
    EXPECT_NE(status, 0);
    EXPECT_NE(slurp(dir / "err.txt").find("\"field\": \"system.kind\""), std::string::npos);
}

TEST(Cli, SetOverridesAndWritesArtifacts) {
    const auto dir = scratch("cli_ok");
    {
        std::ofstream f(dir / "cfg.json");
        f << R"({"system": {"kind": "cat_map"}, "seed": 1, "parameters": {"length": 100}})";
    }
    const std::string cmd = std::string(NUSPEC_CLI) + " domination --config " + (dir / "cfg.json").string() +
                            " --set parameters.S_list=[1,2] --out " + (dir / "out").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    const json rep = json::parse(slurp(dir / "out" / "report.json"));
    EXPECT_EQ(rep["domination"]["S"], json::array({1, 2}));
    EXPECT_TRUE(fs::exists(dir / "out" / "data.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}
