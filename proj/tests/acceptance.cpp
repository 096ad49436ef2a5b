// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "nuspec/csv.hpp"
#include "nuspec/experiments.hpp"
#include "nuspec/recurrence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using nuspec::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
}

struct Timed {
    nuspec::RunResult result;
    std::string csv;
    double seconds = 0.0;
};

Timed run(const std::string& experiment, const json& doc) {
    const auto exp = nuspec::parse_experiment(experiment);
    const auto cfg = nuspec::load_config(doc, *exp, ".");
    Timed t;
    const auto start = std::chrono::steady_clock::now();
    t.result = nuspec::run_in_memory(cfg, &t.csv);
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (t.result.error) throw std::runtime_error(t.result.error->dump());
    return t;
}

json cat_map() { return {{"kind", "cat_map"}}; }
json perturbed() { return {{"kind", "perturbed_cat_map"}, {"params", {{"kappa", 0.05}}}}; }

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

const double kCatExponent = std::log((3.0 + std::sqrt(5.0)) / 2.0);

// Criterion 5 and 6 share these scans.
json scan_cat, scan_perturbed;

json sublinearity_scan(const json& system) {
    return run("sublinearity", {{"system", system},
                                {"seed", 7},
                                {"parameters",
                                 {{"points", 10},
                                  {"theta", 0.05},
                                  {"eta_fractions", {0.1}},
                                  {"mn", {{100, 100}, {200, 200}, {400, 400}, {800, 800}}}}}})
        .result.report;
}

} // namespace

int main() {
    report(1, "lyapunov oracle", [] {
        const auto t = run("lyapunov", {{"system", cat_map()}, {"seed", 1}, {"parameters", {{"N", 100000}}}});
        const auto& s = t.result.report.at("spectrum");
        const double eu = std::abs(s.at("lambda_u").get<double>() - kCatExponent);
        const double es = std::abs(s.at("lambda_s").get<double>() + kCatExponent);
        const bool ok = eu <= 1e-3 && es <= 1e-3 && t.seconds < 5.0;
        return Outcome{ok, fmt("|dlambda_u|=%.2e", eu) + fmt(" |dlambda_s|=%.2e", es) + fmt(" time=%.2fs", t.seconds)};
    });

    report(2, "recurrence bound", [] {
        const auto t = run("recurrence-scaling", {{"system", cat_map()},
                                                  {"seed", 11},
                                                  {"parameters", {{"exp_min", 4}, {"exp_max", 14}, {"grid", 5}}}});
        const auto& r = t.result.report.at("recurrence");
        const double bound = 2.0 / kCatExponent;
        const bool reported = r.at("ratios").size() == 11 && r.contains("censored_count");
        if (r.at("limsup_estimate").is_null()) return Outcome{false, "every radius censored"};
        const double est = r.at("limsup_estimate").get<double>();
        const bool ok = reported && est <= bound * 1.35 && est >= bound * 0.5 && t.seconds < 60.0;
        return Outcome{ok, fmt("limsup=%.4f", est) + fmt(" bound=%.4f", bound) +
                               " censored=" + r.at("censored_count").dump() + fmt(" time=%.2fs", t.seconds)};
    });

    report(3, "nonlacunarity", [] {
        const json params = {{"area", 0.05}, {"count_fwd", 500}, {"count_bwd", 0}, {"epsilon", 0.2}};
        const auto t = run("nonlacunarity", {{"system", cat_map()}, {"seed", 3}, {"parameters", params}});
        const auto& rep = t.result.report;
        const double dev = rep.at("nonlacunarity").at("tail_deviation").at("100").get<double>();
        const auto& hit = rep.at("interval_hit");
        if (hit.at("N").is_null()) return Outcome{false, fmt("tail(100)=%.4f, interval check failed", dev)};
        const long N = hit.at("N").get<long>();
        const long through = hit.at("checked_through").get<long>();
        // Independent sweep over the returned times.
        std::vector<long> times;
        for (const auto& row : parse_csv(t.csv)) {
            if (row.size() >= 2 && row[0] != "i") times.push_back(std::stol(row[1]));
        }
        bool sweep = true;
        for (long n = N; n <= through && sweep; ++n) {
            const auto it = std::lower_bound(times.begin(), times.end(), n);
            sweep = it != times.end() && double(*it) <= 1.2 * double(n);
        }
        const bool ok = dev <= 0.10 && sweep;
        return Outcome{ok, fmt("tail(100)=%.4f", dev) + " N=" + std::to_string(N) +
                               " through=" + std::to_string(through) + (sweep ? " sweep ok" : " sweep FAILED")};
    });

    report(4, "shadowing", [] {
        const auto t = run("shadow", {{"system", perturbed()},
                                      {"seed", 1},
                                      {"parameters", {{"n1", 40}, {"gap", 1e-4}, {"tau_factor", 100.0},
                                                      {"epsilon_factor", 0.8}}}});
        const auto& rep = t.result.report;
        const auto& sol = rep.at("solution");
        const double delta = rep.at("pseudo_orbit").at("delta").get<double>();
        const int p = sol.at("period").get<int>();
        const double res = sol.at("residual").get<double>();
        const int iters = sol.at("newton_iters").get<int>();
        const bool prof = rep.at("profile").at("pass").get<bool>();
        const bool ok = delta <= 1e-4 && p >= 40 && p <= 100 && res <= 1e-11 && iters <= 12 && prof;
        return Outcome{ok, "p=" + std::to_string(p) + fmt(" gap=%.2e", delta) + fmt(" residual=%.2e", res) +
                               " iters=" + std::to_string(iters) + (prof ? " profile pass" : " profile FAIL")};
    });

    report(5, "ns certificate", [] {
        scan_cat = sublinearity_scan(cat_map());
        scan_perturbed = sublinearity_scan(perturbed());
        bool ok = true;
        std::string detail;
        for (const auto* scan : {&scan_cat, &scan_perturbed}) {
            detail += scan == &scan_cat ? "cat" : " perturbed";
            for (const auto& row : scan->at("summary")) {
                const int pts = row.at("points").get<int>();
                const int in = row.at("in_ball").get<int>();
                ok = ok && pts == 10 && in >= 9 && row.at("period_bound_ok").get<int>() == pts &&
                     row.at("margins_ok").get<int>() == pts;
                detail += " " + std::to_string(in) + "/" + std::to_string(pts);
            }
        }
        return Outcome{ok, detail + " (in_ball per size; period and margins checked on all)"};
    });

    report(6, "sublinearity", [] {
        bool ok = true;
        std::string detail;
        for (const auto* scan : {&scan_cat, &scan_perturbed}) {
            const auto& rows = scan->at("summary");
            if (rows.size() != 4) return Outcome{false, "scan from criterion 5 unavailable"};
            const double r100 = rows.front().at("mean_ratio").get<double>();
            const double r800 = rows.back().at("mean_ratio").get<double>();
            const double limit = rows.back().at("paper_bound").get<double>() + 0.15;
            ok = ok && r800 <= r100 && r800 <= limit;
            detail += (scan == &scan_cat ? "cat " : " perturbed ") + fmt("%.3f", r100) + fmt("->%.3f", r800) +
                      fmt(" (limit %.3f)", limit);
        }
        return Outcome{ok, detail};
    });

    const json mixing_cover = {{"mixing", true}, {"delta", 0.1}, {"block_samples", 400}, {"sampling_length", 1000000}};

    report(7, "gns certificate", [&] {
        json params = mixing_cover;
        params.update({{"segments", 3}, {"m", 60}, {"n", 60}, {"target_gap_extra", 7}});
        const auto t = run("gns-cert", {{"system", cat_map()}, {"seed", 1}, {"parameters", params}});
        const auto& c = t.result.report.at("certificate");
        const auto& tg = t.result.report.at("target");
        bool flags = true;
        for (const auto* g : {&c, &tg}) {
            for (const auto& s : g->at("segments")) flags = flags && s.at("in_ball").get<bool>();
        }
        const bool ok = flags && c.at("budget_ok").get<bool>() && c.at("pair_bounds_ok").get<bool>() &&
                        c.at("offsets_consistent").get<bool>() && tg.at("target_achieved").get<bool>() &&
                        tg.at("period") == tg.at("period_formula") && tg.at("offsets_consistent").get<bool>();
        return Outcome{ok, "sum p=" + c.at("total_gap").dump() + " sum K=" + c.at("gap_budget").dump() +
                               " target=" + tg.at("target_total_gap").dump() + " achieved=" +
                               tg.at("total_gap").dump() + " period=" + tg.at("period").dump()};
    });

    report(8, "mixing strengthening", [&] {
        json params = mixing_cover;
        params.update({{"m", 100}, {"n", 100}, {"mixing_periods", 5}});
        const auto t = run("ns-cert", {{"system", cat_map()}, {"seed", 1}, {"parameters", params}});
        const auto& per = t.result.report.at("mixing_periods");
        bool ok = per.size() == 5;
        std::string ps;
        for (std::size_t i = 0; i < per.size(); ++i) {
            const long p = per[i].at("p").get<long>();
            ok = ok && per[i].at("in_ball").get<bool>() && p == per[0].at("p").get<long>() + long(i) &&
                 p >= per[i].at("m_plus_n_plus_K").get<long>();
            ps += (i ? "," : "") + std::to_string(p);
        }
        return Outcome{ok, "periods " + ps + " m+n+K=" + per[0].at("m_plus_n_plus_K").dump()};
    });

    report(9, "domination", [] {
        auto dom = [](bool swapped) {
            return run("domination", {{"system", cat_map()},
                                      {"seed", 1},
                                      {"parameters", {{"lambda", 0.9}, {"S_list", {1, 5, 10}}, {"swapped", swapped}}}})
                .result.report.at("domination");
        };
        const auto good = dom(false);
        const auto bad = dom(true);
        bool all_fail = true;
        for (const auto& q : bad.at("worst_quotient")) all_fail = all_fail && q.get<double>() > -1.8;
        const bool ok = good.at("pass").get<bool>() && !bad.at("pass").get<bool>() && all_fail;
        return Outcome{ok, "eigen fields worst " + good.at("worst_quotient").dump() + ", swapped worst " +
                               bad.at("worst_quotient").dump()};
    });

    report(10, "q = 1 reduction", [&] {
        json params = mixing_cover;
        params.update({{"m", 100}, {"n", 100}, {"theta", 0.05}, {"q", {{"kind", "constant"}, {"c", 1.0}}}});
        const auto t = run("ns-cert", {{"system", cat_map()}, {"seed", 5}, {"parameters", params}});
        const std::string theta = nuspec::CsvTable::format_double(0.05);
        const auto rows = parse_csv(t.csv);
        std::size_t count = 0;
        bool same = rows.size() > 1;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            same = same && rows[i].at(3) == theta;
            ++count;
        }
        return Outcome{same, std::to_string(count) + " allowances compared against theta=" + theta};
    });

    report(11, "reproducibility", [&] {
        const std::vector<std::pair<std::string, json>> runs = {
            {"lyapunov", {{"N", 20000}, {"block_samples", 50}}},
            {"recurrence-scaling", {{"exp_min", 4}, {"exp_max", 9}}},
            {"nonlacunarity", {{"count_fwd", 200}, {"count_bwd", 100}}},
            {"shadow", json::object()},
            {"ns-cert", {{"points", 3}, {"m", 50}, {"n", 50}, {"sampling_length", 300000}, {"block_samples", 200}}},
            {"gns-cert", {{"m", 40}, {"n", 40}, {"sampling_length", 300000}, {"block_samples", 200}}},
            {"sublinearity", {{"points", 2}, {"mn", {{50, 50}, {100, 100}}}, {"sampling_length", 300000},
                              {"block_samples", 200}}},
            {"domination", {{"length", 300}}},
        };
        bool ok = true;
        std::string differing;
        for (const auto& [name, params] : runs) {
            const json doc = {{"system", perturbed()}, {"seed", 42}, {"parameters", params}};
            const auto a = run(name, doc);
            const auto b = run(name, doc);
            const bool same = a.result.report.dump(2) == b.result.report.dump(2) && a.csv == b.csv;
            if (!same) differing += " " + name;
            ok = ok && same;
        }
        return Outcome{ok, ok ? "8 experiments byte-identical across two runs" : "differs:" + differing};
    });

    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
