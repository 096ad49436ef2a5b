#include "nuspec/experiments.hpp"

#include "nuspec/csv.hpp"
#include "nuspec/error.hpp"
#include "nuspec/lyapunov.hpp"
#include "nuspec/recurrence.hpp"
#include "nuspec/rng.hpp"
#include "nuspec/shadowing.hpp"
#include "nuspec/specification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <thread>

namespace nuspec {

namespace {

// Random streams drawn from the run seed.
enum Stream : std::uint64_t { kPointStream = 0, kSpectrumStream = 1, kBlockStream = 2, kSamplingStream = 3 };

const std::map<Experiment, std::string> kNames = {
    {Experiment::Lyapunov, "lyapunov"},       {Experiment::RecurrenceScaling, "recurrence-scaling"},
    {Experiment::Nonlacunarity, "nonlacunarity"}, {Experiment::Shadow, "shadow"},
    {Experiment::NsCert, "ns-cert"},          {Experiment::GnsCert, "gns-cert"},
    {Experiment::Sublinearity, "sublinearity"}, {Experiment::Domination, "domination"},
};

json point_json(const Point2& p) { return json::array({p.x, p.y}); }

// Reads one object of parameters, recording every key it hands out so that
// leftovers can be rejected and defaults echoed back.
class Params {
public:
    Params(const json& obj, std::string prefix) : prefix_(std::move(prefix)) {
        if (!obj.is_object()) {
            throw ConfigError(prefix_, prefix_ + " must be a JSON object");
        }
        obj_ = obj;
    }

    std::string field(const std::string& key) const { return prefix_ + "." + key; }

    template <class T>
    T get(const std::string& key, const T& def) {
        used_.insert(key);
        T v = def;
        if (obj_.contains(key)) v = convert<T>(key);
        resolved_[key] = v;
        return v;
    }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        used_.insert(key);
        if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
        T v = convert<T>(key);
        resolved_[key] = v;
        return v;
    }

    std::optional<Point2> point(const std::string& key, Space space) {
        const auto v = opt<std::vector<double>>(key);
        if (!v) return std::nullopt;
        require(v->size() == 2 && std::isfinite((*v)[0]) && std::isfinite((*v)[1]), key,
                "must be a pair of finite numbers");
        return space == Space::Torus2 ? torus_point((*v)[0], (*v)[1]) : plane_point((*v)[0], (*v)[1]);
    }

    json sub(const std::string& key, const json& def) {
        used_.insert(key);
        return obj_.contains(key) ? obj_.at(key) : def;
    }
    void set_resolved(const std::string& key, json v) { resolved_[key] = std::move(v); }

    void require(bool ok, const std::string& key, const std::string& what) const {
        if (!ok) throw ConfigError(field(key), field(key) + " " + what);
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!used_.count(k)) throw ConfigError(field(k), "unknown parameter " + field(k));
        }
    }

    const json& resolved() const { return resolved_; }

private:
    template <class T>
    T convert(const std::string& key) const {
        try {
            return obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key), field(key) + " has the wrong type");
        }
    }

    json obj_;
    std::string prefix_;
    std::set<std::string> used_;
    json resolved_ = json::object();
};

template <class F>
std::exception_ptr parallel_for(int count, F f) {
    std::vector<std::exception_ptr> errors(std::size_t(std::max(count, 0)));
    const int workers = std::min(worker_count(), count);
    auto body = [&](int i) {
        try {
            f(i);
        } catch (...) {
            errors[std::size_t(i)] = std::current_exception();
        }
    };
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int i = next++; i < count; i = next++) body(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) return e;
    }
    return nullptr;
}

// ---- shared pieces ---------------------------------------------------------

struct SpectrumParams {
    long N = 100000;
    int qr_period = 10;

    static SpectrumParams parse(Params& p) {
        SpectrumParams s;
        s.N = p.get<long>("lyapunov_N", s.N);
        s.qr_period = p.get<int>("qr_period", s.qr_period);
        p.require(s.qr_period >= 1, "qr_period", "must be >= 1");
        p.require(s.N >= 10L * s.qr_period, "lyapunov_N", "must be at least 10 * qr_period");
        return s;
    }
};

json spectrum_json(const LyapunovSpectrum& s) {
    return {{"exponents", s.exponents}, {"lambda_s", s.lambda_s}, {"lambda_u", s.lambda_u},
            {"Lambda_s", s.Lambda_s},   {"Lambda_u", s.Lambda_u}, {"horizon", s.horizon},
            {"hyperbolic", s.hyperbolic}, {"mean_log_det", s.mean_log_det},
            {"exponent_sum", s.exponents.empty() ? 0.0 : s.exponents.front() + s.exponents.back()}};
}

SlowVaryingFn parse_q(Params& p, double eta) {
    Params qp(p.sub("q", json{{"kind", "constant"}, {"c", 1.0}}), p.field("q"));
    const auto kind = qp.get<std::string>("kind", "constant");
    const double c = qp.get<double>("c", 1.0);
    qp.require(c > 0.0, "c", "must be positive");
    SlowVaryingFn q;
    if (kind == "constant") {
        qp.finish();
        q = SlowVaryingFn::constant(c, eta);
    } else if (kind == "modulated") {
        const double a = qp.get<double>("amplitude", 0.0);
        const int freq = qp.get<int>("frequency", 1);
        qp.require(a >= 0.0 && a < 1.0, "amplitude", "must lie in [0, 1)");
        qp.finish();
        q = SlowVaryingFn::modulated(c, a, freq, eta);
    } else {
        throw ConfigError(qp.field("kind"), qp.field("kind") + " must be \"constant\" or \"modulated\"");
    }
    p.set_resolved("q", qp.resolved());
    return q;
}

json q_json(const SlowVaryingFn& q) {
    json j = {{"kind", q.kind == SlowVaryingFn::Kind::Constant ? "constant" : "modulated"}, {"c", q.c},
              {"eta", q.eta}};
    if (q.kind == SlowVaryingFn::Kind::Modulated) {
        j["amplitude"] = q.amplitude;
        j["frequency"] = q.frequency;
    }
    return j;
}

// Cover, transitions and block points shared by the certificate experiments.
struct CoverParams {
    SpectrumParams spectrum;
    double epsilon_ratio = 10.0;
    double delta = 0.1;
    int block_samples = 400;
    int block_k = 20;
    int max_centers = 400;
    long sampling_length = 1000000;
    bool mixing = false;
    int T_floor = 1;
    int H_max = kDefaultTransitionHorizon;
    std::optional<std::vector<std::vector<double>>> cover_points;
    std::optional<Point2> sampling_start;

    static CoverParams parse(Params& p, Space space) {
        CoverParams c;
        c.spectrum = SpectrumParams::parse(p);
        c.epsilon_ratio = p.get<double>("epsilon_ratio", c.epsilon_ratio);
        p.require(c.epsilon_ratio > 4.0, "epsilon_ratio", "must exceed 4 (epsilon < min(lambda, mu) / 4)");
        c.delta = p.get<double>("delta", c.delta);
        p.require(c.delta > 0.0, "delta", "must be positive");
        c.block_samples = p.get<int>("block_samples", c.block_samples);
        p.require(c.block_samples >= 1, "block_samples", "must be >= 1");
        c.block_k = p.get<int>("block_k", c.block_k);
        p.require(c.block_k >= 1 && c.block_k <= kMaxBlockIndex, "block_k", "must lie in [1, 60]");
        c.max_centers = p.get<int>("max_centers", c.max_centers);
        p.require(c.max_centers >= 1 && c.max_centers <= 2000, "max_centers", "must lie in [1, 2000]");
        c.sampling_length = p.get<long>("sampling_length", c.sampling_length);
        p.require(c.sampling_length >= 1000 && c.sampling_length <= 50000000, "sampling_length",
                  "must lie in [1e3, 5e7]");
        c.mixing = p.get<bool>("mixing", c.mixing);
        c.T_floor = p.get<int>("T_floor", c.T_floor);
        p.require(c.T_floor >= 1, "T_floor", "must be >= 1");
        c.H_max = p.get<int>("H_max", c.H_max);
        p.require(c.H_max >= c.T_floor && c.H_max <= 4096, "H_max", "must lie in [T_floor, 4096]");
        c.cover_points = p.opt<std::vector<std::vector<double>>>("cover_points");
        if (c.cover_points) {
            p.require(!c.cover_points->empty(), "cover_points", "must not be empty");
            for (const auto& v : *c.cover_points) {
                p.require(v.size() == 2 && std::isfinite(v[0]) && std::isfinite(v[1]), "cover_points",
                          "entries must be pairs of finite numbers");
            }
        }
        c.sampling_start = p.point("sampling_start", space);
        return c;
    }
};

struct Block {
    LyapunovSpectrum spectrum;
    PesinBlockParams params;
    std::vector<ClassifiedPoint> points; // block index <= block_k
    CoverContext ctx;
    double eta_base = 0.0;
};

Block build_block(const ExperimentConfig& cfg, const CoverParams& c) {
    const auto& sys = cfg.system;
    Block b;
    b.spectrum = lyapunov_spectrum(sys, random_start(sys, stream_seed(cfg.seed, kSpectrumStream)), c.spectrum.N,
                                   c.spectrum.qr_period);
    b.params = PesinBlockParams::from_spectrum(b.spectrum, c.epsilon_ratio);
    if (c.cover_points) {
        for (const auto& v : *c.cover_points) {
            const Point2 pt = sys.space() == Space::Torus2 ? torus_point(v[0], v[1]) : plane_point(v[0], v[1]);
            const BlockIndex idx = pesin_block_index(sys, pt, b.params);
            if (!idx.k || *idx.k > c.block_k) {
                throw PreconditionError("configured cover point is outside the target block");
            }
            b.points.push_back({pt, idx});
        }
    } else {
        const BlockSample bs = block_sample(sys, b.params, c.block_samples, stream_seed(cfg.seed, kBlockStream));
        for (const auto& cp : bs.points) {
            if (cp.index.k && *cp.index.k <= c.block_k) b.points.push_back(cp);
        }
        if (b.points.empty()) {
            throw ResolutionError("no sampled point falls in the target block; raise block_k");
        }
    }
    CoverSpec cover = build_cover(b.points, c.delta, c.max_centers);
    const Point2 start = c.sampling_start ? *c.sampling_start
                                          : random_start(sys, stream_seed(cfg.seed, kSamplingStream));
    TransitionBounds tb = estimate_transitions(sys, cover, start, c.sampling_length, c.mixing, c.T_floor, c.H_max);
    b.ctx = make_cover_context(std::move(cover), std::move(tb), b.params.epsilon);
    return b;
}

json block_json(const Block& b) {
    const auto& tb = b.ctx.transitions;
    return {{"spectrum", spectrum_json(b.spectrum)},
            {"pesin", {{"lambda", b.params.lambda}, {"mu", b.params.mu}, {"epsilon", b.params.epsilon}}},
            {"block_points", b.points.size()},
            {"cover", {{"r_count", b.ctx.cover.r_count}, {"radius", b.ctx.cover.radius},
                       {"delta", b.ctx.cover.delta}, {"block_k", b.ctx.cover.block_k}}},
            {"transitions", {{"M_k", tb.M_k}, {"mixing_mode", tb.mixing_mode}, {"T_floor", tb.T_floor},
                             {"H_max", tb.H_max}, {"sampling_length", tb.sampling_orbit.size()}}}};
}

// `count` block points spread evenly over the sample.
std::vector<Point2> pick_points(const Block& b, int count) {
    std::vector<Point2> out;
    const std::size_t n = b.points.size();
    for (int i = 0; i < count; ++i) {
        out.push_back(b.points[(std::size_t(i) * n) / std::size_t(count)].point);
    }
    return out;
}

json indices_json(const IndexSelection& s) {
    return {{"l1", s.l1}, {"s1", s.s1}, {"l2", s.l2}, {"s2", s.s2}};
}

json connector_json(const Connector& c) {
    return {{"y", point_json(c.y)}, {"N", c.N}, {"sample_time", c.sample_time}, {"from_set", c.from_set},
            {"to_set", c.to_set}};
}

json margins_summary(const std::vector<Margin>& ms) {
    double max_d = 0.0, min_slack = std::numeric_limits<double>::infinity();
    int violations = 0;
    for (const auto& m : ms) {
        max_d = std::max(max_d, m.distance);
        min_slack = std::min(min_slack, m.allowance - m.distance);
        violations += m.distance <= m.allowance ? 0 : 1;
    }
    return {{"count", ms.size()}, {"max_distance", max_d}, {"min_slack", min_slack}, {"violations", violations}};
}

json ns_json(const NsCertificate& c) {
    bool plain = true;
    for (const auto& m : c.margins) plain = plain && m.allowance == c.theta;
    return {{"x", point_json(c.x)},
            {"m", c.m},
            {"n", c.n},
            {"theta", c.theta},
            {"eta", c.eta},
            {"epsilon", c.epsilon},
            {"q", q_json(c.q)},
            {"indices", indices_json(c.indices)},
            {"t_minus", c.t_minus},
            {"t_plus", c.t_plus},
            {"connector", connector_json(c.connector)},
            {"M_k", c.M_k},
            {"K", c.K},
            {"p", c.p},
            {"period_bound_ok", c.p <= long(c.m) + c.n + c.K},
            {"z", point_json(c.z)},
            {"in_ball", c.in_ball},
            {"chain_holds", c.chain_holds},
            {"first_violation", c.first_violation ? json(*c.first_violation) : json(nullptr)},
            {"below_resolution", c.below_resolution},
            {"ratio", c.ratio},
            {"junction_gap", c.junction_gap},
            {"residual", c.residual},
            {"newton_iters", c.newton_iters},
            {"slow_varying", {{"ok", c.slow_varying.ok}, {"worst_ratio", c.slow_varying.worst_ratio}}},
            {"margins", margins_summary(c.margins)},
            {"allowances_equal_plain_ball", plain}};
}

// ---- experiments -----------------------------------------------------------

struct Output {
    json report = json::object();
    std::optional<CsvTable> csv;
};

Point2 default_point(const ExperimentConfig& cfg, const std::optional<Point2>& given) {
    return given ? *given : random_start(cfg.system, stream_seed(cfg.seed, kPointStream));
}

json fingerprint(const ExperimentConfig& cfg, const Point2& x) {
    return {{"system", system_to_json(cfg.system)}, {"x", point_json(x)}};
}

struct LyapunovExp {
    std::optional<Point2> x;
    long N = 100000;
    int qr_period = 10;
    int block_samples = 0;
    double epsilon_ratio = 10.0;

    void parse(Params& p, Space space) {
        x = p.point("x", space);
        N = p.get<long>("N", N);
        qr_period = p.get<int>("qr_period", qr_period);
        p.require(qr_period >= 1, "qr_period", "must be >= 1");
        p.require(N >= 10L * qr_period, "N", "must be at least 10 * qr_period");
        block_samples = p.get<int>("block_samples", block_samples);
        p.require(block_samples >= 0, "block_samples", "must be >= 0");
        epsilon_ratio = p.get<double>("epsilon_ratio", epsilon_ratio);
        p.require(epsilon_ratio > 4.0, "epsilon_ratio", "must exceed 4");
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Point2 x0 = default_point(cfg, x);
        const auto s = lyapunov_spectrum(cfg.system, x0, N, qr_period);
        out.report["x"] = point_json(x0);
        out.report["fingerprint"] = fingerprint(cfg, x0);
        out.report["spectrum"] = spectrum_json(s);
        if (block_samples > 0) {
            if (!s.hyperbolic) throw PreconditionError("not hyperbolic: block classification needs lambda_s < 0 < lambda_u");
            const auto params = PesinBlockParams::from_spectrum(s, epsilon_ratio);
            const auto bs = block_sample(cfg.system, params, block_samples, stream_seed(cfg.seed, kBlockStream));
            json frac = json::object();
            for (int k : {1, 3, 10, 20, 40, 60}) frac[std::to_string(k)] = bs.fraction_at_most(k);
            out.report["block"] = {{"lambda", params.lambda},
                                   {"mu", params.mu},
                                   {"epsilon", params.epsilon},
                                   {"sample_size", block_samples},
                                   {"finite_fraction", bs.finite_fraction},
                                   {"fraction_at_most", frac}};
            CsvTable t({"x", "y", "k"});
            for (const auto& c : bs.points) {
                t.push(CsvTable::Row().add(c.point.x).add(c.point.y).add(c.index.k));
            }
            out.csv = std::move(t);
        }
    }
};

struct RecurrenceExp {
    std::optional<Point2> x;
    std::vector<double> radii;
    int grid = kDefaultBallGrid;
    int T_max = 2000;
    SpectrumParams spectrum;

    void parse(Params& p, Space space) {
        x = p.point("x", space);
        auto given = p.opt<std::vector<double>>("radii");
        if (given) {
            radii = *given;
        } else {
            const int lo = p.get<int>("exp_min", 4);
            const int hi = p.get<int>("exp_max", 14);
            p.require(lo >= 1 && hi >= lo && hi <= 19, "exp_max", "needs 1 <= exp_min <= exp_max <= 19");
            for (int e = lo; e <= hi; ++e) radii.push_back(std::ldexp(1.0, -e));
            p.set_resolved("radii", radii);
        }
        p.require(!radii.empty(), "radii", "must not be empty");
        for (std::size_t i = 0; i < radii.size(); ++i) {
            p.require(radii[i] >= 1e-6 && radii[i] < 1.0 && (i == 0 || radii[i] < radii[i - 1]), "radii",
                      "must be strictly descending within [1e-6, 1)");
        }
        grid = p.get<int>("grid", grid);
        p.require(grid >= 1 && grid <= 64, "grid", "must lie in [1, 64]");
        T_max = p.get<int>("T_max", T_max);
        p.require(T_max >= 1, "T_max", "must be >= 1");
        spectrum = SpectrumParams::parse(p);
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Point2 x0 = default_point(cfg, x);
        const auto s = lyapunov_spectrum(cfg.system, x0, spectrum.N, spectrum.qr_period);
        out.report["x"] = point_json(x0);
        out.report["fingerprint"] = fingerprint(cfg, x0);
        out.report["spectrum"] = spectrum_json(s);
        const auto rep = recurrence_scaling(cfg.system, x0, radii, grid, T_max, s);
        json taus = json::array(), ratios = json::array();
        CsvTable t({"r", "tau", "ratio", "censored"});
        for (std::size_t i = 0; i < rep.radii.size(); ++i) {
            taus.push_back(rep.tau[i] ? json(*rep.tau[i]) : json(nullptr));
            ratios.push_back(rep.ratios[i] ? json(*rep.ratios[i]) : json(nullptr));
            t.push(CsvTable::Row().add(rep.radii[i]).add(rep.tau[i]).add(rep.ratios[i]).add(bool(rep.censored[i])));
        }
        int censored = int(std::count(rep.censored.begin(), rep.censored.end(), true));
        out.report["recurrence"] = {{"radii", rep.radii},
                                    {"tau", taus},
                                    {"ratios", ratios},
                                    {"censored_count", censored},
                                    {"censored_warning", rep.censored_warning},
                                    {"grid", rep.grid},
                                    {"proxy", rep.grid == 1 ? "center" : "unstable_chords"},
                                    {"T_max", rep.T_max},
                                    {"limsup_estimate", rep.has_estimate ? json(rep.limsup_estimate) : json(nullptr)},
                                    {"bound", rep.bound},
                                    {"lower_bound", rep.lower_bound}};
        out.csv = std::move(t);
    }
};

struct NonlacunarityExp {
    std::optional<Point2> x;
    double radius = 0.0;
    int count_fwd = 500;
    int count_bwd = 500;
    long horizon = 1000000;
    double epsilon = 0.2;
    long N_start = 1;
    std::vector<int> thresholds{10, 20, 50, 100, 200};

    void parse(Params& p, Space space) {
        x = p.point("x", space);
        auto r = p.opt<double>("radius");
        if (r) {
            radius = *r;
        } else {
            const double area = p.get<double>("area", 0.05);
            p.require(area > 0.0 && area < 0.5, "area", "must lie in (0, 0.5)");
            radius = std::sqrt(area / std::numbers::pi);
            p.set_resolved("radius", radius);
        }
        p.require(radius > 0.0 && radius < 0.5, "radius", "must lie in (0, 0.5)");
        count_fwd = p.get<int>("count_fwd", count_fwd);
        p.require(count_fwd >= 3, "count_fwd", "must be >= 3");
        count_bwd = p.get<int>("count_bwd", count_bwd);
        p.require(count_bwd >= 0, "count_bwd", "must be >= 0");
        horizon = p.get<long>("horizon", horizon);
        p.require(horizon >= 1, "horizon", "must be >= 1");
        epsilon = p.get<double>("epsilon", epsilon);
        p.require(epsilon > 0.0, "epsilon", "must be positive");
        N_start = p.get<long>("N_start", N_start);
        p.require(N_start >= 1, "N_start", "must be >= 1");
        thresholds = p.get<std::vector<int>>("thresholds", thresholds);
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Point2 x0 = default_point(cfg, x);
        const SetSpec gamma = SetSpec::ball(x0, radius);
        const auto seq = return_times(cfg.system, x0, gamma, count_fwd, count_bwd, horizon);
        out.report["x"] = point_json(x0);
        out.report["gamma"] = {{"kind", "ball"}, {"radius", radius}, {"area", std::numbers::pi * radius * radius}};
        out.report["sequence"] = {{"forward_count", seq.forward.size()},
                                  {"backward_count", seq.backward.size()},
                                  {"horizon", seq.horizon},
                                  {"backward_horizon", seq.backward_horizon},
                                  {"partial", seq.partial}};
        const auto prof = nonlacunarity_profile(seq);
        json tails = json::object(), tails2 = json::object();
        for (int i0 : thresholds) {
            tails[std::to_string(i0)] = prof.tail_deviation(i0);
            tails2[std::to_string(i0)] = prof.tail_deviation_two_sided(i0);
        }
        const auto N = interval_hit_check(seq, epsilon, N_start);
        const long n_max = static_cast<long>(std::floor(double(seq.horizon) / (1.0 + epsilon)));
        out.report["nonlacunarity"] = {{"tail_deviation", tails},
                                       {"tail_deviation_two_sided", tails2},
                                       {"two_sided_asserted", seq.backward.size() >= 50}};
        out.report["interval_hit"] = {{"epsilon", epsilon},
                                      {"N_start", N_start},
                                      {"N", N ? json(*N) : json(nullptr)},
                                      {"checked_through", n_max}};
        out.report["birkhoff_average"] = double(seq.forward.size()) / double(seq.horizon);
        CsvTable t({"i", "t", "ratio_fwd"});
        for (std::size_t i = 0; i < seq.forward.size(); ++i) {
            std::optional<double> r;
            if (i < prof.ratios_fwd.size()) r = prof.ratios_fwd[i];
            t.push(CsvTable::Row().add(long(i + 1)).add(seq.forward[i]).add(r));
        }
        out.csv = std::move(t);
    }
};

struct ShadowExp {
    std::optional<Point2> x;
    int n1 = 40;
    double gap = 1e-4;
    int min_return = 20;
    int max_return = 200;
    double tau_factor = 100.0;
    double epsilon_factor = 0.8;
    double tol = kNewtonTolerance;
    int max_iter = kNewtonMaxIter;
    SpectrumParams spectrum;

    void parse(Params& p, Space space) {
        x = p.point("x", space);
        n1 = p.get<int>("n1", n1);
        p.require(n1 >= 1, "n1", "must be >= 1");
        gap = p.get<double>("gap", gap);
        p.require(gap > 0.0 && gap < 0.1, "gap", "must lie in (0, 0.1)");
        min_return = p.get<int>("min_return", min_return);
        max_return = p.get<int>("max_return", max_return);
        p.require(min_return >= 1 && max_return >= min_return, "max_return", "needs 1 <= min_return <= max_return");
        tau_factor = p.get<double>("tau_factor", tau_factor);
        p.require(tau_factor > 0.0, "tau_factor", "must be positive");
        epsilon_factor = p.get<double>("epsilon_factor", epsilon_factor);
        p.require(epsilon_factor > 0.0, "epsilon_factor", "must be positive");
        tol = p.get<double>("tol", tol);
        p.require(tol > 0.0, "tol", "must be positive");
        max_iter = p.get<int>("max_iter", max_iter);
        p.require(max_iter >= 1, "max_iter", "must be >= 1");
        spectrum = SpectrumParams::parse(p);
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const auto& sys = cfg.system;
        const auto s = lyapunov_spectrum(sys, random_start(sys, stream_seed(cfg.seed, kSpectrumStream)), spectrum.N,
                                         spectrum.qr_period);
        out.report["spectrum"] = spectrum_json(s);
        const Point2 x1 = default_point(cfg, x);
        const auto po = glue_return(sys, x1, n1, gap, min_return, max_return);
        out.report["pseudo_orbit"] = {{"x1", point_json(x1)},
                                      {"lengths", {po.orbit.segments[0].length, po.orbit.segments[1].length}},
                                      {"gaps", po.orbit.gaps},
                                      {"delta", po.orbit.delta},
                                      {"concatenation_times", po.times.c}};
        const auto sol = newton_refine_periodic(sys, po.orbit, tol, max_iter);
        json quad = json::array();
        for (std::size_t k = 0; k + 1 < sol.residual_history.size(); ++k) {
            const double r = sol.residual_history[k];
            quad.push_back(r > 0.0 ? json(sol.residual_history[k + 1] / (r * r)) : json(nullptr));
        }
        out.report["solution"] = {{"period", sol.period},
                                  {"z0", point_json(sol.points.front())},
                                  {"residual", sol.residual},
                                  {"newton_iters", sol.newton_iters},
                                  {"residual_history", sol.residual_history},
                                  {"quadratic_constants", quad},
                                  {"cycle_defect_8", cycle_defect(sys, sol, 8)}};
        const double tau = tau_factor * po.orbit.delta;
        const double eps = epsilon_factor * s.lambda_u;
        const auto prof = shadowing_profile(sol, po, tau, eps);
        out.report["profile"] = {{"tau", tau},
                                 {"epsilon", eps},
                                 {"pass", prof.pass},
                                 {"max_distance", prof.max_distance},
                                 {"first_violation", prof.first_violation
                                                         ? json{{"segment", prof.first_violation->segment},
                                                                {"j", prof.first_violation->j}}
                                                         : json(nullptr)},
                                 {"epsilon0_estimate", po.orbit.delta > 0 ? prof.max_distance / po.orbit.delta : 0.0}};
        CsvTable t({"segment", "j", "distance", "bound"});
        for (const auto& e : prof.entries) {
            t.push(CsvTable::Row().add(e.segment).add(e.j).add(e.distance).add(e.bound));
        }
        out.csv = std::move(t);
    }
};

struct CertCommon {
    CoverParams cover;
    double theta = 0.05;
    double eta_fraction = 0.1;
    json q_spec;

    void parse(Params& p, Space space) {
        cover = CoverParams::parse(p, space);
        theta = p.get<double>("theta", theta);
        p.require(theta > 0.0, "theta", "must be positive");
        eta_fraction = p.get<double>("eta_fraction", eta_fraction);
        p.require(eta_fraction > 0.0 && eta_fraction <= 0.5, "eta_fraction", "must lie in (0, 0.5]");
        parse_q(p, 1.0); // validation only; eta is known after the spectrum
        q_spec = p.resolved().at("q");
    }

    SlowVaryingFn q(double eta) const {
        Params p(json{{"q", q_spec}}, "parameters");
        return parse_q(p, eta);
    }
};

struct NsExp {
    CertCommon common;
    std::optional<Point2> x;
    int points = 1;
    int m = 100;
    int n = 100;
    std::optional<int> connector_length;
    int mixing_periods = 0;

    void parse(Params& p, Space space) {
        common.parse(p, space);
        x = p.point("x", space);
        points = p.get<int>("points", points);
        p.require(points >= 1, "points", "must be >= 1");
        p.require(!x || points == 1, "points", "must be 1 when x is given");
        m = p.get<int>("m", m);
        n = p.get<int>("n", n);
        p.require(m >= 0 && n >= 0 && m + n >= 1, "m", "m, n must be >= 0 with m + n >= 1");
        connector_length = p.opt<int>("connector_length");
        mixing_periods = p.get<int>("mixing_periods", mixing_periods);
        p.require(mixing_periods >= 0, "mixing_periods", "must be >= 0");
        p.require(mixing_periods == 0 || common.cover.mixing, "mixing_periods", "needs mixing = true");
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Block b = build_block(cfg, common.cover);
        out.report["block"] = block_json(b);
        const double eta = common.eta_fraction * b.params.epsilon;
        const SlowVaryingFn q = common.q(eta);
        const std::vector<Point2> xs = x ? std::vector<Point2>{*x} : pick_points(b, points);
        std::vector<std::optional<NsCertificate>> certs(xs.size());
        NsOptions opt;
        opt.connector_length = connector_length;
        auto err = parallel_for(int(xs.size()), [&](int i) {
            certs[std::size_t(i)] = ns_certificate(cfg.system, xs[std::size_t(i)], m, n, common.theta, eta, q, b.ctx, opt);
        });
        json arr = json::array();
        CsvTable t({"cert", "j", "distance", "allowance", "chain"});
        long K_max = 0;
        int in_ball = 0;
        for (std::size_t i = 0; i < certs.size(); ++i) {
            if (!certs[i]) continue;
            const auto& c = *certs[i];
            arr.push_back(ns_json(c));
            K_max = std::max(K_max, c.K);
            in_ball += c.in_ball ? 1 : 0;
            for (const auto& mg : c.margins) {
                t.push(CsvTable::Row().add(long(i)).add(mg.j).add(mg.distance).add(mg.allowance).add(mg.chain));
            }
        }
        out.report["certificates"] = arr;
        out.report["in_ball_count"] = in_ball;
        out.report["K_block_max"] = K_max;
        out.csv = std::move(t);
        if (err) std::rethrow_exception(err);

        if (mixing_periods > 0) {
            json per = json::array();
            for (int d = 0; d < mixing_periods; ++d) {
                NsOptions o;
                o.connector_length = b.ctx.transitions.M_k + d;
                const auto c = ns_certificate(cfg.system, xs.front(), m, n, common.theta, eta, q, b.ctx, o);
                per.push_back({{"N", c.connector.N}, {"p", c.p}, {"m_plus_n_plus_K", long(m) + n + c.K},
                               {"in_ball", c.in_ball}, {"residual", c.residual}});
            }
            out.report["mixing_periods"] = per;
        }
    }
};

json gns_json(const GnsCertificate& g) {
    json segs = json::array();
    bool pair_ok = true;
    const std::size_t k = g.segments.size();
    for (std::size_t i = 0; i < k; ++i) {
        pair_ok = pair_ok && g.gaps[i] <= g.K[i] + g.K[(i + 1) % k];
        segs.push_back({{"x", point_json(g.segments[i].x)},
                        {"m", g.segments[i].m},
                        {"n", g.segments[i].n},
                        {"indices", indices_json(g.indices[i])},
                        {"t_minus", g.t_minus[i]},
                        {"t_plus", g.t_plus[i]},
                        {"connector", connector_json(g.connectors[i])},
                        {"p", g.gaps[i]},
                        {"K", g.K[i]},
                        {"offset", g.offsets[i]},
                        {"in_ball", bool(g.in_ball[i])},
                        {"first_violation", g.first_violation[i] ? json(*g.first_violation[i]) : json(nullptr)},
                        {"margins", margins_summary(g.margins[i])}});
    }
    long formula = 0;
    for (std::size_t i = 0; i < k; ++i) formula += g.segments[i].n + g.segments[i].m + g.gaps[i];
    return {{"segments", segs},
            {"z", point_json(g.z)},
            {"period", g.period},
            {"period_formula", formula},
            {"total_gap", g.total_gap},
            {"gap_budget", g.gap_budget},
            {"budget_ok", g.total_gap <= g.gap_budget},
            {"pair_bounds_ok", pair_ok},
            {"offsets_consistent", g.offsets_consistent},
            {"offset_defect", g.offset_defect},
            {"junction_gap", g.junction_gap},
            {"residual", g.residual},
            {"newton_iters", g.newton_iters}};
}

struct GnsExp {
    CertCommon common;
    int segments = 3;
    int m = 60;
    int n = 60;
    std::optional<long> target_gap_extra;

    void parse(Params& p, Space space) {
        common.parse(p, space);
        segments = p.get<int>("segments", segments);
        p.require(segments >= 2, "segments", "must be >= 2");
        m = p.get<int>("m", m);
        n = p.get<int>("n", n);
        p.require(m >= 0 && n >= 0 && m + n >= 1, "m", "m, n must be >= 0 with m + n >= 1");
        target_gap_extra = p.opt<long>("target_gap_extra");
        p.require(!target_gap_extra || (*target_gap_extra >= 0 && common.cover.mixing), "target_gap_extra",
                  "must be >= 0 and needs mixing = true");
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Block b = build_block(cfg, common.cover);
        out.report["block"] = block_json(b);
        const double eta = common.eta_fraction * b.params.epsilon;
        const SlowVaryingFn q = common.q(eta);
        std::vector<GnsSegment> segs;
        for (const auto& pt : pick_points(b, segments)) segs.push_back({pt, m, n});
        const auto g = gns_certificate(cfg.system, segs, common.theta, eta, q, b.ctx);
        out.report["certificate"] = gns_json(g);
        CsvTable t({"segment", "j", "distance", "allowance"});
        for (std::size_t i = 0; i < g.margins.size(); ++i) {
            for (const auto& mg : g.margins[i]) {
                t.push(CsvTable::Row().add(long(i)).add(mg.j).add(mg.distance).add(mg.allowance));
            }
        }
        out.csv = std::move(t);
        if (target_gap_extra) {
            const long target = g.gap_budget + *target_gap_extra;
            const auto gt = gns_certificate(cfg.system, segs, common.theta, eta, q, b.ctx, target);
            json j = gns_json(gt);
            j["target_total_gap"] = target;
            j["target_achieved"] = gt.total_gap == target;
            out.report["target"] = j;
        }
    }
};

struct SublinearityExp {
    CertCommon common;
    int points = 10;
    std::vector<std::pair<int, int>> mn{{100, 100}, {200, 200}, {400, 400}, {800, 800}};
    std::vector<double> eta_fractions{0.1};

    void parse(Params& p, Space space) {
        common.parse(p, space);
        points = p.get<int>("points", points);
        p.require(points >= 1, "points", "must be >= 1");
        mn = p.get<std::vector<std::pair<int, int>>>("mn", mn);
        p.require(!mn.empty(), "mn", "must not be empty");
        for (const auto& [a, c] : mn) p.require(a >= 0 && c >= 0 && a + c >= 1, "mn", "entries need m, n >= 0");
        eta_fractions = p.get<std::vector<double>>("eta_fractions", eta_fractions);
        p.require(!eta_fractions.empty(), "eta_fractions", "must not be empty");
        for (double f : eta_fractions) p.require(f > 0.0 && f <= 0.5, "eta_fractions", "entries must lie in (0, 0.5]");
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Block b = build_block(cfg, common.cover);
        out.report["block"] = block_json(b);
        const auto xs = pick_points(b, points);
        std::vector<double> etas;
        for (double f : eta_fractions) etas.push_back(f * b.params.epsilon);
        const SlowVaryingFn q = common.q(etas.front());
        std::vector<std::optional<SublinearityTable>> tables(xs.size());
        auto err = parallel_for(int(xs.size()), [&](int i) {
            tables[std::size_t(i)] = sublinearity_scan(cfg.system, xs[std::size_t(i)], common.theta, etas, mn, q, b.ctx);
        });
        CsvTable t({"point", "m", "n", "eta", "K", "ratio", "in_ball", "p", "margins_ok", "margin_count"});
        // Aggregate per (eta, m, n) over points.
        std::map<std::tuple<double, int, int>, std::vector<const SublinearityRow*>> groups;
        json per_point = json::array();
        for (std::size_t i = 0; i < tables.size(); ++i) {
            if (!tables[i]) continue;
            for (const auto& r : tables[i]->rows) {
                t.push(CsvTable::Row().add(long(i)).add(r.m).add(r.n).add(r.eta).add(r.K).add(r.ratio).add(r.in_ball).add(r.p)
                               .add(r.margins_ok).add(r.margin_count));
                groups[{r.eta, r.m, r.n}].push_back(&r);
            }
            per_point.push_back({{"x", point_json(xs[i])}, {"etas", tables[i]->etas}, {"summary", tables[i]->summary}});
        }
        json agg = json::array();
        for (const auto& [key, rows] : groups) {
            double mean = 0.0, worst = 0.0;
            int pass = 0, period_ok = 0, margins_ok = 0;
            for (const auto* r : rows) {
                mean += r->ratio;
                worst = std::max(worst, r->ratio);
                pass += r->in_ball ? 1 : 0;
                period_ok += r->p <= long(r->m) + r->n + r->K ? 1 : 0;
                margins_ok += r->margins_ok && r->margin_count == r->m + r->n + 1 ? 1 : 0;
            }
            mean /= double(rows.size());
            const double eta = std::get<0>(key);
            agg.push_back({{"eta", eta},
                           {"m", std::get<1>(key)},
                           {"n", std::get<2>(key)},
                           {"mean_ratio", mean},
                           {"max_ratio", worst},
                           {"in_ball", pass},
                           {"period_bound_ok", period_ok},
                           {"margins_ok", margins_ok},
                           {"points", rows.size()},
                           {"paper_bound", 2.0 * eta / b.params.epsilon}});
        }
        out.report["points"] = per_point;
        out.report["summary"] = agg;
        out.csv = std::move(t);
        if (err) std::rethrow_exception(err);
    }
};

struct DominationExp {
    std::optional<Point2> x;
    int length = 1000;
    int S0 = 1;
    double lambda = 0.9;
    std::vector<int> S_list{1, 5, 10};
    bool swapped = false;
    int direction_N = 60;

    void parse(Params& p, Space space) {
        x = p.point("x", space);
        length = p.get<int>("length", length);
        p.require(length >= 1, "length", "must be >= 1");
        S0 = p.get<int>("S0", S0);
        p.require(S0 >= 1, "S0", "must be >= 1");
        lambda = p.get<double>("lambda", lambda);
        p.require(lambda >= 0.0, "lambda", "must be >= 0");
        S_list = p.get<std::vector<int>>("S_list", S_list);
        p.require(!S_list.empty(), "S_list", "must not be empty");
        for (int S : S_list) p.require(S >= S0, "S_list", "entries must be >= S0");
        swapped = p.get<bool>("swapped", swapped);
        direction_N = p.get<int>("direction_N", direction_N);
        p.require(direction_N >= 50, "direction_N", "must be >= 50");
    }

    void run(const ExperimentConfig& cfg, Output& out) const {
        const Point2 x0 = default_point(cfg, x);
        const int S_max = *std::max_element(S_list.begin(), S_list.end());
        const Orbit orb = orbit(cfg.system, x0, 0, length + S_max);
        std::vector<Point2> pts(orb.points());
        std::vector<Vec2> E, F;
        for (const auto& pt : pts) {
            const auto sp = oseledec_directions(cfg.system, pt, direction_N);
            E.push_back(swapped ? sp.Eu : sp.Es);
            F.push_back(swapped ? sp.Es : sp.Eu);
        }
        const auto res = check_domination(cfg.system, pts, E, F, S0, lambda, S_list);
        out.report["x"] = point_json(x0);
        out.report["domination"] = {{"pass", res.pass},       {"lambda", lambda},
                                    {"S", res.S},             {"worst_quotient", res.worst_quotient},
                                    {"margin", res.margin},   {"swapped", swapped}};
        CsvTable t({"S", "worst_quotient", "margin"});
        for (std::size_t i = 0; i < res.S.size(); ++i) {
            t.push(CsvTable::Row().add(res.S[i]).add(res.worst_quotient[i]).add(res.margin[i]));
        }
        out.csv = std::move(t);
    }
};

// Parses the experiment parameters; returns the runner.
std::function<void(Output&)> prepare(const ExperimentConfig& cfg, json* resolved) {
    Params p(cfg.parameters, "parameters");
    const Space space = cfg.system.space();
    std::function<void(Output&)> fn;
    auto bind = [&](auto exp) {
        exp.parse(p, space);
        fn = [exp, &cfg](Output& out) { exp.run(cfg, out); };
    };
    switch (cfg.experiment) {
    case Experiment::Lyapunov: bind(LyapunovExp{}); break;
    case Experiment::RecurrenceScaling: bind(RecurrenceExp{}); break;
    case Experiment::Nonlacunarity: bind(NonlacunarityExp{}); break;
    case Experiment::Shadow: bind(ShadowExp{}); break;
    case Experiment::NsCert: bind(NsExp{}); break;
    case Experiment::GnsCert: bind(GnsExp{}); break;
    case Experiment::Sublinearity: bind(SublinearityExp{}); break;
    case Experiment::Domination: bind(DominationExp{}); break;
    }
    p.finish();
    if (resolved) *resolved = p.resolved();
    return fn;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw Error("io", "cannot write " + path.string());
}

} // namespace

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (const auto& [e, n] : kNames) {
        if (n == name) return e;
    }
    return std::nullopt;
}

std::string experiment_name(Experiment e) { return kNames.at(e); }

std::vector<std::string> experiment_names() {
    std::vector<std::string> out;
    for (const auto& [e, n] : kNames) out.push_back(n);
    return out;
}

json system_to_json(const SystemSpec& s) {
    switch (s.kind()) {
    case SystemKind::CatMap: return {{"kind", "cat_map"}, {"params", json::object()}};
    case SystemKind::PerturbedCatMap: return {{"kind", "perturbed_cat_map"}, {"params", {{"kappa", s.kappa()}}}};
    case SystemKind::StandardMap: return {{"kind", "standard_map"}, {"params", {{"K", s.k_s()}}}};
    case SystemKind::Henon: return {{"kind", "henon"}, {"params", {{"a", s.henon_a()}, {"b", s.henon_b()}}}};
    }
    return {};
}

SystemSpec system_from_json(const json& j, const std::string& field) {
    Params top(j, field);
    const auto kind = top.opt<std::string>("kind");
    if (!kind) throw ConfigError(field + ".kind", field + ".kind is required");
    Params p(top.sub("params", json::object()), field + ".params");
    top.finish();
    auto wrap = [&](const std::string& key, auto make) {
        try {
            return make();
        } catch (const PreconditionError& e) {
            throw ConfigError(p.field(key), p.field(key) + ": " + e.what());
        }
    };
    std::optional<SystemSpec> s;
    if (*kind == "cat_map") {
        s = SystemSpec::cat_map();
    } else if (*kind == "perturbed_cat_map") {
        const double kappa = p.get<double>("kappa", 0.05);
        s = wrap("kappa", [&] { return SystemSpec::perturbed_cat_map(kappa); });
    } else if (*kind == "standard_map") {
        const double K = p.get<double>("K", 6.0);
        s = wrap("K", [&] { return SystemSpec::standard_map(K); });
    } else if (*kind == "henon") {
        const double a = p.get<double>("a", 1.4);
        const double b = p.get<double>("b", 0.3);
        s = wrap("b", [&] { return SystemSpec::henon(a, b); });
    } else {
        throw ConfigError(field + ".kind", "unknown system kind \"" + *kind +
                                               "\" (expected cat_map, perturbed_cat_map, standard_map, henon)");
    }
    p.finish();
    return *s;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set", "override must look like key=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set", "empty key in override " + assignment);
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError(path, "cannot override inside a non-object value");
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

ExperimentConfig load_config(const json& doc, Experiment experiment, const std::string& output_dir) {
    Params top(doc, "config");
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    cfg.output_dir = output_dir;
    if (auto e = top.opt<std::string>("experiment")) {
        const auto parsed = parse_experiment(*e);
        if (!parsed) throw ConfigError("experiment", "unknown experiment \"" + *e + "\"");
        if (*parsed != experiment) {
            throw ConfigError("experiment", "config names experiment \"" + *e + "\" but \"" +
                                                experiment_name(experiment) + "\" was requested");
        }
    }
    const json sys = top.sub("system", json{{"kind", "cat_map"}});
    cfg.system = system_from_json(sys, "system");
    const json seed = top.sub("seed", 1);
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        throw ConfigError("seed", "seed must be a non-negative integer");
    }
    cfg.seed = seed.get<std::uint64_t>();
    cfg.parameters = top.sub("parameters", json::object());
    top.finish();
    prepare(cfg, nullptr);
    return cfg;
}

json resolved_config(const ExperimentConfig& cfg) {
    json params;
    prepare(cfg, &params);
    return {{"experiment", experiment_name(cfg.experiment)},
            {"system", system_to_json(cfg.system)},
            {"seed", cfg.seed},
            {"parameters", params}};
}

json error_json(const std::exception& e) {
    json err = {{"message", e.what()}};
    if (const auto* ne = dynamic_cast<const Error*>(&e)) {
        err["code"] = ne->code();
        if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) err["field"] = ce->field;
        if (const auto* cv = dynamic_cast<const ConvergenceError*>(&e)) err["last_residual"] = cv->last_residual;
        if (const auto* he = dynamic_cast<const HorizonError*>(&e)) err["required_horizon"] = he->required_horizon;
    } else {
        err["code"] = "internal";
    }
    return {{"error", err}};
}

int worker_count() {
    const char* env = std::getenv("NUSPEC_THREADS");
    if (env == nullptr) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || v < 1) return 1;
    return int(std::min(v, 256L));
}

RunResult run_in_memory(const ExperimentConfig& cfg, std::string* csv) {
    RunResult res;
    Output out;
    out.report["experiment"] = experiment_name(cfg.experiment);
    out.report["system"] = system_to_json(cfg.system);
    out.report["seed"] = cfg.seed;
    try {
        auto fn = prepare(cfg, nullptr);
        fn(out);
        out.report["partial"] = false;
    } catch (const std::exception& e) {
        res.error = error_json(e);
        res.partial = true;
        res.exit_code = dynamic_cast<const ConfigError*>(&e) ? 2 : 3;
        out.report["partial"] = true;
        out.report["error"] = res.error->at("error");
    }
    res.report = std::move(out.report);
    if (csv && out.csv) *csv = out.csv->str();
    return res;
}

RunResult run(const ExperimentConfig& cfg) {
    std::string csv;
    RunResult res = run_in_memory(cfg, &csv);
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "report.json", res.report.dump(2) + "\n");
    json outputs = json::array({"report.json"});
    if (!csv.empty()) {
        write_file(dir / "data.csv", csv);
        outputs.push_back("data.csv");
    }
    if (res.error) {
        write_file(dir / "error.json", res.error->dump(2) + "\n");
        outputs.push_back("error.json");
    }
    outputs.push_back("manifest.json");
    json manifest = {{"tool", "nuspec"},
                     {"config", resolved_config(cfg)},
                     {"outputs", outputs},
                     {"partial", res.partial},
                     {"threads", worker_count()}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return res;
}

json compare_to_bound(const json& rec, const json& lyap, double tolerance) {
    auto need = [](const json& j, const char* key, const char* what) -> const json& {
        if (!j.contains(key)) throw PreconditionError(std::string(what) + " report lacks \"" + key + "\"");
        return j.at(key);
    };
    if (need(rec, "experiment", "recurrence") != "recurrence-scaling") {
        throw PreconditionError("first report is not a recurrence-scaling report");
    }
    if (need(lyap, "experiment", "lyapunov") != "lyapunov") {
        throw PreconditionError("second report is not a lyapunov report");
    }
    if (need(rec, "fingerprint", "recurrence") != need(lyap, "fingerprint", "lyapunov")) {
        throw PreconditionError("refusing to compare: system fingerprints differ");
    }
    const json& sp = need(lyap, "spectrum", "lyapunov");
    const double lu = sp.at("lambda_u").get<double>();
    const double ls = sp.at("lambda_s").get<double>();
    if (!(ls < 0.0 && lu > 0.0)) {
        throw PreconditionError("not hyperbolic: the bound 1/lambda_u - 1/lambda_s is undefined");
    }
    const double bound = 1.0 / lu - 1.0 / ls;
    const json& r = need(rec, "recurrence", "recurrence");
    const json& est = r.at("limsup_estimate");
    json out = {{"bound", bound},
                {"lower_bound", 1.0 / sp.at("Lambda_u").get<double>() - 1.0 / sp.at("Lambda_s").get<double>()},
                {"tolerance", tolerance},
                {"censored_count", r.at("censored_count")},
                {"grid", r.at("grid")}};
    if (est.is_null()) {
        out["measured"] = nullptr;
        out["pass"] = false;
    } else {
        out["measured"] = est;
        out["pass"] = est.get<double>() <= bound * (1.0 + tolerance);
    }
    return out;
}

} // namespace nuspec
