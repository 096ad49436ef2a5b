#include "nuspec/specification.hpp"

#include "nuspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace nuspec {

namespace {

constexpr double kCoverRadiusFraction = 0.49;
constexpr int kMixingRunway = 50;
constexpr int kMaxOrbitWindow = 400000;
constexpr double kResidualFloor = 1e-15;
constexpr double kResolutionFactor = 10.0;

double allowance(double theta, double qv) { return theta / (qv * qv); }

// Orbit window around x long enough for select_indices; grows until it is.
struct Recurrence {
    Orbit orbit;
    ReturnTimeSequence seq;
    IndexSelection sel;
};

Recurrence recurrence_for(const SystemSpec& system, const Point2& x, int m, int n, double eta, double epsilon,
                          const SetSpec& gamma) {
    const double c = 1.0 + 2.0 * eta / epsilon;
    int W = static_cast<int>(std::ceil(c * double(std::max(m, n) + 32))) + 64;
    for (;;) {
        Recurrence r;
        r.orbit = orbit(system, x, W, W);
        r.seq = return_times(r.orbit, gamma, std::numeric_limits<int>::max(), std::numeric_limits<int>::max());
        try {
            r.sel = select_indices(r.seq, m, n, eta, epsilon);
            return r;
        } catch (const HorizonError&) {
            if (W >= kMaxOrbitWindow) throw;
            W = std::min(2 * W, kMaxOrbitWindow);
        }
    }
}

int label_of(const SetSpec& gamma, const Point2& p) {
    const auto c = gamma.nearest_center(p);
    if (!c) {
        throw PreconditionError("orbit point expected inside the cover is outside every cover ball");
    }
    return int(*c);
}

OrbitSegment connector_segment(const TransitionBounds& tb, long s, int N) {
    OrbitSegment seg;
    seg.base = tb.sampling_orbit[std::size_t(s)];
    seg.length = N;
    seg.points.assign(tb.sampling_orbit.begin() + s, tb.sampling_orbit.begin() + s + N + 1);
    return seg;
}

Connector find_connector(const TransitionBounds& tb, int j, int i, std::optional<int> N_req) {
    Connector c;
    c.from_set = j;
    c.to_set = i;
    const int lo = std::max(1, tb.T_floor);
    std::optional<int> N;
    if (N_req) {
        if (tb.witness_time(j, i, *N_req)) N = *N_req;
        if (!N) {
            throw GapInfeasibleError("requested connector length " + std::to_string(*N_req) +
                                     " is not witnessed for cover pair " + std::to_string(j) + " -> " +
                                     std::to_string(i));
        }
    } else {
        N = tb.smallest_gap(j, i, lo, tb.M_k);
        if (!N) {
            throw IncompleteMixingError("no witnessed transition " + std::to_string(j) + " -> " + std::to_string(i) +
                                        " within M_k");
        }
    }
    c.N = *N;
    c.sample_time = *tb.witness_time(j, i, c.N);
    c.y = tb.sampling_orbit[std::size_t(c.sample_time)];
    return c;
}

std::vector<Margin> margins_for(const Orbit& orb, const std::vector<Point2>& cycle, long start, int m, int n,
                                double theta, double eta, const SlowVaryingFn& q) {
    const long p = long(cycle.size());
    const double q0 = q(orb.at(0));
    std::vector<Margin> out;
    out.reserve(std::size_t(m + n + 1));
    for (int j = -m; j <= n; ++j) {
        Margin mg;
        mg.j = j;
        const long idx = (((start + j) % p) + p) % p;
        mg.distance = distance(orb.at(j), cycle[std::size_t(idx)]);
        mg.allowance = allowance(theta, q(orb.at(j)));
        mg.chain = allowance(theta, q0) * std::exp(-2.0 * std::abs(j) * eta);
        out.push_back(mg);
    }
    return out;
}

struct MarginSummary {
    bool in_ball = true;
    bool chain_holds = true;
    std::optional<int> first_violation;
};

MarginSummary summarize(const std::vector<Margin>& margins) {
    MarginSummary s;
    for (const auto& mg : margins) {
        if (!(mg.distance <= mg.allowance)) {
            if (s.in_ball) s.first_violation = mg.j;
            s.in_ball = false;
        }
        // The chain d <= theta q(x)^-2 e^{-2|j| eta} <= theta q(f^j x)^-2.
        if (!(mg.distance <= mg.chain) || !(mg.chain <= mg.allowance * (1.0 + 1e-12))) {
            s.chain_holds = false;
        }
    }
    return s;
}

} // namespace

SlowVaryingFn SlowVaryingFn::constant(double c, double eta) {
    SlowVaryingFn q;
    q.kind = Kind::Constant;
    q.c = c;
    q.eta = eta;
    q.validate();
    return q;
}

SlowVaryingFn SlowVaryingFn::modulated(double c, double amplitude, int frequency, double eta) {
    SlowVaryingFn q;
    q.kind = Kind::Modulated;
    q.c = c;
    q.amplitude = amplitude;
    q.frequency = frequency;
    q.eta = eta;
    q.validate();
    return q;
}

void SlowVaryingFn::validate() const {
    if (!(c > 0.0) || !(eta > 0.0)) {
        throw PreconditionError("slow-varying function needs c > 0 and eta > 0");
    }
    if (kind == Kind::Modulated && !(amplitude >= 0.0 && amplitude < 1.0)) {
        throw PreconditionError("modulation amplitude must lie in [0, 1)");
    }
}

double SlowVaryingFn::operator()(const Point2& p) const {
    if (kind == Kind::Constant) return c;
    return c * (1.0 + amplitude * std::sin(2.0 * std::numbers::pi * double(frequency) * p.x));
}

SlowVaryingCheck check_slow_varying(const SlowVaryingFn& q, const Orbit& orb, int m, int n) {
    if (m > orb.back() || n > orb.forward()) {
        throw PreconditionError("orbit window shorter than the slow-varying check range");
    }
    SlowVaryingCheck chk;
    for (int j = -m; j < n; ++j) {
        const double a = q(orb.at(j));
        const double b = q(orb.at(j + 1));
        chk.worst_ratio = std::max({chk.worst_ratio, b / a, a / b});
    }
    chk.ok = chk.worst_ratio <= std::exp(q.eta);
    return chk;
}

SlowVaryingCheck check_slow_varying(const SlowVaryingFn& q, const SystemSpec& system, const Point2& x, int m, int n) {
    return check_slow_varying(q, orbit(system, x, m, n), m, n);
}

SetSpec CoverSpec::gamma() const { return SetSpec::ball_union(centers, radius); }

CoverSpec build_cover(const std::vector<ClassifiedPoint>& block_points, double delta, int max_centers) {
    if (block_points.empty()) {
        throw PreconditionError("build_cover needs at least one block point");
    }
    if (!(delta > 0.0)) {
        throw PreconditionError("build_cover needs delta > 0");
    }
    CoverSpec cover;
    cover.delta = delta;
    cover.radius = kCoverRadiusFraction * delta;
    for (const auto& bp : block_points) {
        if (!bp.index.k) {
            throw PreconditionError("cover points must have a finite block index");
        }
        const bool covered = std::any_of(cover.centers.begin(), cover.centers.end(),
                                         [&](const Point2& c) { return distance(c, bp.point) < cover.radius; });
        if (covered) continue;
        if (int(cover.centers.size()) == max_centers) {
            throw ResolutionError("cover needs more than " + std::to_string(max_centers) +
                                  " centers; use a larger delta");
        }
        cover.centers.push_back(bp.point);
        cover.block_k = std::max(cover.block_k, *bp.index.k);
    }
    cover.r_count = int(cover.centers.size());
    return cover;
}

std::optional<long> TransitionBounds::witness_time(int j, int i, int h) const {
    if (h < 0 || h > H_max || i < 0 || j < 0 || i >= r || j >= r) return std::nullopt;
    const auto s = witness[(std::size_t(j) * std::size_t(r) + std::size_t(i)) * std::size_t(H_max + 1) +
                           std::size_t(h)];
    if (s < 0) return std::nullopt;
    return long(s);
}

std::optional<int> TransitionBounds::smallest_gap(int j, int i, int lo, int hi) const {
    for (int h = std::max(lo, 0); h <= std::min(hi, H_max); ++h) {
        if (witness_time(j, i, h)) return h;
    }
    return std::nullopt;
}

TransitionBounds estimate_transitions(const SystemSpec& system, const CoverSpec& cover, const Point2& start,
                                      long sampling_orbit_length, bool mixing_mode, int T_floor, int H_max) {
    if (T_floor < 1 || H_max < T_floor) {
        throw PreconditionError("estimate_transitions needs 1 <= T_floor <= H_max");
    }
    if (sampling_orbit_length < 2 || sampling_orbit_length > std::numeric_limits<std::int32_t>::max()) {
        throw PreconditionError("sampling orbit length out of range");
    }
    TransitionBounds tb;
    tb.r = cover.r_count;
    tb.T_floor = T_floor;
    tb.H_max = H_max;
    tb.mixing_mode = mixing_mode;
    const SetSpec gamma = cover.gamma();

    const std::size_t L = std::size_t(sampling_orbit_length);
    tb.sampling_orbit.resize(L);
    tb.labels.resize(L);
    Point2 p = start;
    for (std::size_t s = 0; s < L; ++s) {
        tb.sampling_orbit[s] = p;
        const auto c = gamma.nearest_center(p);
        tb.labels[s] = c ? std::int32_t(*c) : -1;
        p = apply(system, p);
    }

    const std::size_t r = std::size_t(tb.r);
    const std::size_t H1 = std::size_t(H_max + 1);
    tb.witness.assign(r * r * H1, -1);
    for (std::size_t s = 0; s < L; ++s) {
        const int j = tb.labels[s];
        if (j < 0) continue;
        const std::size_t row = std::size_t(j) * r;
        for (std::size_t h = std::size_t(T_floor); h <= std::size_t(H_max) && s + h < L; ++h) {
            const int i = tb.labels[s + h];
            if (i < 0) continue;
            auto& w = tb.witness[(row + std::size_t(i)) * H1 + h];
            if (w < 0) w = std::int32_t(s);
        }
    }

    tb.X.assign(r * r, std::nullopt);
    std::vector<std::pair<int, int>> missing;
    for (int i = 0; i < tb.r; ++i) {
        for (int j = 0; j < tb.r; ++j) {
            std::optional<int> X;
            if (!mixing_mode) {
                X = tb.smallest_gap(j, i, T_floor, H_max);
            } else {
                int last_gap = T_floor - 1;
                for (int h = T_floor; h <= H_max; ++h) {
                    if (!tb.witness_time(j, i, h)) last_gap = h;
                }
                if (last_gap + 1 + kMixingRunway <= H_max) X = last_gap + 1;
            }
            if (!X) {
                missing.emplace_back(j, i);
                continue;
            }
            tb.X[std::size_t(i) * r + std::size_t(j)] = X;
            tb.M_k = std::max(tb.M_k, *X);
        }
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << missing.size() << " cover pairs lack witnessed transitions (j -> i):";
        for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) {
            msg << " " << missing[k].first << "->" << missing[k].second;
        }
        if (missing.size() > 10) msg << " ...";
        throw IncompleteMixingError(msg.str());
    }
    return tb;
}

IndexSelection select_indices(const ReturnTimeSequence& seq, int m, int n, double eta, double epsilon) {
    if (!(eta > 0.0) || !(epsilon > 0.0) || eta > epsilon / 2.0) {
        throw PreconditionError("select_indices needs 0 < eta <= epsilon / 2");
    }
    if (m < 0 || n < 0) {
        throw PreconditionError("select_indices needs m, n >= 0");
    }
    const double c = 1.0 + 2.0 * eta / epsilon;
    IndexSelection sel;

    long l1 = 1;
    while (seq.has(-l1) && seq.t(-l1) >= -m) ++l1;
    if (!seq.has(-l1)) {
        throw HorizonError("backward return times end before -m", long(m) + 1);
    }
    long l2 = 1;
    while (seq.has(l2) && seq.t(l2) <= n) ++l2;
    if (!seq.has(l2)) {
        throw HorizonError("forward return times end before n", long(n) + 1);
    }
    const double lo = c * double(seq.t(-l1));
    long s1 = 0;
    while (seq.has(-l1 - s1) && double(seq.t(-l1 - s1)) > lo) ++s1;
    if (!seq.has(-l1 - s1)) {
        throw HorizonError("backward return times end before the (1 + 2 eta / epsilon) multiple",
                           long(std::ceil(-lo)));
    }
    const double hi = c * double(seq.t(l2));
    long s2 = 0;
    while (seq.has(l2 + s2) && double(seq.t(l2 + s2)) < hi) ++s2;
    if (!seq.has(l2 + s2)) {
        throw HorizonError("forward return times end before the (1 + 2 eta / epsilon) multiple",
                           long(std::ceil(hi)));
    }
    sel.l1 = l1;
    sel.s1 = s1;
    sel.l2 = l2;
    sel.s2 = s2;
    return sel;
}

CoverContext make_cover_context(CoverSpec cover, TransitionBounds transitions, double epsilon) {
    if (cover.r_count != transitions.r) {
        throw PreconditionError("transition bounds were built for a different cover");
    }
    CoverContext ctx;
    ctx.gamma = cover.gamma();
    ctx.cover = std::move(cover);
    ctx.transitions = std::move(transitions);
    ctx.epsilon = epsilon;
    return ctx;
}

NsCertificate ns_certificate(const SystemSpec& system, const Point2& x, int m, int n, double theta, double eta,
                             const SlowVaryingFn& q, const CoverContext& ctx, const NsOptions& options) {
    if (!(theta > 0.0)) {
        throw PreconditionError("theta must be positive");
    }
    q.validate();
    if (std::fabs(q.eta - eta) > 1e-12 * eta) {
        throw PreconditionError("the slow-varying function must use the certificate's eta");
    }
    NsCertificate cert;
    cert.x = x;
    cert.m = m;
    cert.n = n;
    cert.theta = theta;
    cert.eta = eta;
    cert.epsilon = ctx.epsilon;
    cert.q = q;
    cert.M_k = ctx.transitions.M_k;

    const Recurrence rec = recurrence_for(system, x, m, n, eta, ctx.epsilon, ctx.gamma);
    cert.indices = rec.sel;
    cert.t_minus = rec.seq.t(-rec.sel.l1 - rec.sel.s1);
    cert.t_plus = rec.seq.t(rec.sel.l2 + rec.sel.s2);

    const int i = label_of(ctx.gamma, rec.orbit.at(int(cert.t_minus)));
    const int j = label_of(ctx.gamma, rec.orbit.at(int(cert.t_plus)));
    cert.connector = find_connector(ctx.transitions, j, i, options.connector_length);

    auto po = assemble({OrbitSegment::from_orbit(rec.orbit, int(cert.t_minus), int(cert.t_plus)),
                        connector_segment(ctx.transitions, cert.connector.sample_time, cert.connector.N)},
                       true);
    cert.junction_gap = po.orbit.delta;
    const auto sol = newton_refine_periodic(system, po.orbit, options.newton_tol, options.newton_max_iter);
    cert.residual = sol.residual;
    cert.newton_iters = sol.newton_iters;
    cert.p = sol.period;
    cert.K = cert.t_plus - cert.t_minus + cert.M_k - m - n;

    // Rotate so that the cycle starts at the point shadowing x.
    const long start = -cert.t_minus;
    cert.cycle.reserve(sol.points.size());
    for (long k = 0; k < cert.p; ++k) {
        cert.cycle.push_back(sol.points[std::size_t((start + k) % cert.p)]);
    }
    cert.z = cert.cycle.front();

    cert.margins = margins_for(rec.orbit, cert.cycle, 0, m, n, theta, eta, q);
    const MarginSummary sum = summarize(cert.margins);
    cert.in_ball = sum.in_ball;
    cert.chain_holds = sum.chain_holds;
    cert.first_violation = sum.first_violation;
    cert.ratio = (m + n) > 0 ? double(cert.K) / double(m + n) : 0.0;
    cert.slow_varying = check_slow_varying(q, rec.orbit, m, n);

    double min_allowance = std::numeric_limits<double>::infinity();
    for (const auto& mg : cert.margins) min_allowance = std::min(min_allowance, mg.allowance);
    cert.below_resolution = min_allowance < kResolutionFactor * std::max(sol.residual, kResidualFloor);

    // p <= m + n + K whenever N <= M_k; longer connectors realize the larger
    // periods available in mixing mode.
    if (cert.p != cert.t_plus - cert.t_minus + cert.connector.N ||
        (cert.connector.N <= cert.M_k && cert.p > long(m) + n + cert.K)) {
        throw Error("internal", "certificate period bookkeeping violated");
    }
    return cert;
}

SublinearityTable sublinearity_scan(const SystemSpec& system, const Point2& x, double theta,
                                    const std::vector<double>& eta_list,
                                    const std::vector<std::pair<int, int>>& mn_list, const SlowVaryingFn& q,
                                    const CoverContext& ctx) {
    if (eta_list.empty() || mn_list.empty()) {
        throw PreconditionError("sublinearity_scan needs non-empty eta and (m, n) lists");
    }
    SublinearityTable table;
    table.etas = eta_list;
    std::sort(table.etas.begin(), table.etas.end());
    auto sizes = mn_list;
    std::sort(sizes.begin(), sizes.end(), [](const auto& a, const auto& b) {
        return a.first + a.second != b.first + b.second ? a.first + a.second < b.first + b.second
                                                        : a.first < b.first;
    });
    const std::size_t half_start = sizes.size() / 2;
    for (double eta : table.etas) {
        SlowVaryingFn qe = q;
        qe.eta = eta;
        double summary = 0.0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            const auto [m, n] = sizes[k];
            const auto cert = ns_certificate(system, x, m, n, theta, eta, qe, ctx);
            const bool ok = std::all_of(cert.margins.begin(), cert.margins.end(),
                                        [](const Margin& mg) { return mg.distance <= mg.allowance; });
            table.rows.push_back({eta, m, n, cert.K, cert.ratio, cert.in_ball, cert.p, ok,
                                  int(cert.margins.size())});
            if (k >= half_start) summary = std::max(summary, cert.ratio);
        }
        table.summary.push_back(summary);
    }
    return table;
}

GnsCertificate gns_certificate(const SystemSpec& system, const std::vector<GnsSegment>& segments, double theta,
                               double eta, const SlowVaryingFn& q, const CoverContext& ctx,
                               std::optional<long> target_total_gap) {
    const std::size_t k = segments.size();
    if (k < 2) {
        throw PreconditionError("a GNS certificate needs at least two segments");
    }
    if (!(theta > 0.0)) {
        throw PreconditionError("theta must be positive");
    }
    q.validate();
    if (target_total_gap && !ctx.transitions.mixing_mode) {
        throw PreconditionError("a prescribed total gap needs mixing-mode transition bounds");
    }
    const auto& tb = ctx.transitions;
    GnsCertificate g;
    g.segments = segments;

    std::vector<Recurrence> recs;
    recs.reserve(k);
    for (const auto& s : segments) {
        recs.push_back(recurrence_for(system, s.x, s.m, s.n, eta, ctx.epsilon, ctx.gamma));
        const auto& r = recs.back();
        g.indices.push_back(r.sel);
        g.t_minus.push_back(r.seq.t(-r.sel.l1 - r.sel.s1));
        g.t_plus.push_back(r.seq.t(r.sel.l2 + r.sel.s2));
    }

    // Cover pair of each connector: end of segment i to start of segment i+1.
    std::vector<int> from(k), to(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t nx = (i + 1) % k;
        from[i] = label_of(ctx.gamma, recs[i].orbit.at(int(g.t_plus[i])));
        to[i] = label_of(ctx.gamma, recs[nx].orbit.at(int(g.t_minus[nx])));
    }

    long base = 0;
    for (std::size_t i = 0; i < k; ++i) {
        base += g.t_plus[i] - g.t_minus[i] - segments[i].m - segments[i].n;
        g.K.push_back(g.t_plus[i] - g.t_minus[i] + tb.M_k - segments[i].m - segments[i].n);
        g.gap_budget += g.K.back();
    }

    std::vector<std::optional<int>> lengths(k);
    if (target_total_gap) {
        // Sum N_i = target - base, each N_i in [X_pair, H_max]; every such length
        // is witnessed in mixing mode.
        long need = *target_total_gap - base;
        std::vector<int> N(k);
        long have = 0;
        for (std::size_t i = 0; i < k; ++i) {
            N[i] = std::max(1, *tb.X_at(to[i], from[i]));
            have += N[i];
        }
        long extra = need - have;
        if (extra < 0) {
            throw GapInfeasibleError("target total gap is below the smallest witnessed connectors");
        }
        for (std::size_t i = 0; extra > 0; i = (i + 1) % k) {
            bool room = false;
            for (std::size_t t = 0; t < k; ++t) room = room || N[t] < tb.H_max;
            if (!room) {
                throw GapInfeasibleError("target total gap exceeds the transition horizon");
            }
            if (N[i] < tb.H_max) {
                ++N[i];
                --extra;
            }
        }
        for (std::size_t i = 0; i < k; ++i) lengths[i] = N[i];
    }

    std::vector<OrbitSegment> pieces;
    std::vector<long> pos(k);
    long cursor = 0;
    for (std::size_t i = 0; i < k; ++i) {
        g.connectors.push_back(find_connector(tb, from[i], to[i], lengths[i]));
        pos[i] = cursor - g.t_minus[i];
        pieces.push_back(OrbitSegment::from_orbit(recs[i].orbit, int(g.t_minus[i]), int(g.t_plus[i])));
        pieces.push_back(connector_segment(tb, g.connectors.back().sample_time, g.connectors.back().N));
        cursor += (g.t_plus[i] - g.t_minus[i]) + g.connectors.back().N;
    }
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t nx = (i + 1) % k;
        g.gaps.push_back(g.t_plus[i] - segments[i].n + g.connectors[i].N - g.t_minus[nx] - segments[nx].m);
        g.total_gap += g.gaps.back();
    }

    const auto po = assemble(std::move(pieces), true);
    g.junction_gap = po.orbit.delta;
    const auto sol = newton_refine_periodic(system, po.orbit);
    g.residual = sol.residual;
    g.newton_iters = sol.newton_iters;
    g.period = sol.period;

    // z shadows x_1; segment i sits at the stated offset from z.
    std::vector<Point2> cycle;
    cycle.reserve(sol.points.size());
    for (long t = 0; t < g.period; ++t) {
        cycle.push_back(sol.points[std::size_t((pos[0] + t) % g.period)]);
    }
    g.z = cycle.front();
    g.offsets_consistent = true;
    long formula = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (i > 0) formula += segments[i - 1].n + g.gaps[i - 1] + segments[i].m;
        const long actual = ((pos[i] - pos[0]) % g.period + g.period) % g.period;
        g.offsets.push_back(formula);
        g.offsets_consistent = g.offsets_consistent && (formula % g.period) == actual;
        auto mg = margins_for(recs[i].orbit, cycle, formula, segments[i].m, segments[i].n, theta, eta, q);
        const MarginSummary sum = summarize(mg);
        g.in_ball.push_back(sum.in_ball);
        g.first_violation.push_back(sum.first_violation);
        g.margins.push_back(std::move(mg));
    }
    long period_formula = 0;
    for (std::size_t i = 0; i < k; ++i) period_formula += segments[i].n + segments[i].m + g.gaps[i];
    g.offsets_consistent = g.offsets_consistent && period_formula == g.period;
    g.offset_defect = cycle_defect(system, sol, 8);
    return g;
}

} // namespace nuspec
