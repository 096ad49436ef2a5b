#include "nuspec/recurrence.hpp"

#include "nuspec/curve_tracking.hpp"
#include "nuspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nuspec {

namespace {

constexpr long kMaxCellsPerSide = 4096;
constexpr int kBallDirectionIterates = 60;

} // namespace

SetSpec SetSpec::ball(const Point2& center, double radius) {
    if (!(radius > 0.0)) {
        throw PreconditionError("ball radius must be positive");
    }
    SetSpec s(Kind::Ball);
    s.centers_ = {center};
    s.radius_ = radius;
    return s;
}

std::int64_t SetSpec::cell_key(long i, long j) const {
    if (cells_per_side_ > 0 && centers_.front().space == Space::Torus2) {
        i = ((i % cells_per_side_) + cells_per_side_) % cells_per_side_;
        j = ((j % cells_per_side_) + cells_per_side_) % cells_per_side_;
    }
    return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::int64_t>(static_cast<std::uint32_t>(j));
}

SetSpec SetSpec::ball_union(std::vector<Point2> centers, double radius) {
    if (centers.empty()) {
        throw PreconditionError("ball union needs at least one center");
    }
    if (!(radius > 0.0)) {
        throw PreconditionError("ball radius must be positive");
    }
    SetSpec s(Kind::BallUnion);
    s.centers_ = std::move(centers);
    s.radius_ = radius;
    if (s.centers_.front().space == Space::Torus2) {
        s.cells_per_side_ = std::clamp(static_cast<long>(std::floor(1.0 / radius)), 1L, kMaxCellsPerSide);
        s.cell_ = 1.0 / double(s.cells_per_side_);
    } else {
        s.cells_per_side_ = 0;
        s.cell_ = radius;
    }
    auto hash = std::make_shared<std::unordered_map<std::int64_t, std::vector<std::size_t>>>();
    for (std::size_t i = 0; i < s.centers_.size(); ++i) {
        const auto& c = s.centers_[i];
        (*hash)[s.cell_key(long(std::floor(c.x / s.cell_)), long(std::floor(c.y / s.cell_)))].push_back(i);
    }
    s.hash_ = std::move(hash);
    return s;
}

SetSpec SetSpec::block(const SystemSpec& system, const PesinBlockParams& params, int max_k) {
    params.validate();
    SetSpec s(Kind::BlockSample);
    s.system_ = system;
    s.params_ = params;
    s.max_k_ = max_k;
    return s;
}

SetSpec SetSpec::whole() { return SetSpec(Kind::Whole); }
SetSpec SetSpec::empty() { return SetSpec(Kind::Empty); }

std::optional<std::size_t> SetSpec::nearest_center(const Point2& p) const {
    if (kind_ == Kind::Ball) {
        if (distance(p, centers_.front()) < radius_) return std::size_t{0};
        return std::nullopt;
    }
    if (kind_ != Kind::BallUnion) {
        return std::nullopt;
    }
    std::optional<std::size_t> best;
    double best_d = radius_;
    auto consider = [&](std::size_t i) {
        const double d = distance(p, centers_[i]);
        if (d < radius_ && (!best || d < best_d || (d == best_d && i < *best))) {
            best_d = d;
            best = i;
        }
    };
    if (cells_per_side_ > 0 && cells_per_side_ < 3) {
        for (std::size_t i = 0; i < centers_.size(); ++i) consider(i);
        return best;
    }
    const long ci = long(std::floor(p.x / cell_));
    const long cj = long(std::floor(p.y / cell_));
    for (long di = -1; di <= 1; ++di) {
        for (long dj = -1; dj <= 1; ++dj) {
            const auto it = hash_->find(cell_key(ci + di, cj + dj));
            if (it == hash_->end()) continue;
            for (std::size_t i : it->second) consider(i);
        }
    }
    return best;
}

bool SetSpec::contains(const Point2& p) const {
    switch (kind_) {
    case Kind::Whole:
        return true;
    case Kind::Empty:
        return false;
    case Kind::Ball:
    case Kind::BallUnion:
        return nearest_center(p).has_value();
    case Kind::BlockSample: {
        const BlockIndex idx = pesin_block_index(*system_, p, params_);
        return idx.k && *idx.k <= max_k_;
    }
    }
    return false;
}

long ReturnTimeSequence::t(long i) const {
    if (i == 0) return 0;
    if (!has(i)) {
        throw HorizonError("return time index outside the computed range", i);
    }
    return i > 0 ? forward[std::size_t(i - 1)] : backward[std::size_t(-i - 1)];
}

bool ReturnTimeSequence::has(long i) const {
    if (i == 0) return true;
    if (i > 0) return std::size_t(i) <= forward.size();
    return std::size_t(-i) <= backward.size();
}

ReturnTimeSequence return_times(const SystemSpec& system, const Point2& x, const SetSpec& gamma, int count_fwd,
                                int count_bwd, long horizon) {
    if (!gamma.contains(x)) {
        throw PreconditionError("return_times needs the center inside Gamma");
    }
    ReturnTimeSequence seq;
    seq.center = x;
    seq.gamma = gamma;
    Point2 p = x;
    long k = 0;
    while (int(seq.forward.size()) < count_fwd && k < horizon) {
        p = apply(system, p);
        ++k;
        if (gamma.contains(p)) seq.forward.push_back(k);
    }
    seq.horizon = k;
    p = x;
    k = 0;
    while (int(seq.backward.size()) < count_bwd && k < horizon) {
        p = apply_inverse(system, p);
        ++k;
        if (gamma.contains(p)) seq.backward.push_back(-k);
    }
    seq.backward_horizon = k;
    seq.partial = int(seq.forward.size()) < count_fwd || int(seq.backward.size()) < count_bwd;
    return seq;
}

ReturnTimeSequence return_times(const Orbit& orb, const SetSpec& gamma, int count_fwd, int count_bwd) {
    const Point2& x = orb.at(0);
    if (!gamma.contains(x)) {
        throw PreconditionError("return_times needs the center inside Gamma");
    }
    ReturnTimeSequence seq;
    seq.center = x;
    seq.gamma = gamma;
    long k = 0;
    while (int(seq.forward.size()) < count_fwd && k < orb.forward()) {
        ++k;
        if (gamma.contains(orb.at(int(k)))) seq.forward.push_back(k);
    }
    seq.horizon = k;
    k = 0;
    while (int(seq.backward.size()) < count_bwd && k < orb.back()) {
        ++k;
        if (gamma.contains(orb.at(int(-k)))) seq.backward.push_back(-k);
    }
    seq.backward_horizon = k;
    seq.partial = int(seq.forward.size()) < count_fwd || int(seq.backward.size()) < count_bwd;
    return seq;
}

BallReturn first_return_ball(const SystemSpec& system, const Point2& x, double r, int grid, int T_max) {
    if (!(r > 0.0) || grid < 1 || T_max < 1) {
        throw PreconditionError("first_return_time_ball needs r > 0, grid >= 1, T_max >= 1");
    }
    BallReturn out;
    if (grid == 1) {
        Point2 p = x;
        for (int k = 1; k <= T_max; ++k) {
            p = apply(system, p);
            if (distance(p, x) < r) {
                out.tau = k;
                out.start = x;
                out.image = p;
                return out;
            }
        }
        return out;
    }

    const Vec2 e1 = oseledec_directions(system, x, kBallDirectionIterates).Eu;
    const Vec2 e2{-e1.y, e1.x};
    std::vector<double> offsets;
    for (int j = 0; j < grid; ++j) {
        offsets.push_back(r * double(2 * j - (grid - 1)) / double(grid));
    }
    if (grid % 2 == 0) {
        offsets.push_back(0.0);
    }
    std::vector<CurveTracker::Row> rows;
    for (double a : offsets) {
        const double half = std::sqrt(std::max(0.0, r * r - a * a)) * 0.999999;
        CurveTracker::Row row;
        row.origin = x.vec() + a * e2;
        row.direction = e1;
        row.params = {-half, half};
        if (a == 0.0) row.params.push_back(0.0);
        for (int i = 0; i < grid; ++i) {
            const double s = r * double(2 * i - (grid - 1)) / double(grid);
            if (std::fabs(s) < half) row.params.push_back(s);
        }
        std::sort(row.params.begin(), row.params.end());
        row.params.erase(std::unique(row.params.begin(), row.params.end()), row.params.end());
        rows.push_back(std::move(row));
    }
    CurveTracker tracker(system, std::move(rows));
    const auto hit = tracker.first_hit(x, r, 1, T_max);
    out.vertices = tracker.vertex_count();
    out.budget_exhausted = tracker.budget_exhausted();
    if (hit) {
        out.tau = hit->step;
        out.start = hit->start;
        out.image = hit->image;
    }
    return out;
}

std::optional<int> first_return_time_ball(const SystemSpec& system, const Point2& x, double r, int grid,
                                          int T_max) {
    return first_return_ball(system, x, r, grid, T_max).tau;
}

double recurrence_bound(const LyapunovSpectrum& spectrum) {
    if (!spectrum.hyperbolic || !(spectrum.lambda_u > 0.0) || !(spectrum.lambda_s < 0.0)) {
        throw PreconditionError("not hyperbolic: the recurrence bound needs lambda_s < 0 < lambda_u");
    }
    return 1.0 / spectrum.lambda_u - 1.0 / spectrum.lambda_s;
}

RecurrenceScalingReport recurrence_scaling(const SystemSpec& system, const Point2& x,
                                           const std::vector<double>& radii, int grid, int T_max,
                                           const LyapunovSpectrum& spectrum) {
    if (radii.empty()) {
        throw PreconditionError("recurrence_scaling needs at least one radius");
    }
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (i > 0 && !(radii[i] < radii[i - 1])) {
            throw PreconditionError("radii must be strictly descending");
        }
    }
    if (radii.back() < 1e-6 || radii.front() >= 1.0) {
        throw PreconditionError("radii must lie in [1e-6, 1)");
    }
    RecurrenceScalingReport rep;
    rep.bound = recurrence_bound(spectrum);
    rep.lower_bound = 1.0 / spectrum.Lambda_u - 1.0 / spectrum.Lambda_s;
    rep.radii = radii;
    rep.grid = grid;
    rep.T_max = T_max;
    for (double r : radii) {
        const auto tau = first_return_time_ball(system, x, r, grid, T_max);
        rep.tau.push_back(tau);
        rep.censored.push_back(!tau.has_value());
        if (tau) {
            rep.ratios.push_back(double(*tau) / (-std::log(r)));
        } else {
            rep.ratios.push_back(std::nullopt);
            rep.censored_warning = true;
        }
    }
    int taken = 0;
    for (auto it = rep.ratios.rbegin(); it != rep.ratios.rend() && taken < 3; ++it) {
        if (!*it) continue;
        rep.limsup_estimate = taken == 0 ? **it : std::max(rep.limsup_estimate, **it);
        rep.has_estimate = true;
        ++taken;
    }
    return rep;
}

double NonlacunarityProfile::tail_deviation(int i0) const {
    double worst = 0.0;
    for (std::size_t k = std::size_t(std::max(i0, 1)) - 1; k < ratios_fwd.size(); ++k) {
        worst = std::max(worst, std::fabs(ratios_fwd[k] - 1.0));
    }
    return worst;
}

double NonlacunarityProfile::tail_deviation_two_sided(int i0) const {
    double worst = 0.0;
    for (std::size_t k = std::size_t(std::max(i0, 1)) - 1; k < ratios_two_sided.size(); ++k) {
        worst = std::max(worst, std::fabs(ratios_two_sided[k] - 1.0));
    }
    return worst;
}

NonlacunarityProfile nonlacunarity_profile(const ReturnTimeSequence& seq) {
    if (seq.forward.size() < 3) {
        throw PreconditionError("nonlacunarity_profile needs at least 3 forward times");
    }
    NonlacunarityProfile prof;
    for (long i = 1; seq.has(i + 1); ++i) {
        prof.ratios_fwd.push_back(double(seq.t(i + 1)) / double(seq.t(i)));
    }
    for (long i = 1; seq.has(i + 1) && seq.has(-i - 1); ++i) {
        prof.ratios_two_sided.push_back(double(seq.t(i + 1) - seq.t(-i - 1)) / double(seq.t(i) - seq.t(-i)));
    }
    return prof;
}

std::optional<long> interval_hit_check(const ReturnTimeSequence& seq, double epsilon, long N_start) {
    if (!(epsilon > 0.0)) {
        throw PreconditionError("interval_hit_check needs epsilon > 0");
    }
    N_start = std::max(N_start, 1L);
    const long n_max = static_cast<long>(std::floor(double(seq.horizon) / (1.0 + epsilon)));
    if (N_start > n_max) {
        return std::nullopt;
    }
    const auto& t = seq.forward;
    long last_fail = N_start - 1;
    for (long n = N_start; n <= n_max; ++n) {
        const auto it = std::lower_bound(t.begin(), t.end(), n);
        if (it == t.end() || double(*it) >= double(n) + double(n) * epsilon) {
            last_fail = n;
        }
    }
    if (last_fail == n_max) {
        return std::nullopt;
    }
    return last_fail + 1;
}

double birkhoff_indicator_average(const SystemSpec& system, const Point2& x, const SetSpec& gamma, long horizon) {
    if (horizon < 1) {
        throw PreconditionError("birkhoff_indicator_average needs horizon >= 1");
    }
    long hits = 0;
    Point2 p = x;
    for (long j = 0; j < horizon; ++j) {
        if (gamma.contains(p)) ++hits;
        p = apply(system, p);
    }
    return double(hits) / double(horizon);
}

} // namespace nuspec
