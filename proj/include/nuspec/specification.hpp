#pragma once

#include "nuspec/dynamics.hpp"
#include "nuspec/lyapunov.hpp"
#include "nuspec/recurrence.hpp"
#include "nuspec/shadowing.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nuspec {

// Weight q with q(f^{+-1}x) <= e^eta q(x), checked along the orbits actually used.
struct SlowVaryingFn {
    enum class Kind { Constant, Modulated };

    Kind kind = Kind::Constant;
    double c = 1.0;
    double amplitude = 0.0; // in [0, 1)
    int frequency = 0;
    double eta = 0.0;

    static SlowVaryingFn constant(double c, double eta);
    static SlowVaryingFn modulated(double c, double amplitude, int frequency, double eta);

    // c * (1 + amplitude * sin(2 pi frequency x)) for Modulated.
    double operator()(const Point2& p) const;
    void validate() const;
};

struct SlowVaryingCheck {
    bool ok = true;
    double worst_ratio = 1.0;
};

SlowVaryingCheck check_slow_varying(const SlowVaryingFn& q, const SystemSpec& system, const Point2& x, int m, int n);
SlowVaryingCheck check_slow_varying(const SlowVaryingFn& q, const Orbit& orbit, int m, int n);

struct CoverSpec {
    std::vector<Point2> centers;
    double radius = 0.0; // < delta / 2
    double delta = 0.0;
    int r_count = 0;
    int block_k = 0;     // largest block index among the centers

    // Gamma: the union of the cover balls.
    SetSpec gamma() const;
};

// Greedy net: every block point lies within `radius` = 0.49 delta of a center.
CoverSpec build_cover(const std::vector<ClassifiedPoint>& block_points, double delta, int max_centers);

inline constexpr int kDefaultTransitionHorizon = 256;

// Empirical transition data of the cover along one sampling orbit.
// Transition j -> i at gap h: the orbit is in U_j at time s and in U_i at s + h.
struct TransitionBounds {
    int r = 0;
    int T_floor = 1;
    int H_max = kDefaultTransitionHorizon;
    bool mixing_mode = false;
    std::vector<std::optional<int>> X; // X[i * r + j]
    int M_k = 0;

    std::vector<Point2> sampling_orbit;
    std::vector<std::int32_t> labels;  // nearest cover center or -1
    // Earliest witnessing time s for (j -> i, h), or -1.
    std::vector<std::int32_t> witness;

    std::optional<int> X_at(int i, int j) const { return X[std::size_t(i) * std::size_t(r) + std::size_t(j)]; }
    std::optional<long> witness_time(int j, int i, int h) const;
    // Smallest witnessed h in [lo, hi] for j -> i.
    std::optional<int> smallest_gap(int j, int i, int lo, int hi) const;
};

TransitionBounds estimate_transitions(const SystemSpec& system, const CoverSpec& cover, const Point2& start,
                                      long sampling_orbit_length, bool mixing_mode, int T_floor,
                                      int H_max = kDefaultTransitionHorizon);

struct IndexSelection {
    long l1 = 0, s1 = 0, l2 = 0, s2 = 0;
};

// Indices with t_{-l1} < -m <= t_{-l1+1}, t_{l2} > n >= t_{l2-1} and
// t_{-l1-s1} <= c t_{-l1} < t_{-l1-s1+1}, t_{l2+s2} >= c t_{l2} > t_{l2+s2-1},
// where c = 1 + 2 eta / epsilon.
IndexSelection select_indices(const ReturnTimeSequence& seq, int m, int n, double eta, double epsilon);

// Everything a certificate needs from the block: cover, transitions, the
// Pesin epsilon and the recurrence set.
struct CoverContext {
    CoverSpec cover;
    TransitionBounds transitions;
    double epsilon = 0.0;
    SetSpec gamma = SetSpec::empty();
};

CoverContext make_cover_context(CoverSpec cover, TransitionBounds transitions, double epsilon);

struct Connector {
    Point2 y;
    int N = 0;
    long sample_time = 0;
    int from_set = 0; // j, holds the end of the x-segment
    int to_set = 0;   // i, holds the start of the next x-segment
};

struct Margin {
    int j = 0;
    double distance = 0.0;
    double allowance = 0.0; // theta q(f^j x)^-2
    double chain = 0.0;     // theta q(x)^-2 e^{-2|j| eta}
};

struct NsCertificate {
    Point2 x;
    int m = 0, n = 0;
    double theta = 0.0, eta = 0.0, epsilon = 0.0;
    SlowVaryingFn q;
    IndexSelection indices;
    long t_minus = 0; // t_{-l1-s1}
    long t_plus = 0;  // t_{l2+s2}
    Connector connector;
    int M_k = 0;
    long K = 0;
    long p = 0;
    Point2 z;
    std::vector<Margin> margins; // j = -m .. n
    bool in_ball = false;
    bool chain_holds = false;
    std::optional<int> first_violation;
    bool below_resolution = false;
    double ratio = 0.0; // K / (m + n)
    double junction_gap = 0.0;
    double residual = 0.0;
    int newton_iters = 0;
    SlowVaryingCheck slow_varying;
    std::vector<Point2> cycle; // the refined periodic orbit, starting at z
};

struct NsOptions {
    // Connector length; must be witnessed. Default: smallest witnessed N <= M_k.
    std::optional<int> connector_length;
    double newton_tol = kNewtonTolerance;
    int newton_max_iter = kNewtonMaxIter;
};

NsCertificate ns_certificate(const SystemSpec& system, const Point2& x, int m, int n, double theta, double eta,
                             const SlowVaryingFn& q, const CoverContext& ctx, const NsOptions& options = {});

struct SublinearityRow {
    double eta = 0.0;
    int m = 0, n = 0;
    long K = 0;
    double ratio = 0.0;
    bool in_ball = false;
    long p = 0;
    bool margins_ok = false;   // every margin inequality holds
    int margin_count = 0;
};

struct SublinearityTable {
    std::vector<SublinearityRow> rows;   // sorted by (eta, m + n, m)
    std::vector<double> etas;
    std::vector<double> summary;         // per eta: max ratio over the larger half of mn_list
};

SublinearityTable sublinearity_scan(const SystemSpec& system, const Point2& x, double theta,
                                    const std::vector<double>& eta_list,
                                    const std::vector<std::pair<int, int>>& mn_list, const SlowVaryingFn& q,
                                    const CoverContext& ctx);

struct GnsSegment {
    Point2 x;
    int m = 0, n = 0;
};

struct GnsCertificate {
    std::vector<GnsSegment> segments;
    std::vector<IndexSelection> indices;
    std::vector<long> t_minus, t_plus;
    std::vector<Connector> connectors;
    std::vector<long> gaps;     // p_i
    std::vector<long> K;        // K_i
    std::vector<long> offsets;  // offset of segment i from z
    Point2 z;
    long period = 0;
    std::vector<bool> in_ball;
    std::vector<std::optional<int>> first_violation;
    std::vector<std::vector<Margin>> margins;
    long gap_budget = 0;        // sum K_i
    long total_gap = 0;         // sum p_i
    bool offsets_consistent = false;
    double offset_defect = 0.0; // short-window re-iteration defect along the cycle
    double residual = 0.0;
    int newton_iters = 0;
    double junction_gap = 0.0;
};

GnsCertificate gns_certificate(const SystemSpec& system, const std::vector<GnsSegment>& segments, double theta,
                               double eta, const SlowVaryingFn& q, const CoverContext& ctx,
                               std::optional<long> target_total_gap = std::nullopt);

} // namespace nuspec
