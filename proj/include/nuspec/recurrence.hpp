#pragma once

#include "nuspec/dynamics.hpp"
#include "nuspec/lyapunov.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace nuspec {

// A measurable set Gamma given by a membership predicate.
class SetSpec {
public:
    enum class Kind { Ball, BallUnion, BlockSample, Whole, Empty };

    static SetSpec ball(const Point2& center, double radius);
    // Union of equal-radius balls; membership is answered through a cell hash.
    static SetSpec ball_union(std::vector<Point2> centers, double radius);
    // Points whose finite-horizon block index is at most max_k.
    static SetSpec block(const SystemSpec& system, const PesinBlockParams& params, int max_k);
    static SetSpec whole();
    static SetSpec empty();

    Kind kind() const { return kind_; }
    bool contains(const Point2& p) const;

    // For Ball and BallUnion: index of the nearest center within the radius.
    std::optional<std::size_t> nearest_center(const Point2& p) const;

    const std::vector<Point2>& centers() const { return centers_; }
    double radius() const { return radius_; }
    int max_k() const { return max_k_; }

private:
    explicit SetSpec(Kind kind) : kind_(kind) {}
    std::int64_t cell_key(long i, long j) const;

    Kind kind_;
    std::vector<Point2> centers_;
    double radius_ = 0.0;
    // Block membership.
    std::optional<SystemSpec> system_;
    PesinBlockParams params_;
    int max_k_ = 0;
    // BallUnion hash: cell side >= radius.
    double cell_ = 1.0;
    long cells_per_side_ = 1;
    std::shared_ptr<const std::unordered_map<std::int64_t, std::vector<std::size_t>>> hash_;
};

// Recurrence times of `center` to Gamma: ... < t_{-2} < t_{-1} < t_0 = 0 < t_1 < t_2 < ...
struct ReturnTimeSequence {
    Point2 center;
    SetSpec gamma = SetSpec::whole();
    std::vector<long> forward;   // t_1, t_2, ...
    std::vector<long> backward;  // t_{-1}, t_{-2}, ...
    // Every integer in (0, horizon] and in [-backward_horizon, 0) was scanned.
    long horizon = 0;
    long backward_horizon = 0;
    bool partial = false; // fewer times than requested

    // t_i for any available index; t(0) = 0.
    long t(long i) const;
    bool has(long i) const;
};

ReturnTimeSequence return_times(const SystemSpec& system, const Point2& x, const SetSpec& gamma, int count_fwd,
                                int count_bwd, long horizon);

// Same, read off a precomputed orbit (index 0 is the center).
ReturnTimeSequence return_times(const Orbit& orbit, const SetSpec& gamma, int count_fwd, int count_bwd);

struct BallReturn {
    std::optional<int> tau;
    bool budget_exhausted = false;
    Point2 start;           // a point of the ball realizing the return
    Point2 image;           // its image at time tau
    std::size_t vertices = 0;
};

inline constexpr int kDefaultBallGrid = 5;

// First return of B(x, r) to itself. grid = 1 follows the center only; grid >= 2
// follows grid parallel chords of the ball along the unstable direction at x
// (lattice points included), so the estimate is never later than the lattice
// proxy and never earlier than the true set return time.
BallReturn first_return_ball(const SystemSpec& system, const Point2& x, double r, int grid, int T_max);
std::optional<int> first_return_time_ball(const SystemSpec& system, const Point2& x, double r, int grid,
                                          int T_max);

struct RecurrenceScalingReport {
    std::vector<double> radii;
    std::vector<std::optional<int>> tau;
    std::vector<std::optional<double>> ratios; // tau / (-log r); empty when censored
    std::vector<bool> censored;
    int grid = 0;
    int T_max = 0;
    double limsup_estimate = 0.0;
    bool has_estimate = false;
    bool censored_warning = false;
    double bound = 0.0;       // 1/lambda_u - 1/lambda_s
    double lower_bound = 0.0; // 1/Lambda_u - 1/Lambda_s
};

RecurrenceScalingReport recurrence_scaling(const SystemSpec& system, const Point2& x,
                                           const std::vector<double>& radii, int grid, int T_max,
                                           const LyapunovSpectrum& spectrum);

double recurrence_bound(const LyapunovSpectrum& spectrum);

struct NonlacunarityProfile {
    std::vector<double> ratios_fwd;       // entry i-1 holds t_{i+1}/t_i, i >= 1
    std::vector<double> ratios_two_sided; // entry i-1 holds (t_{i+1}-t_{-i-1})/(t_i-t_{-i}), i >= 1

    // sup over i >= i0 of |t_{i+1}/t_i - 1|; 0 past the end of the data.
    double tail_deviation(int i0) const;
    double tail_deviation_two_sided(int i0) const;
};

NonlacunarityProfile nonlacunarity_profile(const ReturnTimeSequence& seq);

// Smallest N >= N_start such that every n in [N, n_max] sees a return time in
// [n, n + n*epsilon), where n_max is the largest n whose window fits in the
// scanned horizon.
std::optional<long> interval_hit_check(const ReturnTimeSequence& seq, double epsilon, long N_start);

double birkhoff_indicator_average(const SystemSpec& system, const Point2& x, const SetSpec& gamma, long horizon);

} // namespace nuspec
