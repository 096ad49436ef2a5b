#pragma once

#include "nuspec/dynamics.hpp"

#include <optional>
#include <vector>

namespace nuspec {

// Chain of orbit segments {x_i, n_i}. Segments carry their own orbit points:
// re-iterating a long segment from its base would drift away from the stored
// orbit at the rate of the largest exponent.
struct PseudoOrbit {
    std::vector<OrbitSegment> segments;
    bool periodic = false;
    double delta = 0.0;        // largest junction jump
    std::vector<double> gaps;  // gaps[i] = d(f^{n_i}(x_i), x_{i+1}), cyclic when periodic

    long total_length() const;
};

// c_0 = 0, c_{i+1} = c_i + n_i.
struct ConcatenationTimes {
    std::vector<long> c;
};

struct AssembledPseudoOrbit {
    PseudoOrbit orbit;
    ConcatenationTimes times;
};

AssembledPseudoOrbit assemble(std::vector<OrbitSegment> segments, bool periodic);

struct PeriodicOrbitSolution {
    std::vector<Point2> points; // z_0 .. z_{p-1}
    long period = 0;
    double residual = 0.0;      // max_j d(f(z_j), z_{j+1 mod p})
    int newton_iters = 0;
    std::vector<double> residual_history; // residual before each iteration, then the final one
};

inline constexpr double kNewtonTolerance = 1e-11;
inline constexpr int kNewtonMaxIter = 30;
inline constexpr double kDegeneracyThreshold = 1e-12;

// Newton iteration on the cyclic system f(z_j) = z_{j+1 mod p}, all p points at once.
PeriodicOrbitSolution newton_refine_periodic(const SystemSpec& system, const PseudoOrbit& po,
                                             double tol = kNewtonTolerance, int max_iter = kNewtonMaxIter);

// |det(Df^p - I)| along the cycle through points; nullopt when Df^p is too large
// to form (the cycle is then far from degenerate).
std::optional<double> cycle_degeneracy(const SystemSpec& system, const std::vector<Point2>& points);

// Largest d(f^w(z_j), z_{j+w}) over j, with windows of at most `stride` steps.
// Short windows keep the check meaningful for long cycles, where f^p itself
// amplifies rounding by e^{lambda p}.
double cycle_defect(const SystemSpec& system, const PeriodicOrbitSolution& sol, int stride);

struct ProfileEntry {
    int segment = 0;
    int j = 0;
    double distance = 0.0;
    double bound = 0.0;
};

struct ShadowingProfile {
    double tau = 0.0;
    double epsilon = 0.0;
    std::vector<ProfileEntry> entries;
    bool pass = false;
    std::optional<ProfileEntry> first_violation;
    double max_distance = 0.0;
};

// d(f^{c_i+j}(z), f^j(x_i)) against tau * exp(-min(j, n_i - j) * epsilon).
ShadowingProfile shadowing_profile(const PeriodicOrbitSolution& sol, const AssembledPseudoOrbit& po, double tau,
                                   double epsilon);

struct DominationResult {
    bool pass = false;
    std::vector<int> S;
    std::vector<double> worst_quotient; // max over sampled x of the quotient
    std::vector<double> margin;         // -2 lambda - worst_quotient; >= 0 passes
};

// Evaluates (1/S) log(|Df^S|E(x)| / m(Df^S|F(x))) at every orbit point with S
// further points available. The fields hold unit directions of invariant lines
// at each orbit point; the S-step factors are products of one-step factors.
DominationResult check_domination(const SystemSpec& system, const std::vector<Point2>& orbit_points,
                                  const std::vector<Vec2>& E_field, const std::vector<Vec2>& F_field, int S0,
                                  double lambda, const std::vector<int>& S_list);

// Two-segment periodic pseudo-orbit: {x1, n1} followed by {y, n2} where y lies
// within `gap` of f^{n1}(x1) on its local unstable chord and f^{n2}(y) returns
// within `gap` of x1 at the first n2 >= min_return.
AssembledPseudoOrbit glue_return(const SystemSpec& system, const Point2& x1, int n1, double gap, int min_return,
                                 int max_return);

} // namespace nuspec
