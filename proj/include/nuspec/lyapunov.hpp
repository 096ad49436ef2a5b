#pragma once

#include "nuspec/dynamics.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace nuspec {

struct LyapunovSpectrum {
    std::vector<double> exponents; // ascending
    double lambda_s = 0.0;         // maximal negative exponent
    double lambda_u = 0.0;         // minimal positive exponent
    double Lambda_s = 0.0;         // minimal negative exponent
    double Lambda_u = 0.0;         // maximal positive exponent
    long horizon = 0;
    bool hyperbolic = false;
    // Orbit average of log|det Df|; equals the exponent sum up to rounding.
    double mean_log_det = 0.0;

    static LyapunovSpectrum from_exponents(std::vector<double> exponents, long horizon);
};

// Benettin-style QR accumulation of the tangent cocycle along N iterates of x0,
// re-orthonormalizing every qr_period steps.
LyapunovSpectrum lyapunov_spectrum(const SystemSpec& system, const Point2& x0, long N, int qr_period);

struct SplittingEstimate {
    Point2 at;
    Vec2 Eu;
    Vec2 Es;
    double angle = 0.0; // acute angle between the two lines, in (0, pi/2]
};

// Unit representative of a line direction with a fixed sign convention.
Vec2 line_direction(Vec2 v);

// Acute angle between two lines.
double line_angle(const Vec2& a, const Vec2& b);

SplittingEstimate oseledec_directions(const SystemSpec& system, const Point2& x, int N);

struct PesinBlockParams {
    double lambda = 0.0;
    double mu = 0.0;
    double epsilon = 0.0;
    int n_fwd = 200;
    int n_bwd = 200;
    int m_range = 50;

    void validate() const;

    // lambda = |lambda_s|, mu = lambda_u, epsilon = min(lambda, mu) / ratio.
    static PesinBlockParams from_spectrum(const LyapunovSpectrum& spectrum, double ratio = 10.0);
};

inline constexpr int kMaxBlockIndex = 60;

struct BlockIndex {
    std::optional<int> k;

    bool finite() const { return k.has_value(); }
    bool operator==(const BlockIndex&) const = default;
};

// Smallest block index needed to satisfy each finite-horizon condition.
struct BlockRequirement {
    double contraction = 0.0; // condition (a)
    double expansion = 0.0;   // condition (b)
    double angle = 0.0;       // condition (c)

    double worst() const;
};

BlockRequirement pesin_block_requirement(const SystemSpec& system, const Point2& x,
                                         const PesinBlockParams& params, const SplittingEstimate& splitting);

BlockIndex pesin_block_index(const SystemSpec& system, const Point2& x, const PesinBlockParams& params,
                             const SplittingEstimate& splitting);
BlockIndex pesin_block_index(const SystemSpec& system, const Point2& x, const PesinBlockParams& params);

// True when x satisfies all three conditions with block index k.
bool satisfies_block(const SystemSpec& system, const Point2& x, const PesinBlockParams& params,
                     const SplittingEstimate& splitting, int k);

struct ClassifiedPoint {
    Point2 point;
    BlockIndex index;
};

struct BlockSample {
    std::vector<ClassifiedPoint> points;
    double finite_fraction = 0.0;

    double fraction_at_most(int k) const;
};

inline constexpr int kBlockSampleSpacing = 100;

// Classifies points taken every kBlockSampleSpacing iterates along one long orbit
// started from a seeded random point.
BlockSample block_sample(const SystemSpec& system, const PesinBlockParams& params, int sample_size,
                         std::uint64_t seed);

// Seeded starting point on the support of the natural measure.
Point2 random_start(const SystemSpec& system, std::uint64_t seed);

} // namespace nuspec
