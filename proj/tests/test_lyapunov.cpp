#include "nuspec/error.hpp"
#include "nuspec/lyapunov.hpp"
#include "nuspec/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace nuspec;

namespace {

const double kCat = std::log((3.0 + std::sqrt(5.0)) / 2.0);

// Unstable eigenvector of [[2,1],[1,1]].
const Vec2 kCatEu = normalized({1.0, (std::sqrt(5.0) - 1.0) / 2.0});
const Vec2 kCatEs = normalized({1.0, -(std::sqrt(5.0) + 1.0) / 2.0});

} // namespace

TEST(LyapunovSpectrum, CatMapClosedForm) {
    const auto s = lyapunov_spectrum(SystemSpec::cat_map(), torus_point(0.1234, 0.5678), 100000, 10);
    ASSERT_EQ(s.exponents.size(), 2u);
    EXPECT_NEAR(s.lambda_u, kCat, 1e-3);
    EXPECT_NEAR(s.lambda_s, -kCat, 1e-3);
    EXPECT_TRUE(s.hyperbolic);
    EXPECT_EQ(s.horizon, 100000);
}

TEST(LyapunovSpectrum, SumMatchesMeanLogDet) {
    // The perturbed map is not area-preserving; the exponent sum follows the
    // orbit average of log|det Df| instead of vanishing.
    for (const auto& sys : {SystemSpec::cat_map(), SystemSpec::perturbed_cat_map(0.05), SystemSpec::henon(1.4, 0.3)}) {
        const auto s = lyapunov_spectrum(sys, random_start(sys, 4), 50000, 10);
        EXPECT_NEAR(s.exponents[0] + s.exponents[1], s.mean_log_det, 1e-8) << sys.name();
    }
    const auto h = lyapunov_spectrum(SystemSpec::henon(1.4, 0.3), random_start(SystemSpec::henon(1.4, 0.3), 4),
                                     50000, 10);
    EXPECT_NEAR(h.mean_log_det, std::log(0.3), 1e-12);
}

TEST(LyapunovSpectrum, QrPeriodDoesNotMatter) {
    const auto sys = SystemSpec::perturbed_cat_map(0.05);
    const Point2 x = torus_point(0.2, 0.9);
    const auto a = lyapunov_spectrum(sys, x, 40000, 1);
    const auto b = lyapunov_spectrum(sys, x, 40000, 20);
    EXPECT_NEAR(a.lambda_u, b.lambda_u, 1e-9);
    EXPECT_NEAR(a.lambda_s, b.lambda_s, 1e-9);
}

TEST(LyapunovSpectrum, RejectsBadArguments) {
    EXPECT_THROW(lyapunov_spectrum(SystemSpec::cat_map(), torus_point(0.1, 0.2), 0, 10), PreconditionError);
    EXPECT_THROW(lyapunov_spectrum(SystemSpec::cat_map(), torus_point(0.1, 0.2), 100, 0), PreconditionError);
}

TEST(Oseledec, CatMapEigendirections) {
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        const auto sp = oseledec_directions(SystemSpec::cat_map(), torus_point(rng.uniform(), rng.uniform()), 60);
        EXPECT_LT(line_angle(sp.Eu, kCatEu), 1e-8);
        EXPECT_LT(line_angle(sp.Es, kCatEs), 1e-8);
        EXPECT_NEAR(sp.angle, line_angle(kCatEu, kCatEs), 1e-8);
    }
}

TEST(Oseledec, DirectionsAreInvariant) {
    const auto sys = SystemSpec::perturbed_cat_map(0.05);
    const Point2 x = random_start(sys, 8);
    const auto here = oseledec_directions(sys, x, 60);
    const auto there = oseledec_directions(sys, apply(sys, x), 60);
    const Mat2 d = differential(sys, x);
    EXPECT_LT(line_angle(d * here.Eu, there.Eu), 1e-8);
    EXPECT_LT(line_angle(d * here.Es, there.Es), 1e-8);
}

TEST(Oseledec, NeedsEnoughSteps) {
    EXPECT_THROW(oseledec_directions(SystemSpec::cat_map(), torus_point(0.1, 0.2), 10), PreconditionError);
}

TEST(PesinBlock, CatMapIsInFirstBlock) {
    PesinBlockParams p;
    p.lambda = p.mu = 0.96;
    p.epsilon = 0.2;
    p.n_fwd = p.n_bwd = 50;
    p.m_range = 20;
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        const auto idx = pesin_block_index(SystemSpec::cat_map(), torus_point(rng.uniform(), rng.uniform()), p);
        ASSERT_TRUE(idx.k.has_value());
        EXPECT_EQ(*idx.k, 1);
    }
}

TEST(PesinBlock, ExcessiveRateIsNeverSatisfied) {
    PesinBlockParams p;
    p.lambda = 2.0;
    p.mu = 0.96;
    p.epsilon = 0.2;
    p.n_fwd = p.n_bwd = 50;
    p.m_range = 20;
    const Point2 x = torus_point(0.3, 0.4);
    EXPECT_FALSE(pesin_block_index(SystemSpec::cat_map(), x, p).k.has_value());
    // Brute force: |A^n|Es| = e^{-0.9624 n} exceeds e^{k eps} e^{-(2-eps) n} for every k <= 60 once n is large.
    bool fails = false;
    for (int n = 1; n <= 50 && !fails; ++n) {
        fails = -kCat * n > kMaxBlockIndex * p.epsilon - (p.lambda - p.epsilon) * n;
    }
    EXPECT_TRUE(fails);
}

TEST(PesinBlock, IndexIsMonotoneInK) {
    const auto sys = SystemSpec::perturbed_cat_map(0.05);
    const auto spec = lyapunov_spectrum(sys, random_start(sys, 2), 50000, 10);
    const auto params = PesinBlockParams::from_spectrum(spec);
    const auto sample = block_sample(sys, params, 20, 3);
    const auto in_block = std::find_if(sample.points.begin(), sample.points.end(),
                                       [](const ClassifiedPoint& c) { return c.index.k && *c.index.k > 1; });
    ASSERT_NE(in_block, sample.points.end());
    const Point2 x = in_block->point;
    const auto split = oseledec_directions(sys, x, 60);
    const auto idx = pesin_block_index(sys, x, params, split);
    ASSERT_TRUE(idx.k.has_value());
    EXPECT_TRUE(satisfies_block(sys, x, params, split, *idx.k));
    EXPECT_TRUE(satisfies_block(sys, x, params, split, kMaxBlockIndex));
    if (*idx.k > 1) {
        EXPECT_FALSE(satisfies_block(sys, x, params, split, *idx.k - 1));
    }
}

TEST(PesinBlock, ParamsFromSpectrum) {
    const auto s = LyapunovSpectrum::from_exponents({-1.2, 0.8}, 1000);
    const auto p = PesinBlockParams::from_spectrum(s, 10.0);
    EXPECT_DOUBLE_EQ(p.lambda, 1.2);
    EXPECT_DOUBLE_EQ(p.mu, 0.8);
    EXPECT_DOUBLE_EQ(p.epsilon, 0.08);
    PesinBlockParams bad = p;
    bad.epsilon = 0.5;
    EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(BlockSample, CatMapUniformlyHyperbolic) {
    const auto s = lyapunov_spectrum(SystemSpec::cat_map(), torus_point(0.1, 0.2), 20000, 10);
    const auto params = PesinBlockParams::from_spectrum(s);
    const auto bs = block_sample(SystemSpec::cat_map(), params, 200, 9);
    EXPECT_EQ(bs.points.size(), 200u);
    EXPECT_DOUBLE_EQ(bs.fraction_at_most(3), 1.0);
    EXPECT_EQ(block_sample(SystemSpec::cat_map(), params, 1, 9).points.size(), 1u);
}

TEST(BlockSample, SeedDeterminesSample) {
    const auto sys = SystemSpec::perturbed_cat_map(0.05);
    const auto s = lyapunov_spectrum(sys, random_start(sys, 1), 20000, 10);
    const auto params = PesinBlockParams::from_spectrum(s);
    const auto a = block_sample(sys, params, 20, 5);
    const auto b = block_sample(sys, params, 20, 5);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].point, b.points[i].point);
        EXPECT_EQ(a.points[i].index, b.points[i].index);
    }
}
