#include "nuspec/error.hpp"
#include "nuspec/lyapunov.hpp"
#include "nuspec/recurrence.hpp"
#include "nuspec/rng.hpp"
#include "nuspec/specification.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace nuspec;

namespace {

const SystemSpec kCat = SystemSpec::cat_map();

ReturnTimeSequence arithmetic(long step, long count) {
    ReturnTimeSequence seq;
    for (long i = 1; i <= count; ++i) {
        seq.forward.push_back(step * i);
        seq.backward.push_back(-step * i);
    }
    seq.horizon = seq.backward_horizon = step * count;
    return seq;
}

CoverContext fixed_point_context(bool mixing) {
    const std::vector<ClassifiedPoint> pts{{torus_point(0, 0), BlockIndex{1}}};
    CoverSpec cover = build_cover(pts, 0.1, 10);
    TransitionBounds tb = estimate_transitions(kCat, cover, torus_point(0, 0), 2000, mixing, 1, 64);
    return make_cover_context(std::move(cover), std::move(tb), 0.0962);
}

} // namespace

TEST(SlowVarying, ConstantAndFlatModulation) {
    const auto c = check_slow_varying(SlowVaryingFn::constant(2.0, 0.01), kCat, torus_point(0.3, 0.4), 50, 50);
    EXPECT_TRUE(c.ok);
    EXPECT_DOUBLE_EQ(c.worst_ratio, 1.0);
    EXPECT_TRUE(check_slow_varying(SlowVaryingFn::modulated(1.0, 0.0, 3, 0.01), kCat, torus_point(0.3, 0.4), 50, 50).ok);
}

TEST(SlowVarying, ModulatedVerdictMatchesRatio) {
    const auto q = SlowVaryingFn::modulated(1.0, 0.5, 1, 0.7);
    const auto c = check_slow_varying(q, kCat, torus_point(0.3, 0.4), 0, 200);
    EXPECT_EQ(c.ok, c.worst_ratio <= std::exp(0.7));
    // Direct evaluation along the orbit.
    double worst = 1.0;
    Point2 p = torus_point(0.3, 0.4);
    for (int j = 0; j < 200; ++j) {
        const Point2 next = apply(kCat, p);
        worst = std::max({worst, q(next) / q(p), q(p) / q(next)});
        p = next;
    }
    EXPECT_NEAR(c.worst_ratio, worst, 1e-12);
}

TEST(SelectIndices, ArithmeticExample) {
    const auto seq = arithmetic(10, 100);
    const auto s = select_indices(seq, 25, 37, 0.25, 1.0);
    EXPECT_EQ(s.l1, 3);
    EXPECT_EQ(s.l2, 4);
    EXPECT_EQ(s.s1, 2);
    EXPECT_EQ(s.s2, 2);
}

TEST(SelectIndices, ExhaustiveOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        // Irregular two-sided sequence.
        ReturnTimeSequence seq;
        long t = 0;
        for (int i = 0; i < 400; ++i) seq.forward.push_back(t += 1 + long(rng.uniform() * 9));
        seq.horizon = t;
        t = 0;
        for (int i = 0; i < 400; ++i) seq.backward.push_back(t -= 1 + long(rng.uniform() * 9));
        seq.backward_horizon = -t;
        const int m = int(rng.uniform() * 300), n = int(rng.uniform() * 300);
        const double ratio = 0.01 + 0.49 * rng.uniform();
        const auto got = select_indices(seq, m, n, ratio, 1.0);
        const auto want = oracle::scan_indices([&](long i) { return seq.t(i); }, m, n, 1.0 + 2.0 * ratio, 390);
        EXPECT_EQ(got.l1, want.l1);
        EXPECT_EQ(got.s1, want.s1);
        EXPECT_EQ(got.l2, want.l2);
        EXPECT_EQ(got.s2, want.s2);
    }
}

TEST(SelectIndices, SmallWindowsDegenerateToOne) {
    const auto seq = arithmetic(10, 50);
    const auto s = select_indices(seq, 3, 4, 1e-9, 1.0);
    EXPECT_EQ(s.l1, 1);
    EXPECT_EQ(s.l2, 1);
    EXPECT_EQ(s.s1, 1);
    EXPECT_EQ(s.s2, 1);
}

TEST(SelectIndices, ShortSequenceReportsHorizon) {
    const auto seq = arithmetic(10, 5);
    try {
        select_indices(seq, 25, 37, 0.25, 1.0);
        FAIL() << "expected a horizon error";
    } catch (const HorizonError& e) {
        EXPECT_GT(e.required_horizon, 50);
    }
}

TEST(BuildCover, Collapses) {
    EXPECT_EQ(build_cover({{torus_point(0.3, 0.3), BlockIndex{1}}}, 0.1, 10).r_count, 1);
    // A period-3 orbit with small diameter collapses to one center for large delta.
    const auto pts = oracle::cat_periodic_points(50, 3);
    std::vector<ClassifiedPoint> orbit_pts;
    Point2 p = pts.front().point();
    for (int i = 0; i < 3; ++i, p = apply(kCat, p)) orbit_pts.push_back({p, BlockIndex{1}});
    EXPECT_EQ(build_cover(orbit_pts, 3.0, 10).r_count, 1);
}

TEST(BuildCover, CatMapSamplesAreCovered) {
    Rng rng(12);
    std::vector<ClassifiedPoint> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({torus_point(rng.uniform(), rng.uniform()), BlockIndex{1}});
    const auto cover = build_cover(pts, 0.1, 400);
    EXPECT_GE(cover.r_count, 40);
    EXPECT_LE(cover.r_count, 130);
    EXPECT_LT(cover.radius, cover.delta / 2);
    const SetSpec g = cover.gamma();
    for (const auto& cp : pts) EXPECT_TRUE(g.contains(cp.point));
    EXPECT_THROW(build_cover(pts, 0.1, 5), ResolutionError);
}

TEST(Transitions, FixedPointSingleSet) {
    for (int floor : {1, 4}) {
        const std::vector<ClassifiedPoint> pts{{torus_point(0, 0), BlockIndex{1}}};
        const auto cover = build_cover(pts, 0.1, 10);
        const auto tb = estimate_transitions(kCat, cover, torus_point(0, 0), 1000, false, floor, 64);
        ASSERT_TRUE(tb.X_at(0, 0).has_value());
        EXPECT_EQ(*tb.X_at(0, 0), std::max(1, floor));
    }
}

TEST(Transitions, TwoBallsAndMixingRunway) {
    CoverSpec cover;
    cover.centers = {torus_point(0.25, 0.25), torus_point(0.7, 0.6)};
    cover.radius = 0.1;
    cover.delta = 0.21;
    cover.r_count = 2;
    cover.block_k = 1;
    const auto tb = estimate_transitions(kCat, cover, torus_point(0.1234567, 0.7654321), 1000000, true, 1);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) EXPECT_TRUE(tb.X_at(i, j).has_value());
    }
    EXPECT_LE(tb.M_k, 200);
    // Scan the sampling record directly.
    const auto& L = tb.labels;
    for (int h = tb.M_k; h <= tb.M_k + 50; ++h) {
        for (int j = 0; j < 2; ++j) {
            for (int i = 0; i < 2; ++i) {
                bool seen = false;
                for (std::size_t s = 0; s + std::size_t(h) < L.size() && !seen; ++s) {
                    seen = L[s] == j && L[s + std::size_t(h)] == i;
                }
                EXPECT_TRUE(seen) << j << "->" << i << " h=" << h;
                const auto w = tb.witness_time(j, i, h);
                ASSERT_TRUE(w.has_value());
                EXPECT_EQ(L[std::size_t(*w)], j);
                EXPECT_EQ(L[std::size_t(*w + h)], i);
            }
        }
    }
}

TEST(Transitions, MissingPairIsIncompleteMixing) {
    CoverSpec cover;
    cover.centers = {torus_point(0.25, 0.25), torus_point(0.7, 0.6)};
    cover.radius = 0.01;
    cover.delta = 0.021;
    cover.r_count = 2;
    cover.block_k = 1;
    EXPECT_THROW(estimate_transitions(kCat, cover, torus_point(0.1234567, 0.7654321), 2000, true, 1),
                 IncompleteMixingError);
}

TEST(NsCertificate, FixedPointShadowsItself) {
    const auto ctx = fixed_point_context(false);
    for (double theta : {0.05, 1e-6, 1e-12}) {
        const auto c = ns_certificate(kCat, torus_point(0, 0), 20, 30, theta, 0.00962,
                                      SlowVaryingFn::constant(1.0, 0.00962), ctx);
        EXPECT_TRUE(c.in_ball) << theta;
        EXPECT_EQ(c.z, torus_point(0, 0));
        ASSERT_EQ(c.margins.size(), 51u);
        for (const auto& m : c.margins) EXPECT_EQ(m.distance, 0.0);
    }
}

TEST(GnsCertificate, FixedPointPair) {
    const auto ctx = fixed_point_context(false);
    const std::vector<GnsSegment> segs{{torus_point(0, 0), 10, 10}, {torus_point(0, 0), 5, 8}};
    const auto g = gns_certificate(kCat, segs, 0.05, 0.00962, SlowVaryingFn::constant(1.0, 0.00962), ctx);
    EXPECT_EQ(g.z, torus_point(0, 0));
    for (bool b : g.in_ball) EXPECT_TRUE(b);
    // The gap is the connector plus the return-time overshoots on both sides.
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t k = (i + 1) % 2;
        EXPECT_EQ(g.gaps[i], (g.t_plus[i] - segs[i].n) + g.connectors[i].N + (-g.t_minus[k] - segs[k].m));
    }
    EXPECT_EQ(g.period, 10 + 10 + 5 + 8 + g.gaps[0] + g.gaps[1]);
    EXPECT_TRUE(g.offsets_consistent);
}

// Shared block data on the cat map: 400 samples, delta 0.1, mixing transitions.
class CatMapBlock : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const auto spec = lyapunov_spectrum(kCat, torus_point(0.1, 0.2), 50000, 10);
        const auto params = PesinBlockParams::from_spectrum(spec);
        const auto bs = block_sample(kCat, params, 400, 2);
        points_ = new std::vector<ClassifiedPoint>(bs.points);
        auto cover = build_cover(bs.points, 0.1, 400);
        auto tb = estimate_transitions(kCat, cover, torus_point(0.3183099, 0.2718281), 1000000, true, 1);
        ctx_ = new CoverContext(make_cover_context(std::move(cover), std::move(tb), params.epsilon));
    }
    static void TearDownTestSuite() {
        delete ctx_;
        delete points_;
    }
    static double eta() { return ctx_->epsilon / 10; }
    static SlowVaryingFn q1() { return SlowVaryingFn::constant(1.0, eta()); }

    static inline CoverContext* ctx_ = nullptr;
    static inline std::vector<ClassifiedPoint>* points_ = nullptr;
};

TEST_F(CatMapBlock, GenericCertificate) {
    const Point2 x = (*points_)[17].point;
    const auto c = ns_certificate(kCat, x, 100, 100, 0.05, eta(), q1(), *ctx_);
    EXPECT_TRUE(c.in_ball);
    EXPECT_TRUE(c.chain_holds);
    EXPECT_LE(c.p, 100 + 100 + c.K);
    ASSERT_EQ(c.margins.size(), 201u);
    for (const auto& m : c.margins) {
        EXPECT_LE(m.distance, m.allowance);
        EXPECT_EQ(m.allowance, 0.05); // q = 1 gives the plain dynamical ball
    }
    EXPECT_LE(c.residual, 1e-11);
    EXPECT_EQ(long(c.cycle.size()), c.p);
    EXPECT_DOUBLE_EQ(c.ratio, double(c.K) / 200.0);
}

TEST_F(CatMapBlock, TinyThetaFails) {
    const Point2 x = (*points_)[17].point;
    const auto c = ns_certificate(kCat, x, 100, 100, 1e-14, eta(), q1(), *ctx_);
    EXPECT_FALSE(c.in_ball);
    ASSERT_TRUE(c.first_violation.has_value());
    EXPECT_GE(*c.first_violation, -100);
    EXPECT_LE(*c.first_violation, 100);
}

TEST_F(CatMapBlock, MixingGivesConsecutivePeriods) {
    const Point2 x = (*points_)[5].point;
    long prev = -1;
    for (int d = 0; d < 5; ++d) {
        NsOptions o;
        o.connector_length = ctx_->transitions.M_k + d;
        const auto c = ns_certificate(kCat, x, 100, 100, 0.05, eta(), q1(), *ctx_, o);
        EXPECT_TRUE(c.in_ball);
        EXPECT_GE(c.p, 200 + c.K);
        if (prev >= 0) {
            EXPECT_EQ(c.p, prev + 1);
        }
        prev = c.p;
    }
}

TEST_F(CatMapBlock, Sublinearity) {
    const auto t = sublinearity_scan(kCat, (*points_)[40].point, 0.05, {eta()},
                                     {{100, 100}, {200, 200}, {400, 400}, {800, 800}}, q1(), *ctx_);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_LE(t.rows.back().ratio, t.rows.front().ratio);
    EXPECT_LE(t.rows.back().ratio, 2 * eta() / ctx_->epsilon + 0.15);
    for (const auto& r : t.rows) EXPECT_TRUE(r.margins_ok);
}

TEST_F(CatMapBlock, GnsThreeSegmentsAndTarget) {
    std::vector<GnsSegment> segs;
    for (int i : {3, 150, 300}) segs.push_back({(*points_)[std::size_t(i)].point, 60, 60});
    const auto g = gns_certificate(kCat, segs, 0.05, eta(), q1(), *ctx_);
    for (bool b : g.in_ball) EXPECT_TRUE(b);
    EXPECT_LE(g.total_gap, g.gap_budget);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(g.gaps[i], g.K[i] + g.K[(i + 1) % 3]);
    EXPECT_TRUE(g.offsets_consistent);

    const auto t = gns_certificate(kCat, segs, 0.05, eta(), q1(), *ctx_, g.gap_budget + 7);
    EXPECT_EQ(t.total_gap, g.gap_budget + 7);
    EXPECT_EQ(t.period, 3 * 120 + t.total_gap);
    for (bool b : t.in_ball) EXPECT_TRUE(b);

    EXPECT_THROW(gns_certificate(kCat, segs, 0.05, eta(), q1(), *ctx_, 1), GapInfeasibleError);
}
