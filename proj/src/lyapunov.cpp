#include "nuspec/lyapunov.hpp"

#include "nuspec/error.hpp"
#include "nuspec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nuspec {

namespace {

// Arbitrary direction with no special relation to any of the maps' eigenvectors.
const Vec2 kGenericVector{0.8137976813493738, 0.5811755836443478};

// Extra iterates used to converge the seed directions at the ends of a window.
constexpr int kSeedIterates = 60;

Vec2 push_forward(const Mat2& df, const Vec2& v, double* log_growth = nullptr) {
    const Vec2 w = df * v;
    const double n = norm(w);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegeneracyError("tangent vector vanished or overflowed");
    }
    if (log_growth != nullptr) {
        *log_growth = std::log(n);
    }
    return {w.x / n, w.y / n};
}

} // namespace

LyapunovSpectrum LyapunovSpectrum::from_exponents(std::vector<double> exps, long horizon) {
    std::sort(exps.begin(), exps.end());
    LyapunovSpectrum s;
    s.exponents = exps;
    s.horizon = horizon;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.lambda_s = s.Lambda_s = s.lambda_u = s.Lambda_u = nan;
    for (double e : exps) {
        if (e < 0.0) {
            s.Lambda_s = std::isnan(s.Lambda_s) ? e : std::min(s.Lambda_s, e);
            s.lambda_s = std::isnan(s.lambda_s) ? e : std::max(s.lambda_s, e);
        } else if (e > 0.0) {
            s.lambda_u = std::isnan(s.lambda_u) ? e : std::min(s.lambda_u, e);
            s.Lambda_u = std::isnan(s.Lambda_u) ? e : std::max(s.Lambda_u, e);
        }
    }
    s.hyperbolic = !std::isnan(s.lambda_s) && !std::isnan(s.lambda_u);
    return s;
}

LyapunovSpectrum lyapunov_spectrum(const SystemSpec& system, const Point2& x0, long N, int qr_period) {
    if (qr_period < 1 || N < 10L * qr_period) {
        throw PreconditionError("lyapunov_spectrum needs qr_period >= 1 and N >= 10 * qr_period");
    }
    // Q is kept as a rotation [q1, rot90(q1)], so r22 follows from the determinant
    // instead of a cancellation-prone projection.
    Vec2 q1{1.0, 0.0};
    double sum1 = 0.0;
    double sum2 = 0.0;
    double sum_det = 0.0;
    Point2 p = x0;
    long done = 0;
    while (done < N) {
        const long block = std::min<long>(qr_period, N - done);
        Mat2 prod = Mat2::identity();
        double log_det = 0.0;
        for (long j = 0; j < block; ++j) {
            const Mat2 df = differential(system, p);
            prod = df * prod;
            log_det += std::log(std::fabs(df.det()));
            p = apply(system, p);
        }
        const Vec2 b1 = prod * q1;
        const double r11 = norm(b1);
        if (!(r11 > 0.0) || !std::isfinite(r11) || !std::isfinite(log_det)) {
            throw DegeneracyError("degenerate QR step in Lyapunov accumulation");
        }
        q1 = {b1.x / r11, b1.y / r11};
        const double log_r11 = std::log(r11);
        sum1 += log_r11;
        sum2 += log_det - log_r11;
        sum_det += log_det;
        done += block;
    }
    auto spec = LyapunovSpectrum::from_exponents({sum1 / double(N), sum2 / double(N)}, N);
    spec.mean_log_det = sum_det / double(N);
    return spec;
}

Vec2 line_direction(Vec2 v) {
    v = normalized(v);
    if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) {
        v = -1.0 * v;
    }
    return v;
}

double line_angle(const Vec2& a, const Vec2& b) {
    const double c = std::fabs(cross(a, b));
    const double d = std::fabs(dot(a, b));
    return std::atan2(c, d);
}

SplittingEstimate oseledec_directions(const SystemSpec& system, const Point2& x, int N) {
    if (N < 50) {
        throw PreconditionError("oseledec_directions needs N >= 50");
    }
    SplittingEstimate est;
    est.at = x;

    // Unstable: push a generic vector forward along the backward orbit ending at x.
    const Orbit back = orbit(system, x, N, 0);
    Vec2 v = kGenericVector;
    for (int k = -N; k < 0; ++k) {
        v = push_forward(differential(system, back.at(k)), v);
    }
    est.Eu = line_direction(v);

    // Stable: pull a generic vector back along the forward orbit starting at x.
    const Orbit fwd = orbit(system, x, 0, N);
    v = kGenericVector;
    for (int k = N; k > 0; --k) {
        v = push_forward(differential(system, fwd.at(k - 1)).inverse(), v);
    }
    est.Es = line_direction(v);
    est.angle = line_angle(est.Eu, est.Es);
    if (!(est.angle > 0.0)) {
        throw DegeneracyError("estimated stable and unstable directions coincide");
    }
    return est;
}

void PesinBlockParams::validate() const {
    if (!(lambda > 0.0) || !(mu > 0.0)) {
        throw PreconditionError("Pesin block parameters need lambda > 0 and mu > 0");
    }
    if (!(epsilon > 0.0) || !(epsilon < std::min(lambda, mu) / 4.0)) {
        throw PreconditionError("Pesin block parameters need 0 < epsilon < min(lambda, mu)/4");
    }
    if (n_fwd < 1 || n_bwd < 1 || m_range < 0) {
        throw PreconditionError("Pesin block windows must be positive");
    }
}

PesinBlockParams PesinBlockParams::from_spectrum(const LyapunovSpectrum& spectrum, double ratio) {
    if (!spectrum.hyperbolic) {
        throw PreconditionError("Pesin block parameters need a hyperbolic spectrum");
    }
    PesinBlockParams p;
    p.lambda = std::fabs(spectrum.lambda_s);
    p.mu = spectrum.lambda_u;
    p.epsilon = std::min(p.lambda, p.mu) / ratio;
    return p;
}

double BlockRequirement::worst() const {
    if (std::isnan(contraction) || std::isnan(expansion) || std::isnan(angle)) {
        return std::numeric_limits<double>::infinity();
    }
    return std::max({contraction, expansion, angle});
}

BlockRequirement pesin_block_requirement(const SystemSpec& system, const Point2& x,
                                         const PesinBlockParams& params, const SplittingEstimate& splitting) {
    params.validate();
    const int M = params.m_range;
    const int lo = -(M + params.n_bwd);
    const int hi = M + params.n_fwd;
    const Orbit orb = orbit(system, x, -lo + kSeedIterates, hi + kSeedIterates);
    const int len = hi - lo + 1;
    auto idx = [lo](int k) { return static_cast<std::size_t>(k - lo); };

    // Unstable field, transported forward only: seeded at the left end for k < 0,
    // and from the supplied estimate for k >= 0.
    std::vector<Vec2> eu(static_cast<std::size_t>(len));
    Vec2 v = kGenericVector;
    for (int k = lo - kSeedIterates; k < lo; ++k) {
        v = push_forward(differential(system, orb.at(k)), v);
    }
    eu[idx(lo)] = v;
    std::vector<double> growth_u(static_cast<std::size_t>(len), 0.0);
    std::vector<double> log_det(static_cast<std::size_t>(len), 0.0);
    for (int k = lo; k < hi; ++k) {
        const Mat2 df = differential(system, orb.at(k));
        double g = 0.0;
        Vec2 next = push_forward(df, eu[idx(k)], &g);
        if (k + 1 == 0) {
            next = splitting.Eu;
        }
        eu[idx(k + 1)] = next;
        growth_u[idx(k + 1)] = growth_u[idx(k)] + g;
        log_det[idx(k + 1)] = log_det[idx(k)] + std::log(std::fabs(df.det()));
    }

    // Stable field, transported backward only.
    std::vector<Vec2> es(static_cast<std::size_t>(len));
    v = kGenericVector;
    for (int k = hi + kSeedIterates; k > hi; --k) {
        v = push_forward(differential(system, orb.at(k - 1)).inverse(), v);
    }
    es[idx(hi)] = v;
    for (int k = hi; k > -M; --k) {
        Vec2 prev = push_forward(differential(system, orb.at(k - 1)).inverse(), es[idx(k)]);
        if (k - 1 == 0) {
            prev = splitting.Es;
        }
        es[idx(k - 1)] = prev;
    }

    auto log_sin = [&](int k) { return std::log(std::fabs(cross(es[idx(k)], eu[idx(k)]))); };

    const double eps = params.epsilon;
    BlockRequirement req;
    req.contraction = req.expansion = req.angle = -std::numeric_limits<double>::infinity();
    for (int m = -M; m <= M; ++m) {
        const double am = std::abs(m);
        // (a) |Df^n on E^s(f^m x)| via det Df^n * sin(angle before) / (|Df^n on E^u| * sin(angle after)).
        for (int n = 1; n <= params.n_fwd; ++n) {
            const double log_norm = (log_det[idx(m + n)] - log_det[idx(m)]) + log_sin(m) - log_sin(m + n) -
                                    (growth_u[idx(m + n)] - growth_u[idx(m)]);
            req.contraction =
                std::max(req.contraction, (log_norm + (params.lambda - eps) * n - eps * am) / eps);
        }
        // (b) |Df^-n on E^u(f^m x)| = 1 / |Df^n on E^u(f^{m-n} x)|.
        for (int n = 1; n <= params.n_bwd; ++n) {
            const double log_norm = -(growth_u[idx(m)] - growth_u[idx(m - n)]);
            req.expansion = std::max(req.expansion, (log_norm + (params.mu - eps) * n - eps * am) / eps);
        }
        // (c) tan(angle) >= e^{-eps k} e^{-eps |m|}.
        const double c = std::fabs(cross(es[idx(m)], eu[idx(m)]));
        const double d = std::fabs(dot(es[idx(m)], eu[idx(m)]));
        const double log_tan = std::log(c) - std::log(d);
        req.angle = std::max(req.angle, (-log_tan - eps * am) / eps);
    }
    return req;
}

bool satisfies_block(const SystemSpec& system, const Point2& x, const PesinBlockParams& params,
                     const SplittingEstimate& splitting, int k) {
    return pesin_block_requirement(system, x, params, splitting).worst() <= double(k) + 1e-9;
}

BlockIndex pesin_block_index(const SystemSpec& system, const Point2& x, const PesinBlockParams& params,
                             const SplittingEstimate& splitting) {
    const double worst = pesin_block_requirement(system, x, params, splitting).worst();
    if (!std::isfinite(worst) && worst > 0.0) {
        return {};
    }
    const double k = std::max(1.0, std::ceil(worst - 1e-9));
    if (k > kMaxBlockIndex) {
        return {};
    }
    return {static_cast<int>(k)};
}

BlockIndex pesin_block_index(const SystemSpec& system, const Point2& x, const PesinBlockParams& params) {
    return pesin_block_index(system, x, params, oseledec_directions(system, x, 60));
}

double BlockSample::fraction_at_most(int k) const {
    if (points.empty()) {
        return 0.0;
    }
    const auto hits = std::count_if(points.begin(), points.end(),
                                    [k](const ClassifiedPoint& c) { return c.index.k && *c.index.k <= k; });
    return double(hits) / double(points.size());
}

Point2 random_start(const SystemSpec& system, std::uint64_t seed) {
    Rng rng(seed);
    if (system.space() == Space::Torus2) {
        return torus_point(rng.uniform(), rng.uniform());
    }
    const Point2 p = plane_point(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    return settle(system, p, 1000);
}

BlockSample block_sample(const SystemSpec& system, const PesinBlockParams& params, int sample_size,
                         std::uint64_t seed) {
    if (sample_size < 1) {
        throw PreconditionError("block_sample needs sample_size >= 1");
    }
    params.validate();
    BlockSample out;
    Point2 p = random_start(system, seed);
    int finite = 0;
    for (int i = 0; i < sample_size; ++i) {
        p = iterate(system, p, kBlockSampleSpacing);
        const BlockIndex idx = pesin_block_index(system, p, params);
        finite += idx.finite() ? 1 : 0;
        out.points.push_back({p, idx});
    }
    out.finite_fraction = double(finite) / double(sample_size);
    return out;
}

} // namespace nuspec
