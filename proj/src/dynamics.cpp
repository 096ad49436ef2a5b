#include "nuspec/dynamics.hpp"

#include "nuspec/error.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace nuspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Minimum Jacobian determinant accepted for the perturbed cat map, sampled on a grid.
constexpr double kMinPerturbedDet = 0.05;
constexpr int kDetGrid = 64;

double perturbed_det(double kappa, double x, double y) {
    const double c1 = kTwoPi * kappa * std::cos(kTwoPi * x);
    const double c2 = kTwoPi * kappa * std::cos(kTwoPi * y);
    return (2.0 + c1) * (1.0 + c2) - 1.0;
}

Vec2 wrap_half(Vec2 d) {
    auto w = [](double v) {
        v -= std::floor(v + 0.5);
        return v == -0.5 ? 0.5 : v;
    };
    return {w(d.x), w(d.y)};
}

} // namespace

Vec2 normalized(const Vec2& v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegeneracyError("cannot normalize a zero or non-finite vector");
    }
    return {v.x / n, v.y / n};
}

Mat2 Mat2::inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) {
        throw DegeneracyError("singular 2x2 matrix");
    }
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

bool Mat2::finite() const {
    return std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a21) && std::isfinite(a22);
}

double wrap_unit(double v) {
    double w = v - std::floor(v);
    // floor can round v - floor(v) up to exactly 1 for tiny negative v.
    if (w >= 1.0) {
        w = 0.0;
    }
    return w;
}

Point2 canonical(Space space, Vec2 v) {
    if (space == Space::Torus2) {
        return {wrap_unit(v.x), wrap_unit(v.y), Space::Torus2};
    }
    return {v.x, v.y, Space::Plane};
}

Point2 torus_point(double x, double y) { return canonical(Space::Torus2, {x, y}); }
Point2 plane_point(double x, double y) { return {x, y, Space::Plane}; }

Vec2 displacement(const Point2& p, const Point2& q) {
    const Vec2 d{q.x - p.x, q.y - p.y};
    return p.space == Space::Torus2 ? wrap_half(d) : d;
}

double distance(Space space, const Point2& p, const Point2& q) {
    if (space == Space::Torus2) {
        auto w = [](double d) {
            d = std::fabs(d);
            d -= std::floor(d);
            return std::min(d, 1.0 - d);
        };
        return std::hypot(w(q.x - p.x), w(q.y - p.y));
    }
    return std::hypot(q.x - p.x, q.y - p.y);
}

SystemSpec SystemSpec::cat_map() { return {SystemKind::CatMap, 0.0, 0.0}; }

SystemSpec SystemSpec::perturbed_cat_map(double kappa) {
    if (!std::isfinite(kappa)) {
        throw PreconditionError("perturbed cat map amplitude must be finite");
    }
    double worst = perturbed_det(kappa, 0.0, 0.0);
    for (int i = 0; i < kDetGrid; ++i) {
        for (int j = 0; j < kDetGrid; ++j) {
            worst = std::min(worst, perturbed_det(kappa, double(i) / kDetGrid, double(j) / kDetGrid));
        }
    }
    if (worst < kMinPerturbedDet) {
        std::ostringstream os;
        os << "perturbed cat map with kappa=" << kappa
           << " is not safely invertible (min sampled det Df = " << worst << ")";
        throw PreconditionError(os.str());
    }
    return {SystemKind::PerturbedCatMap, kappa, 0.0};
}

SystemSpec SystemSpec::standard_map(double k_s) {
    if (!std::isfinite(k_s)) {
        throw PreconditionError("standard map parameter must be finite");
    }
    return {SystemKind::StandardMap, k_s, 0.0};
}

SystemSpec SystemSpec::henon(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || b == 0.0) {
        throw PreconditionError("Henon map needs finite a and nonzero b");
    }
    return {SystemKind::Henon, a, b};
}

bool SystemSpec::area_preserving() const {
    switch (kind_) {
    case SystemKind::CatMap:
    case SystemKind::StandardMap:
        return true;
    case SystemKind::PerturbedCatMap:
        return p0_ == 0.0;
    case SystemKind::Henon:
        return std::fabs(p1_) == 1.0;
    }
    return false;
}

std::string SystemSpec::name() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case SystemKind::CatMap: os << "cat_map"; break;
    case SystemKind::PerturbedCatMap: os << "perturbed_cat_map(kappa=" << p0_ << ")"; break;
    case SystemKind::StandardMap: os << "standard_map(K=" << p0_ << ")"; break;
    case SystemKind::Henon: os << "henon(a=" << p0_ << ",b=" << p1_ << ")"; break;
    }
    return os.str();
}

Vec2 apply_lift(const SystemSpec& system, const Vec2& p) {
    switch (system.kind()) {
    case SystemKind::CatMap:
        return {2.0 * p.x + p.y, p.x + p.y};
    case SystemKind::PerturbedCatMap: {
        const double k = system.kappa();
        return {2.0 * p.x + p.y + k * std::sin(kTwoPi * p.x), p.x + p.y + k * std::sin(kTwoPi * p.y)};
    }
    case SystemKind::StandardMap: {
        const double mom = p.y + system.k_s() / kTwoPi * std::sin(kTwoPi * p.x);
        return {p.x + mom, mom};
    }
    case SystemKind::Henon:
        return {1.0 - system.henon_a() * p.x * p.x + p.y, system.henon_b() * p.x};
    }
    return p;
}

Point2 apply(const SystemSpec& system, const Point2& p) {
    const Vec2 image = apply_lift(system, p.vec());
    if (!std::isfinite(image.x) || !std::isfinite(image.y)) {
        throw OverflowError("orbit left the finite range under " + system.name());
    }
    return canonical(system.space(), image);
}

Mat2 differential(const SystemSpec& system, const Point2& p) {
    switch (system.kind()) {
    case SystemKind::CatMap:
        return {2.0, 1.0, 1.0, 1.0};
    case SystemKind::PerturbedCatMap: {
        const double c = kTwoPi * system.kappa();
        return {2.0 + c * std::cos(kTwoPi * p.x), 1.0, 1.0, 1.0 + c * std::cos(kTwoPi * p.y)};
    }
    case SystemKind::StandardMap: {
        const double s = system.k_s() * std::cos(kTwoPi * p.x);
        return {1.0 + s, 1.0, s, 1.0};
    }
    case SystemKind::Henon:
        return {-2.0 * system.henon_a() * p.x, 1.0, system.henon_b(), 0.0};
    }
    return Mat2::identity();
}

Point2 apply_inverse(const SystemSpec& system, const Point2& p) {
    switch (system.kind()) {
    case SystemKind::CatMap:
        return torus_point(p.x - p.y, -p.x + 2.0 * p.y);
    case SystemKind::StandardMap: {
        const double x = p.x - p.y;
        const double mom = p.y - system.k_s() / kTwoPi * std::sin(kTwoPi * x);
        return torus_point(x, mom);
    }
    case SystemKind::Henon: {
        const double x = p.y / system.henon_b();
        const double y = p.x - 1.0 + system.henon_a() * x * x;
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw OverflowError("backward orbit left the finite range under " + system.name());
        }
        return plane_point(x, y);
    }
    case SystemKind::PerturbedCatMap: {
        // Newton on f(v) = p starting from the linear inverse.
        Point2 v = torus_point(p.x - p.y, -p.x + 2.0 * p.y);
        for (int it = 0; it < 50; ++it) {
            const Vec2 r = displacement(p, apply(system, v));
            if (norm(r) <= 1e-15) {
                return v;
            }
            const Vec2 step = differential(system, v).inverse() * r;
            v = canonical(Space::Torus2, v.vec() - step);
        }
        if (distance(apply(system, v), p) <= 1e-13) {
            return v;
        }
        throw InversionError("Newton inversion of " + system.name() + " did not converge in 50 iterations");
    }
    }
    return p;
}

Point2 iterate(const SystemSpec& system, Point2 p, long steps) {
    if (steps >= 0) {
        for (long i = 0; i < steps; ++i) {
            p = apply(system, p);
        }
    } else {
        for (long i = 0; i < -steps; ++i) {
            p = apply_inverse(system, p);
        }
    }
    return p;
}

Orbit orbit(const SystemSpec& system, const Point2& x, int m, int n) {
    if (m < 0 || n < 0) {
        throw PreconditionError("orbit window bounds must be nonnegative");
    }
    std::vector<Point2> pts(static_cast<std::size_t>(m + n + 1));
    pts[static_cast<std::size_t>(m)] = x;
    for (int k = 1; k <= n; ++k) {
        pts[static_cast<std::size_t>(m + k)] = apply(system, pts[static_cast<std::size_t>(m + k - 1)]);
    }
    for (int k = 1; k <= m; ++k) {
        pts[static_cast<std::size_t>(m - k)] = apply_inverse(system, pts[static_cast<std::size_t>(m - k + 1)]);
    }
    return Orbit(m, std::move(pts));
}

OrbitSegment OrbitSegment::from_orbit(const Orbit& orb, int from, int to) {
    if (to < from || from < -orb.back() || to > orb.forward()) {
        throw PreconditionError("segment bounds outside the stored orbit window");
    }
    OrbitSegment seg;
    seg.base = orb.at(from);
    seg.length = to - from;
    seg.points.reserve(static_cast<std::size_t>(seg.length + 1));
    for (int k = from; k <= to; ++k) {
        seg.points.push_back(orb.at(k));
    }
    return seg;
}

OrbitSegment OrbitSegment::iterate(const SystemSpec& system, const Point2& base, int length) {
    OrbitSegment seg;
    seg.base = base;
    seg.length = length;
    seg.points.reserve(static_cast<std::size_t>(length + 1));
    seg.points.push_back(base);
    for (int j = 0; j < length; ++j) {
        seg.points.push_back(apply(system, seg.points.back()));
    }
    return seg;
}

Point2 settle(const SystemSpec& system, Point2 p, int transient) {
    return iterate(system, p, transient);
}

} // namespace nuspec
