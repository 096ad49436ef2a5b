#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace nuspec {

enum class Space { Torus2, Plane };

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
Vec2 normalized(const Vec2& v);

struct Mat2 {
    double a11 = 1.0, a12 = 0.0;
    double a21 = 0.0, a22 = 1.0;

    static Mat2 identity() { return {}; }
    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    Mat2 inverse() const;
    bool finite() const;
};

inline Vec2 operator*(const Mat2& m, const Vec2& v) {
    return {m.a11 * v.x + m.a12 * v.y, m.a21 * v.x + m.a22 * v.y};
}
inline Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

// Phase-space point. Torus2 coordinates are kept canonical in [0,1).
struct Point2 {
    double x = 0.0;
    double y = 0.0;
    Space space = Space::Torus2;

    Vec2 vec() const { return {x, y}; }
    bool operator==(const Point2&) const = default;
};

double wrap_unit(double v);
Point2 canonical(Space space, Vec2 v);
Point2 torus_point(double x, double y);
Point2 plane_point(double x, double y);

// Shortest displacement from p to q; on the torus each component lies in (-1/2, 1/2].
Vec2 displacement(const Point2& p, const Point2& q);
double distance(Space space, const Point2& p, const Point2& q);
inline double distance(const Point2& p, const Point2& q) { return distance(p.space, p, q); }

enum class SystemKind { CatMap, PerturbedCatMap, StandardMap, Henon };

// One of the concrete diffeomorphisms the laboratory works with.
//  CatMap           v -> A v mod 1, A = [[2,1],[1,1]]
//  PerturbedCatMap  v -> A v + kappa (sin 2 pi x, sin 2 pi y) mod 1
//  StandardMap      p' = p + K/(2 pi) sin 2 pi x, x' = x + p'  (both mod 1)
//  Henon            (x, y) -> (1 - a x^2 + y, b x)
class SystemSpec {
public:
    static SystemSpec cat_map();
    static SystemSpec perturbed_cat_map(double kappa);
    static SystemSpec standard_map(double k_s);
    static SystemSpec henon(double a, double b);

    SystemKind kind() const { return kind_; }
    Space space() const { return kind_ == SystemKind::Henon ? Space::Plane : Space::Torus2; }
    double kappa() const { return p0_; }
    double k_s() const { return p0_; }
    double henon_a() const { return p0_; }
    double henon_b() const { return p1_; }

    bool area_preserving() const;
    std::string name() const;

    bool operator==(const SystemSpec&) const = default;

private:
    SystemSpec(SystemKind kind, double p0, double p1) : kind_(kind), p0_(p0), p1_(p1) {}
    SystemKind kind_;
    double p0_;
    double p1_;
};

Point2 apply(const SystemSpec& system, const Point2& p);
Point2 apply_inverse(const SystemSpec& system, const Point2& p);

// Image of p under the lift of the map to R^2 (no reduction mod 1). For plane
// systems this is apply(). Used to follow curves across the torus seam.
Vec2 apply_lift(const SystemSpec& system, const Vec2& p);

Mat2 differential(const SystemSpec& system, const Point2& p);

Point2 iterate(const SystemSpec& system, Point2 p, long steps);

// Orbit points f^k(x) for k = -back .. forward.
class Orbit {
public:
    Orbit() = default;
    Orbit(int back, std::vector<Point2> points) : back_(back), points_(std::move(points)) {}

    int back() const { return back_; }
    int forward() const { return static_cast<int>(points_.size()) - 1 - back_; }
    const Point2& at(int k) const { return points_[static_cast<std::size_t>(k + back_)]; }
    const std::vector<Point2>& points() const { return points_; }

private:
    int back_ = 0;
    std::vector<Point2> points_;
};

Orbit orbit(const SystemSpec& system, const Point2& x, int m, int n);

// An orbit segment {x, n}: points[j] = f^j(x) for j = 0..n.
struct OrbitSegment {
    Point2 base;
    int length = 0;
    std::vector<Point2> points;

    static OrbitSegment from_orbit(const Orbit& orbit, int from, int to);
    static OrbitSegment iterate(const SystemSpec& system, const Point2& base, int length);
};

// Discards a transient so that the returned point sits on the attractor.
Point2 settle(const SystemSpec& system, Point2 p, int transient = 1000);

} // namespace nuspec
