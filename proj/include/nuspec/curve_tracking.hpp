#pragma once

#include "nuspec/dynamics.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace nuspec {

// Follows the forward images of straight segments ("rows") of initial points.
// Each row is kept as a polyline of true image points, refined by bisection
// in the row parameter whenever a chord gets long or bends, so that a chord
// passing close to a target can be confirmed by an actual orbit point.
class CurveTracker {
public:
    struct Row {
        Vec2 origin;                 // lifted starting point
        Vec2 direction;              // unit vector
        std::vector<double> params;  // initial vertex parameters, ascending
    };

    struct Hit {
        int step = 0;
        Point2 start;  // initial point whose image hit the target
        Point2 image;  // f^step(start)
        double distance = 0.0;
    };

    struct Options {
        double max_chord = 0.2;            // chord length cap (torus units)
        std::size_t max_vertices = 4'000'000;
    };

    CurveTracker(const SystemSpec& system, std::vector<Row> rows, Options options);
    CurveTracker(const SystemSpec& system, std::vector<Row> rows);

    // Advances until some tracked point lies strictly within `radius` of `target`
    // at a step in [min_step, max_step]. Returns nothing if max_step is reached
    // or the vertex budget runs out (see budget_exhausted()).
    std::optional<Hit> first_hit(const Point2& target, double radius, int min_step, int max_step);

    int step() const { return step_; }
    std::size_t vertex_count() const;
    bool budget_exhausted() const { return exhausted_; }

private:
    struct Vertex {
        double s;
        Point2 p;
        Vec2 d; // lifted displacement to the next vertex of the row
    };
    struct Polyline {
        Row row;
        std::vector<Vertex> v;
    };

    Point2 true_point(const Polyline& line, double s) const;
    void advance();
    void refine(Polyline& line, double resolution);
    std::optional<Hit> check(const Polyline& line, const Point2& target, double radius) const;
    std::optional<Hit> confirm(const Polyline& line, double sa, const Point2& pa, double sb, const Vec2& d,
                               const Point2& target, double radius, int depth) const;

    const SystemSpec& system_;
    Options options_;
    std::vector<Polyline> lines_;
    int step_ = 0;
    bool exhausted_ = false;
    double resolution_ = 0.0;
};

// Closest approach of `target` to the chord from p to p + d; t in [0,1] is the
// chord fraction of the closest point.
double chord_distance(Space space, const Point2& p, const Vec2& d, const Point2& target, double* t = nullptr);

} // namespace nuspec
