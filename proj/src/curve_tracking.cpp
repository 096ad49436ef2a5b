#include "nuspec/curve_tracking.hpp"

#include "nuspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nuspec {

namespace {

constexpr int kMaxConfirmDepth = 48;
constexpr int kMaxRefinePasses = 30;

Vec2 lifted_offset(Space space, const Point2& from, const Vec2& guess, const Point2& actual) {
    if (space == Space::Plane) {
        return actual.vec() - from.vec();
    }
    const Point2 predicted = canonical(space, from.vec() + guess);
    return guess + displacement(predicted, actual);
}

} // namespace

double chord_distance(Space space, const Point2& p, const Vec2& d, const Point2& target, double* t_out) {
    const double dd = dot(d, d);
    auto closest = [&](const Vec2& c, double* t) {
        double t_star = dd > 0.0 ? std::clamp(dot(c, d) / dd, 0.0, 1.0) : 0.0;
        *t = t_star;
        return norm(c - t_star * d);
    };
    double best = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    if (space == Space::Plane) {
        best = closest(target.vec() - p.vec(), &best_t);
    } else {
        const Vec2 w = displacement(p, target);
        for (int i = -1; i <= 1; ++i) {
            for (int j = -1; j <= 1; ++j) {
                double t = 0.0;
                const double dist = closest(w + Vec2{double(i), double(j)}, &t);
                if (dist < best) {
                    best = dist;
                    best_t = t;
                }
            }
        }
    }
    if (t_out != nullptr) {
        *t_out = best_t;
    }
    return best;
}

CurveTracker::CurveTracker(const SystemSpec& system, std::vector<Row> rows)
    : CurveTracker(system, std::move(rows), Options{}) {}

CurveTracker::CurveTracker(const SystemSpec& system, std::vector<Row> rows, Options options)
    : system_(system), options_(options) {
    for (auto& row : rows) {
        if (row.params.empty()) {
            throw PreconditionError("curve tracker rows need at least one vertex");
        }
        std::sort(row.params.begin(), row.params.end());
        Polyline line;
        line.row = row;
        for (double s : row.params) {
            line.v.push_back({s, canonical(system.space(), row.origin + s * row.direction), {}});
        }
        for (std::size_t i = 0; i + 1 < line.v.size(); ++i) {
            line.v[i].d = (line.v[i + 1].s - line.v[i].s) * row.direction;
        }
        lines_.push_back(std::move(line));
    }
}

std::size_t CurveTracker::vertex_count() const {
    std::size_t n = 0;
    for (const auto& line : lines_) {
        n += line.v.size();
    }
    return n;
}

Point2 CurveTracker::true_point(const Polyline& line, double s) const {
    const Point2 start = canonical(system_.space(), line.row.origin + s * line.row.direction);
    return iterate(system_, start, step_);
}

void CurveTracker::advance() {
    for (auto& line : lines_) {
        for (std::size_t i = 0; i < line.v.size(); ++i) {
            Vertex& v = line.v[i];
            if (i + 1 < line.v.size()) {
                const Vec2 base = v.p.vec();
                v.d = apply_lift(system_, base + v.d) - apply_lift(system_, base);
            }
            v.p = apply(system_, v.p);
        }
    }
    ++step_;
}

void CurveTracker::refine(Polyline& line, double resolution) {
    const double min_chord = resolution / 16.0;
    const Space space = system_.space();
    for (int pass = 0; pass < kMaxRefinePasses; ++pass) {
        const std::size_t n = line.v.size();
        if (n < 2) {
            return;
        }
        std::vector<char> split(n - 1, 0);
        bool any = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double len = norm(line.v[i].d);
            if (len > options_.max_chord) {
                split[i] = 1;
            }
        }
        // Bending: estimated sagitta of an edge from the turning angle at its ends.
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const Vec2& a = line.v[i - 1].d;
            const Vec2& b = line.v[i].d;
            const double la = norm(a);
            const double lb = norm(b);
            if (la == 0.0 || lb == 0.0) {
                continue;
            }
            const double turn = std::atan2(std::fabs(cross(a, b)), dot(a, b));
            if (la * turn / 4.0 > resolution / 4.0 && la > min_chord) {
                split[i - 1] = 1;
            }
            if (lb * turn / 4.0 > resolution / 4.0 && lb > min_chord) {
                split[i] = 1;
            }
        }
        for (char c : split) {
            any = any || c != 0;
        }
        if (!any) {
            return;
        }
        std::vector<Vertex> out;
        out.reserve(n + n / 2);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(line.v[i]);
            if (i + 1 < n && split[i]) {
                const Vertex& a = line.v[i];
                const double s_mid = 0.5 * (a.s + line.v[i + 1].s);
                const Point2 q = true_point(line, s_mid);
                const Vec2 off = lifted_offset(space, a.p, 0.5 * a.d, q);
                out.back().d = off;
                out.push_back({s_mid, q, a.d - off});
            }
        }
        line.v = std::move(out);
        if (vertex_count() > options_.max_vertices) {
            exhausted_ = true;
            return;
        }
    }
}

std::optional<CurveTracker::Hit> CurveTracker::confirm(const Polyline& line, double sa, const Point2& pa,
                                                       double sb, const Vec2& d, const Point2& target,
                                                       double radius, int depth) const {
    const Space space = system_.space();
    double t = 0.0;
    chord_distance(space, pa, d, target, &t);
    const double t_split = (t > 0.02 && t < 0.98) ? t : 0.5;
    const double s_split = sa + t_split * (sb - sa);
    const Point2 q = true_point(line, s_split);
    const double dist = distance(q, target);
    if (dist < radius) {
        return Hit{step_, canonical(space, line.row.origin + s_split * line.row.direction), q, dist};
    }
    if (depth >= kMaxConfirmDepth || norm(d) < radius / 16.0) {
        return std::nullopt;
    }
    const Vec2 off = lifted_offset(space, pa, t_split * d, q);
    const Vec2 rest = d - off;
    const double da = chord_distance(space, pa, off, target);
    const double db = chord_distance(space, q, rest, target);
    const double gate = 1.5 * radius;
    if (da <= db) {
        if (da < gate) {
            if (auto h = confirm(line, sa, pa, s_split, off, target, radius, depth + 1)) return h;
        }
        if (db < gate) {
            return confirm(line, s_split, q, sb, rest, target, radius, depth + 1);
        }
    } else {
        if (db < gate) {
            if (auto h = confirm(line, s_split, q, sb, rest, target, radius, depth + 1)) return h;
        }
        if (da < gate) {
            return confirm(line, sa, pa, s_split, off, target, radius, depth + 1);
        }
    }
    return std::nullopt;
}

std::optional<CurveTracker::Hit> CurveTracker::check(const Polyline& line, const Point2& target,
                                                     double radius) const {
    const Space space = system_.space();
    std::optional<Hit> best;
    for (std::size_t i = 0; i < line.v.size(); ++i) {
        const Vertex& v = line.v[i];
        const double dist = distance(v.p, target);
        if (dist < radius) {
            return Hit{step_, canonical(space, line.row.origin + v.s * line.row.direction), v.p, dist};
        }
    }
    for (std::size_t i = 0; i + 1 < line.v.size(); ++i) {
        const Vertex& v = line.v[i];
        if (chord_distance(space, v.p, v.d, target) < 1.5 * radius) {
            if (auto h = confirm(line, v.s, v.p, line.v[i + 1].s, v.d, target, radius, 0)) {
                return h;
            }
        }
    }
    return best;
}

std::optional<CurveTracker::Hit> CurveTracker::first_hit(const Point2& target, double radius, int min_step,
                                                         int max_step) {
    resolution_ = radius;
    for (auto& line : lines_) {
        refine(line, resolution_);
    }
    if (step_ >= min_step && step_ > 0) {
        for (const auto& line : lines_) {
            if (auto h = check(line, target, radius)) return h;
        }
    }
    while (step_ < max_step && !exhausted_) {
        advance();
        for (auto& line : lines_) {
            refine(line, resolution_);
            if (exhausted_) {
                return std::nullopt;
            }
        }
        if (step_ < min_step) {
            continue;
        }
        for (const auto& line : lines_) {
            if (auto h = check(line, target, radius)) return h;
        }
    }
    return std::nullopt;
}

} // namespace nuspec
