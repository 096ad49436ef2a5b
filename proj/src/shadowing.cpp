#include "nuspec/shadowing.hpp"

#include "nuspec/curve_tracking.hpp"
#include "nuspec/error.hpp"
#include "nuspec/lyapunov.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace nuspec {

namespace {

constexpr double kMaxLogScale = 600.0;
constexpr int kMaxHalvings = 12;

// Residual blocks F_j = f(z_j) - z_{j+1}, wrapped on the torus.
std::vector<Vec2> cyclic_residual(const SystemSpec& system, const std::vector<Point2>& z) {
    const std::size_t p = z.size();
    std::vector<Vec2> F(p);
    for (std::size_t j = 0; j < p; ++j) {
        F[j] = displacement(z[(j + 1) % p], apply(system, z[j]));
    }
    return F;
}

double max_norm(const std::vector<Vec2>& F) {
    double m = 0.0;
    for (const auto& v : F) m = std::max(m, norm(v));
    return m;
}

double sum_sq(const std::vector<Vec2>& F) {
    double s = 0.0;
    for (const auto& v : F) s += dot(v, v);
    return s;
}

} // namespace

long PseudoOrbit::total_length() const {
    long p = 0;
    for (const auto& s : segments) p += s.length;
    return p;
}

AssembledPseudoOrbit assemble(std::vector<OrbitSegment> segments, bool periodic) {
    if (segments.empty()) {
        throw PreconditionError("a pseudo-orbit needs at least one segment");
    }
    AssembledPseudoOrbit out;
    out.orbit.periodic = periodic;
    long c = 0;
    for (const auto& s : segments) {
        if (s.length < 1 || s.points.size() != std::size_t(s.length) + 1) {
            throw PreconditionError("pseudo-orbit segments need length >= 1 and length + 1 stored points");
        }
        out.times.c.push_back(c);
        c += s.length;
    }
    const std::size_t k = segments.size();
    const std::size_t junctions = periodic ? k : k - 1;
    for (std::size_t i = 0; i < junctions; ++i) {
        const double g = distance(segments[i].points.back(), segments[(i + 1) % k].points.front());
        out.orbit.gaps.push_back(g);
        out.orbit.delta = std::max(out.orbit.delta, g);
    }
    out.orbit.segments = std::move(segments);
    return out;
}

std::optional<double> cycle_degeneracy(const SystemSpec& system, const std::vector<Point2>& points) {
    Mat2 M = Mat2::identity();
    double log_scale = 0.0;
    double log_det = 0.0;
    int det_sign = 1;
    for (const auto& z : points) {
        const Mat2 df = differential(system, z);
        const double d = df.det();
        if (d == 0.0) return std::nullopt;
        det_sign *= d < 0.0 ? -1 : 1;
        log_det += std::log(std::fabs(d));
        M = df * M;
        const double s = std::max({std::fabs(M.a11), std::fabs(M.a12), std::fabs(M.a21), std::fabs(M.a22)});
        M = Mat2{M.a11 / s, M.a12 / s, M.a21 / s, M.a22 / s};
        log_scale += std::log(s);
    }
    if (log_scale > kMaxLogScale || std::fabs(log_det) > kMaxLogScale) {
        return std::nullopt;
    }
    const double scale = std::exp(log_scale);
    const double det = det_sign * std::exp(log_det);
    return std::fabs(det - scale * M.trace() + 1.0);
}

PeriodicOrbitSolution newton_refine_periodic(const SystemSpec& system, const PseudoOrbit& po, double tol,
                                             int max_iter) {
    if (!po.periodic) {
        throw PreconditionError("newton_refine_periodic needs a periodic pseudo-orbit");
    }
    const long p = po.total_length();
    if (p < 1) {
        throw PreconditionError("periodic pseudo-orbit must have positive total length");
    }
    PeriodicOrbitSolution sol;
    sol.period = p;
    auto& z = sol.points;
    z.reserve(std::size_t(p));
    for (const auto& s : po.segments) {
        z.insert(z.end(), s.points.begin(), s.points.end() - 1);
    }

    const Eigen::Index n = 2 * p;
    std::vector<Vec2> F = cyclic_residual(system, z);
    for (int iter = 0;; ++iter) {
        sol.residual = max_norm(F);
        sol.residual_history.push_back(sol.residual);
        sol.newton_iters = iter;
        if (sol.residual <= tol) {
            return sol;
        }
        if (iter == max_iter) {
            throw ConvergenceError("Newton refinement did not reach tolerance", sol.residual);
        }
        if (auto deg = cycle_degeneracy(system, z); deg && *deg < kDegeneracyThreshold) {
            throw DegeneracyError("cyclic linearization is singular: |det(Df^p - I)| below threshold");
        }

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(std::size_t(6 * p));
        Eigen::VectorXd rhs(n);
        for (long j = 0; j < p; ++j) {
            const Mat2 df = differential(system, z[std::size_t(j)]);
            const long r = 2 * j;
            const long c = 2 * ((j + 1) % p);
            trip.emplace_back(r, r, df.a11);
            trip.emplace_back(r, r + 1, df.a12);
            trip.emplace_back(r + 1, r, df.a21);
            trip.emplace_back(r + 1, r + 1, df.a22);
            trip.emplace_back(r, c, -1.0);
            trip.emplace_back(r + 1, c + 1, -1.0);
            rhs(r) = -F[std::size_t(j)].x;
            rhs(r + 1) = -F[std::size_t(j)].y;
        }
        Eigen::SparseMatrix<double> J(n, n);
        J.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(J);
        lu.factorize(J);
        if (lu.info() != Eigen::Success) {
            throw DegeneracyError("cyclic linearization could not be factorized");
        }
        const Eigen::VectorXd step = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !step.allFinite()) {
            throw DegeneracyError("cyclic linear solve failed");
        }

        // Full step first; halve while the residual does not decrease.
        const double before = sum_sq(F);
        double t = 1.0;
        std::vector<Point2> trial(z.size());
        std::vector<Vec2> Ft;
        for (int h = 0;; ++h) {
            for (long j = 0; j < p; ++j) {
                const Vec2 d{step(2 * j), step(2 * j + 1)};
                trial[std::size_t(j)] = canonical(system.space(), z[std::size_t(j)].vec() + t * d);
            }
            Ft = cyclic_residual(system, trial);
            if (sum_sq(Ft) < before || h == kMaxHalvings) break;
            t *= 0.5;
        }
        z.swap(trial);
        F.swap(Ft);
    }
}

double cycle_defect(const SystemSpec& system, const PeriodicOrbitSolution& sol, int stride) {
    if (stride < 1) {
        throw PreconditionError("cycle_defect needs stride >= 1");
    }
    const long p = sol.period;
    double worst = 0.0;
    for (long j = 0; j < p; j += stride) {
        const long w = std::min<long>(stride, p - j);
        const Point2 img = iterate(system, sol.points[std::size_t(j)], w);
        worst = std::max(worst, distance(img, sol.points[std::size_t((j + w) % p)]));
    }
    return worst;
}

ShadowingProfile shadowing_profile(const PeriodicOrbitSolution& sol, const AssembledPseudoOrbit& po, double tau,
                                   double epsilon) {
    if (sol.period != po.orbit.total_length()) {
        throw PreconditionError("solution period differs from the pseudo-orbit length");
    }
    ShadowingProfile prof;
    prof.tau = tau;
    prof.epsilon = epsilon;
    prof.pass = true;
    const long p = sol.period;
    for (std::size_t i = 0; i < po.orbit.segments.size(); ++i) {
        const auto& seg = po.orbit.segments[i];
        const long c = po.times.c[i];
        for (int j = 0; j <= seg.length; ++j) {
            ProfileEntry e;
            e.segment = int(i);
            e.j = j;
            e.distance = distance(sol.points[std::size_t((c + j) % p)], seg.points[std::size_t(j)]);
            e.bound = tau * std::exp(-double(std::min(j, seg.length - j)) * epsilon);
            prof.max_distance = std::max(prof.max_distance, e.distance);
            if (!(e.distance < e.bound)) {
                if (prof.pass) prof.first_violation = e;
                prof.pass = false;
            }
            prof.entries.push_back(e);
        }
    }
    return prof;
}

DominationResult check_domination(const SystemSpec& system, const std::vector<Point2>& orbit_points,
                                  const std::vector<Vec2>& E_field, const std::vector<Vec2>& F_field, int S0,
                                  double lambda, const std::vector<int>& S_list) {
    if (E_field.size() != orbit_points.size() || F_field.size() != orbit_points.size()) {
        throw PreconditionError("direction fields must match the orbit length");
    }
    for (int S : S_list) {
        if (S < S0 || S < 1) {
            throw PreconditionError("every S must be at least S0 and positive");
        }
    }
    // One-step log growth of each field.
    const std::size_t L = orbit_points.size();
    std::vector<double> gE(L), gF(L);
    for (std::size_t i = 0; i < L; ++i) {
        const Mat2 df = differential(system, orbit_points[i]);
        gE[i] = std::log(norm(df * normalized(E_field[i])));
        gF[i] = std::log(norm(df * normalized(F_field[i])));
    }
    DominationResult res;
    res.pass = true;
    for (int S : S_list) {
        if (std::size_t(S) >= L) {
            throw PreconditionError("orbit too short for the requested S");
        }
        double worst = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (int k = 0; k < S; ++k) sum += gE[std::size_t(k)] - gF[std::size_t(k)];
        for (std::size_t i = 0; i + std::size_t(S) < L; ++i) {
            if (i > 0) sum += (gE[i + S - 1] - gF[i + S - 1]) - (gE[i - 1] - gF[i - 1]);
            worst = std::max(worst, sum / double(S));
        }
        res.S.push_back(S);
        res.worst_quotient.push_back(worst);
        res.margin.push_back(-2.0 * lambda - worst);
        res.pass = res.pass && worst <= -2.0 * lambda;
    }
    return res;
}

AssembledPseudoOrbit glue_return(const SystemSpec& system, const Point2& x1, int n1, double gap, int min_return,
                                 int max_return) {
    if (n1 < 1 || !(gap > 0.0) || min_return < 1 || max_return < min_return) {
        throw PreconditionError("glue_return needs n1 >= 1, gap > 0 and 1 <= min_return <= max_return");
    }
    OrbitSegment first = OrbitSegment::iterate(system, x1, n1);
    const Point2 y0 = first.points.back();
    CurveTracker::Row row;
    row.origin = y0.vec();
    row.direction = oseledec_directions(system, y0, 60).Eu;
    const double half = gap * 0.999999;
    row.params = {-half, 0.0, half};
    CurveTracker tracker(system, {row});
    const auto hit = tracker.first_hit(x1, gap, min_return, max_return);
    if (!hit) {
        throw HorizonError("no return of the unstable chord near the start within max_return", max_return);
    }
    OrbitSegment second = OrbitSegment::iterate(system, hit->start, hit->step);
    return assemble({std::move(first), std::move(second)}, true);
}

} // namespace nuspec
