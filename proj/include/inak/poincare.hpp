#pragma once

// Poincare sections: return-map orbits, rotation numbers of invariant
// circles, a curvature-based smoothness score and parameter sweeps of the
// section image (orbit diagrams).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inak/error.hpp"
#include "inak/ode.hpp"
#include "inak/parallel.hpp"

namespace inak {

template <int N>
struct SectionOrbit {
    std::vector<Vec<N>> points;
    std::vector<double> times;
    Vec<N> final_state = Vec<N>::Zero(); // state where integration stopped
};

struct SectionOptions {
    /// Integration time discarded before the first recorded crossing.
    double transient_time = 0.0;
    /// Crossings discarded after transient_time.
    std::size_t transient_crossings = 0;
    double max_time = 1e6;
    IntegratorConfig integrator{};
};

/// Records n_crossings section crossings after the transient.
template <class System>
[[nodiscard]] SectionOrbit<System::dim> section_orbit(const System& sys, const Vec<System::dim>& y0,
                                                      const EventSpec<System::dim>& section, std::size_t n_crossings,
                                                      const SectionOptions& opt = {})
{
    constexpr int N = System::dim;
    auto field = [&](const Vec<N>& y) { return Vec<N>(sys.rhs(y)); };
    Vec<N> y = y0;
    double t0 = 0.0;
    if (opt.transient_time > 0.0) {
        y = integrate<N>(field, y, 0.0, opt.transient_time, opt.integrator, {}, {.store_samples = false}).y_final;
        t0 = opt.transient_time;
    }
    EventSpec<N> sec = section;
    sec.terminal = false;
    const std::vector<EventSpec<N>> ev{sec};
    const std::size_t wanted = n_crossings + opt.transient_crossings;
    const auto tr = integrate<N>(field, y, t0, t0 + opt.max_time, opt.integrator, ev,
                                 {.store_samples = false, .stop_after_events = wanted});
    SectionOrbit<N> out;
    out.final_state = tr.y_final;
    if (tr.events.size() < wanted) {
        throw Error(ErrorKind::NoRecurrence, "only " + std::to_string(tr.events.size()) + " of " +
                                                 std::to_string(wanted) + " section crossings");
    }
    for (std::size_t i = opt.transient_crossings; i < tr.events.size(); ++i) {
        out.points.push_back(tr.events[i].state);
        out.times.push_back(tr.events[i].t);
    }
    return out;
}

struct RotationOptions {
    std::size_t min_points = 500;
    int max_denominator = 64;
    double lock_tol = 1e-5; // relative to the orbit diameter
    /// Fraction of cyclic-order violations tolerated before the points are
    /// declared not to lie on an invariant circle.
    double max_order_violations = 0.01;
};

struct RotationEstimate {
    double rho = 0.0;      // p/q when locked
    double measured = 0.0; // lift average
    bool locked = false;
    int p = 0;
    int q = 0;
    /// Locked: worst revisit distance / diameter. Otherwise the best one found.
    double confidence = 0.0;
};

namespace detail {

/// Projects points onto their two leading principal directions.
template <int N>
std::vector<Eigen::Vector2d> principal_plane(const std::vector<Vec<N>>& pts)
{
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), N);
    for (std::size_t i = 0; i < pts.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    Eigen::MatrixXd basis;
    if constexpr (N == 2) {
        basis = Eigen::MatrixXd::Identity(2, 2);
    } else {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
        basis = es.eigenvectors().rightCols(2).rowwise().reverse();
    }
    const Eigen::MatrixXd Y = X * basis;
    std::vector<Eigen::Vector2d> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = Y.row(static_cast<Eigen::Index>(i)).transpose();
    return out;
}

/// Center of the algebraic least-squares conic through the points.
inline std::optional<Eigen::Vector2d> ellipse_center(const std::vector<Eigen::Vector2d>& p)
{
    Eigen::MatrixXd D(static_cast<Eigen::Index>(p.size()), 5);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = p[i][0], y = p[i][1];
        D.row(static_cast<Eigen::Index>(i)) << x * x, x * y, y * y, x, y;
    }
    const Eigen::VectorXd c = D.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(D.rows()));
    const double a = c[0], b = c[1], cc = c[2], d = c[3], e = c[4];
    const double den = 4 * a * cc - b * b;
    if (!(den > 0.0)) return std::nullopt; // not an ellipse
    return Eigen::Vector2d((b * e - 2 * cc * d) / den, (b * d - 2 * a * e) / den);
}

inline double largest_angular_gap(std::vector<double> angles)
{
    std::sort(angles.begin(), angles.end());
    double gap = 2.0 * std::numbers::pi - (angles.back() - angles.front());
    for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
    return gap;
}

struct Circle {
    std::vector<Eigen::Vector2d> plane;
    Eigen::Vector2d center;
    std::vector<double> angles;
};

/// Angles of the projected points about a center that the curve encloses.
template <int N>
Circle circle_coordinates(const std::vector<Vec<N>>& pts)
{
    Circle c;
    c.plane = principal_plane(pts);
    auto angles_about = [&](const Eigen::Vector2d& ctr) {
        std::vector<double> a(c.plane.size());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::atan2(c.plane[i][1] - ctr[1], c.plane[i][0] - ctr[0]);
        return a;
    };
    c.center = Eigen::Vector2d::Zero(); // centroid: the projection is mean-free
    c.angles = angles_about(c.center);
    if (largest_angular_gap(c.angles) > std::numbers::pi) {
        const auto e = ellipse_center(c.plane);
        if (!e) throw Error(ErrorKind::CurveFitFailed, "points do not surround their centroid");
        c.center = *e;
        c.angles = angles_about(c.center);
        if (largest_angular_gap(c.angles) > std::numbers::pi) {
            throw Error(ErrorKind::CurveFitFailed, "no center found that the points surround");
        }
    }
    return c;
}

/// Number of places where the map x_k -> x_{k+1} breaks the cyclic order of
/// the points by angle. An orbit on an invariant circle has none.
inline std::size_t cyclic_order_violations(const std::vector<double>& angles)
{
    const std::size_t m = angles.size() - 1; // points that have an image
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return angles[a] < angles[b]; });
    std::size_t descents = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double a = angles[order[i] + 1];
        const double b = angles[order[(i + 1) % m] + 1];
        if (b < a) ++descents;
    }
    return descents > 0 ? descents - 1 : 0;
}

template <int N>
double diameter(const std::vector<Vec<N>>& pts)
{
    Vec<N> lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

} // namespace detail

/// Rotation number of an orbit of the return map. Checks rational locking
/// (q-periodicity for q up to the cap) before fitting a circle.
template <int N>
[[nodiscard]] RotationEstimate rotation_number(const std::vector<Vec<N>>& pts, const RotationOptions& opt = {})
{
    if (pts.size() < opt.min_points) {
        throw Error(ErrorKind::WindowTooShort, "rotation number needs at least " + std::to_string(opt.min_points) +
                                                   " crossings, got " + std::to_string(pts.size()));
    }
    RotationEstimate est;
    const double diam = std::max(detail::diameter(pts), 1e-300);
    double best = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= opt.max_denominator; ++q) {
        double worst = 0.0;
        for (std::size_t k = 0; k + static_cast<std::size_t>(q) < pts.size(); ++k)
            worst = std::max(worst, (pts[k + static_cast<std::size_t>(q)] - pts[k]).norm());
        best = std::min(best, worst / diam);
        if (worst < opt.lock_tol * diam) {
            est.locked = true;
            est.q = q;
            est.confidence = worst / diam;
            break;
        }
    }
    if (!est.locked) est.confidence = best;

    if (est.locked && est.q == 1) {
        // A fixed point of the return map: the orbit winds zero times.
        est.p = 0;
        est.rho = est.measured = 0.0;
        return est;
    }
    const detail::Circle circle = detail::circle_coordinates(pts);
    if (!est.locked) {
        const auto violations = detail::cyclic_order_violations(circle.angles);
        if (static_cast<double>(violations) > opt.max_order_violations * static_cast<double>(pts.size())) {
            throw Error(ErrorKind::CurveFitFailed,
                        std::to_string(violations) + " cyclic-order violations: points are not on an invariant circle");
        }
    }
    const double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < circle.angles.size(); ++k) {
        double d = std::fmod(circle.angles[k + 1] - circle.angles[k], two_pi);
        if (d < 0.0) d += two_pi;
        total += d;
    }
    est.measured = total / (two_pi * static_cast<double>(circle.angles.size() - 1));
    if (est.locked) {
        est.p = static_cast<int>(std::lround(est.measured * est.q)) % est.q;
        est.rho = static_cast<double>(est.p) / est.q;
    } else {
        est.rho = est.measured;
    }
    return est;
}

struct SmoothnessOptions {
    double percentile = 0.95;
    double threshold_deg = 30.0;
};

struct SmoothnessScore {
    double score_deg = 0.0;
    bool smooth = true;
};

/// Orders the points by angle and scores the turning angle between
/// consecutive chords (nearest-rank percentile).
template <int N>
[[nodiscard]] SmoothnessScore torus_smoothness(const std::vector<Vec<N>>& pts, const SmoothnessOptions& opt = {})
{
    if (pts.size() < 3) throw Error(ErrorKind::WindowTooShort, "smoothness needs at least three points");
    const detail::Circle circle = detail::circle_coordinates(pts);
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return circle.angles[a] < circle.angles[b]; });
    const std::size_t m = order.size();
    std::vector<double> turning;
    turning.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Vector2d& a = circle.plane[order[i]];
        const Eigen::Vector2d& b = circle.plane[order[(i + 1) % m]];
        const Eigen::Vector2d& c = circle.plane[order[(i + 2) % m]];
        const Eigen::Vector2d u = b - a, v = c - b;
        if (u.norm() == 0.0 || v.norm() == 0.0) continue;
        const double cross = u[0] * v[1] - u[1] * v[0];
        turning.push_back(std::abs(std::atan2(cross, u.dot(v))) * 180.0 / std::numbers::pi);
    }
    if (turning.empty()) throw Error(ErrorKind::CurveFitFailed, "all points coincide");
    std::sort(turning.begin(), turning.end());
    const auto rank = static_cast<std::size_t>(std::ceil(opt.percentile * static_cast<double>(turning.size())));
    SmoothnessScore s;
    s.score_deg = turning[std::clamp<std::size_t>(rank, 1, turning.size()) - 1];
    s.smooth = s.score_deg <= opt.threshold_deg;
    return s;
}

enum class SeedPolicy { Warm, Cold };

struct OrbitDiagramOptions {
    std::size_t crossings = 200;
    SectionOptions section{2000.0, 0, 1e6, IntegratorConfig{}};
    /// Observable: index of the state coordinate recorded at each crossing.
    int observable = 0;
    SeedPolicy seeding = SeedPolicy::Warm;
    unsigned jobs = 1; // cold seeding only
};

struct OrbitColumn {
    double parameter = 0.0;
    std::vector<double> values;
    std::string error; // empty on success
};

/// Section image of the attractor for each parameter value. Warm seeding
/// starts each point from the final state of the previous one.
template <class System>
[[nodiscard]] std::vector<OrbitColumn> orbit_diagram(const System& family, const std::vector<double>& params,
                                                     const Vec<System::dim>& seed,
                                                     const EventSpec<System::dim>& section,
                                                     const OrbitDiagramOptions& opt = {})
{
    constexpr int N = System::dim;
    if (params.empty()) throw Error(ErrorKind::ConfigInvalid, "orbit diagram needs at least one parameter value");
    std::vector<OrbitColumn> out(params.size());
    auto run = [&](std::size_t i, const Vec<N>& start) -> std::optional<Vec<N>> {
        out[i].parameter = params[i];
        try {
            const auto orbit = section_orbit(family.with_parameter(params[i]), start, section, opt.crossings, opt.section);
            for (const auto& p : orbit.points) out[i].values.push_back(p[opt.observable]);
            return orbit.final_state;
        } catch (const Error& e) {
            out[i].error = e.what();
            return std::nullopt;
        }
    };
    if (opt.seeding == SeedPolicy::Warm) {
        Vec<N> start = seed;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto end = run(i, start);
            start = end ? *end : seed;
        }
    } else {
        parallel_for(params.size(), opt.jobs, [&](std::size_t i) { (void)run(i, seed); });
    }
    return out;
}

struct BreakdownBracket {
    double intact = 0.0; // last parameter with a valid invariant circle
    double broken = 0.0; // first parameter where the circle fit fails
};

struct BreakdownOptions {
    std::size_t crossings = 1000;
    SectionOptions section{5000.0, 0, 1e7, IntegratorConfig{}};
    RotationOptions rotation{};
    double parameter_tol = 1e-5;
};

/// Brackets the loss of an invariant circle between `intact` and `broken`
/// by bisection on whether the rotation-number curve fit succeeds.
template <class System>
[[nodiscard]] BreakdownBracket bracket_torus_breakdown(const System& family, double intact, double broken,
                                                       const Vec<System::dim>& seed,
                                                       const EventSpec<System::dim>& section,
                                                       const BreakdownOptions& opt = {})
{
    auto circle_ok = [&](double p) {
        const auto orbit = section_orbit(family.with_parameter(p), seed, section, opt.crossings, opt.section);
        try {
            (void)rotation_number(orbit.points, opt.rotation);
            return true;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::CurveFitFailed) return false;
            throw;
        }
    };
    if (!circle_ok(intact)) throw Error(ErrorKind::Inconclusive, "no invariant circle at the intact end");
    if (circle_ok(broken)) throw Error(ErrorKind::Inconclusive, "invariant circle still present at the broken end");
    while (std::abs(broken - intact) > opt.parameter_tol) {
        const double mid = 0.5 * (intact + broken);
        (circle_ok(mid) ? intact : broken) = mid;
    }
    return {intact, broken};
}

} // namespace inak
