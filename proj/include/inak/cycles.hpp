#pragma once

// Limit cycles by (multiple) shooting, Floquet multipliers, pseudo-arclength
// continuation in the system parameter and detection of fold, period-doubling
// and Neimark-Sacker points.
//
// A System provides: static dim, rhs(y), jacobian(y), parameter(),
// with_parameter(p) and parameter_derivative(y).

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inak/error.hpp"
#include "inak/ode.hpp"

namespace inak {

enum class CycleStability { Stable, Saddle, Unstable };

constexpr std::string_view to_string(CycleStability s)
{
    switch (s) {
    case CycleStability::Stable: return "stable";
    case CycleStability::Saddle: return "saddle";
    case CycleStability::Unstable: return "unstable";
    }
    return "unknown";
}

template <int N>
struct LimitCycle {
    Vec<N> anchor = Vec<N>::Zero();
    double period = 0.0;
    double parameter = 0.0;
    Mat<N> monodromy = Mat<N>::Identity();
    /// Sorted by decreasing modulus.
    std::vector<std::complex<double>> multipliers;
    CycleStability stability = CycleStability::Stable;
    double residual = 0.0;
    Vec<N> maxima = Vec<N>::Zero();
    Vec<N> minima = Vec<N>::Zero();

    /// Index of the multiplier closest to 1 (the flow direction).
    [[nodiscard]] std::size_t trivial_index() const
    {
        std::size_t best = 0;
        for (std::size_t i = 1; i < multipliers.size(); ++i)
            if (std::abs(multipliers[i] - 1.0) < std::abs(multipliers[best] - 1.0)) best = i;
        return best;
    }

    [[nodiscard]] std::vector<std::complex<double>> nontrivial() const
    {
        std::vector<std::complex<double>> out;
        const std::size_t k = trivial_index();
        for (std::size_t i = 0; i < multipliers.size(); ++i)
            if (i != k) out.push_back(multipliers[i]);
        return out;
    }
};

enum class CycleBifurcationKind { FoldOfCycles, PeriodDoubling, NeimarkSacker, HomoclinicToSaddleNodeCycle };

constexpr std::string_view to_string(CycleBifurcationKind k)
{
    switch (k) {
    case CycleBifurcationKind::FoldOfCycles: return "FoldOfCycles";
    case CycleBifurcationKind::PeriodDoubling: return "PeriodDoubling";
    case CycleBifurcationKind::NeimarkSacker: return "NeimarkSacker";
    case CycleBifurcationKind::HomoclinicToSaddleNodeCycle: return "HomoclinicToSaddleNodeCycle";
    }
    return "unknown";
}

template <int N>
struct CycleBifurcation {
    double parameter = 0.0;
    CycleBifurcationKind kind = CycleBifurcationKind::FoldOfCycles;
    LimitCycle<N> cycle;
};

/// Eigenvalues of a monodromy matrix, sorted by decreasing modulus.
template <int N>
[[nodiscard]] std::vector<std::complex<double>> sorted_eigenvalues(const Mat<N>& M)
{
    const Eigen::EigenSolver<Mat<N>> es(M, false);
    std::vector<std::complex<double>> mu(es.eigenvalues().data(), es.eigenvalues().data() + N);
    std::sort(mu.begin(), mu.end(), [](auto a, auto b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
        return a.imag() > b.imag();
    });
    return mu;
}

template <int N>
[[nodiscard]] CycleStability stability_of(const LimitCycle<N>& c)
{
    bool any_in = false, any_out = false;
    for (const auto& m : c.nontrivial()) (std::abs(m) < 1.0 ? any_in : any_out) = true;
    if (!any_out) return CycleStability::Stable;
    if (!any_in) return CycleStability::Unstable;
    return CycleStability::Saddle;
}

/// Test functions that change sign at period doubling and Neimark-Sacker
/// points: prod (mu + 1) and prod_{i<j} (mu_i mu_j - 1) over the nontrivial
/// multipliers. `complex_pair` tells the NS test apart from a neutral saddle.
struct MultiplierTests {
    double period_doubling = 0.0;
    double neimark_sacker = 0.0;
    bool complex_pair = false;
};

[[nodiscard]] inline MultiplierTests multiplier_tests(const std::vector<std::complex<double>>& nontrivial)
{
    MultiplierTests t;
    std::complex<double> pd = 1.0, ns = 1.0;
    for (std::size_t i = 0; i < nontrivial.size(); ++i) {
        pd *= nontrivial[i] + 1.0;
        for (std::size_t j = i + 1; j < nontrivial.size(); ++j) ns *= nontrivial[i] * nontrivial[j] - 1.0;
        if (std::abs(nontrivial[i].imag()) > 1e-9) t.complex_pair = true;
    }
    t.period_doubling = pd.real();
    t.neimark_sacker = ns.real();
    return t;
}

struct ShootingOptions {
    IntegratorConfig integrator{1e-12, 1e-13, 0.5, 1e7};
    /// Integration time discarded before looking for recurrence.
    double transient = 0.0;
    IntegratorConfig transient_integrator{};
    std::size_t max_crossings = 200;
    double max_search_time = 1e5;
    /// Return distance, relative to the spread of the crossings, accepted as
    /// a period guess.
    double recurrence_tol = 1e-2;
    double residual_tol = 1e-8;
    int max_iter = 40;
    int segments = 1;
    /// Switch to 4 segments when the single-shooting Jacobian is worse
    /// conditioned than this.
    double max_condition = 1e8;
};

namespace detail {

template <class System>
auto field_of(const System& sys)
{
    return [&sys](const Vec<System::dim>& y) { return Vec<System::dim>(sys.rhs(y)); };
}

template <int N>
Vec<N> section_gradient(const EventSpec<N>& s, const Vec<N>& x)
{
    Vec<N> g;
    for (int j = 0; j < N; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Vec<N> a = x, b = x;
        a[j] += h;
        b[j] -= h;
        g[j] = (s.g(a) - s.g(b)) / (2.0 * h);
    }
    return g;
}

template <class System>
struct Segment {
    Vec<System::dim> end;
    Mat<System::dim> phi;
    Vec<System::dim> dp;
};

template <class System>
Segment<System> flow_segment(const System& sys, const Vec<System::dim>& x, double T, const IntegratorConfig& cfg)
{
    constexpr int N = System::dim;
    const auto r = integrate_with_variational<N>(
        [&](const Vec<N>& y) { return Vec<N>(sys.rhs(y)); }, [&](const Vec<N>& y) { return Mat<N>(sys.jacobian(y)); },
        [&](const Vec<N>& y) { return Vec<N>(sys.parameter_derivative(y)); }, x, 0.0, T, cfg, {},
        {.store_samples = false});
    return {r.trajectory.y_final, r.phi, r.param_sensitivity};
}

template <class System>
Vec<System::dim> flow(const System& sys, const Vec<System::dim>& x, double T, const IntegratorConfig& cfg)
{
    return integrate<System::dim>(field_of(sys), x, 0.0, T, cfg, {}, {.store_samples = false}).y_final;
}

/// Fills multipliers, stability and per-coordinate extrema of a converged cycle.
template <class System>
void finish_cycle(const System& sys, LimitCycle<System::dim>& c, const IntegratorConfig& cfg)
{
    constexpr int N = System::dim;
    c.multipliers = sorted_eigenvalues<N>(c.monodromy);
    c.stability = stability_of(c);
    const auto tr = integrate<N>(field_of(sys), c.anchor, 0.0, c.period, cfg);
    c.maxima = c.minima = c.anchor;
    for (const auto& y : tr.states) {
        c.maxima = c.maxima.cwiseMax(y);
        c.minima = c.minima.cwiseMin(y);
    }
}

} // namespace detail

/// Newton on the (multiple) shooting system, starting from an anchor on the
/// section and a period guess.
template <class System>
[[nodiscard]] LimitCycle<System::dim> refine_limit_cycle(const System& sys, const Vec<System::dim>& x0, double T0,
                                                         const EventSpec<System::dim>& section,
                                                         const ShootingOptions& opt = {})
{
    constexpr int N = System::dim;
    using VecX = Eigen::VectorXd;
    using MatX = Eigen::MatrixXd;
    int m = std::max(1, opt.segments);

    auto init_nodes = [&](const Vec<N>& x, double T) {
        std::vector<Vec<N>> nodes{x};
        for (int i = 1; i < m; ++i) nodes.push_back(detail::flow(sys, nodes.back(), T / m, opt.integrator));
        return nodes;
    };
    std::vector<Vec<N>> nodes = init_nodes(x0, T0);
    double T = T0;

    struct Eval {
        VecX residual;
        MatX jac;
        Mat<N> monodromy;
    };
    auto evaluate = [&](const std::vector<Vec<N>>& xs, double period, bool with_jacobian) {
        Eval e;
        const int dim = m * N + 1;
        e.residual = VecX::Zero(dim);
        if (with_jacobian) e.jac = MatX::Zero(dim, dim);
        e.monodromy = Mat<N>::Identity();
        for (int i = 0; i < m; ++i) {
            const int next = (i + 1) % m;
            Vec<N> end;
            if (with_jacobian) {
                const auto seg = detail::flow_segment(sys, xs[i], period / m, opt.integrator);
                end = seg.end;
                e.jac.block(i * N, i * N, N, N) += seg.phi;
                e.jac.block(i * N, next * N, N, N) -= Mat<N>::Identity();
                e.jac.block(i * N, m * N, N, 1) = sys.rhs(end) / m;
                e.monodromy = seg.phi * e.monodromy;
            } else {
                end = detail::flow(sys, xs[i], period / m, opt.integrator);
            }
            e.residual.segment(i * N, N) = end - xs[next];
        }
        e.residual[m * N] = section.g(xs[0]);
        if (with_jacobian) e.jac.block(m * N, 0, 1, N) = detail::section_gradient(section, xs[0]).transpose();
        return e;
    };
    auto flow_residual = [&](const Eval& e) { return e.residual.head(m * N).norm(); };

    for (int it = 0; it < opt.max_iter; ++it) {
        Eval e = evaluate(nodes, T, true);
        if (!e.residual.allFinite()) throw Error(ErrorKind::NewtonDiverged, "non-finite shooting residual");
        if (m == 1 && opt.max_condition > 0.0) {
            const Eigen::JacobiSVD<MatX> svd(e.jac);
            const auto& s = svd.singularValues();
            if (s[s.size() - 1] == 0.0 || s[0] / s[s.size() - 1] > opt.max_condition) {
                m = 4;
                nodes = init_nodes(nodes[0], T);
                continue;
            }
        }
        if (flow_residual(e) <= opt.residual_tol && std::abs(e.residual[m * N]) <= opt.residual_tol) {
            LimitCycle<N> c;
            c.anchor = nodes[0];
            c.period = T;
            c.parameter = sys.parameter();
            c.monodromy = e.monodromy;
            c.residual = flow_residual(e);
            detail::finish_cycle(sys, c, opt.integrator);
            return c;
        }
        const VecX dz = e.jac.fullPivLu().solve(-e.residual);
        if (!dz.allFinite()) throw Error(ErrorKind::NewtonDiverged, "singular shooting Jacobian");
        const double r0 = e.residual.norm();
        double lambda = 1.0;
        for (;;) {
            std::vector<Vec<N>> trial = nodes;
            for (int i = 0; i < m; ++i) trial[i] += lambda * dz.segment(i * N, N);
            const double Tt = T + lambda * dz[m * N];
            if (Tt > 0.0) {
                try {
                    const Eval et = evaluate(trial, Tt, false);
                    if (et.residual.allFinite() && (et.residual.norm() < r0 || lambda < 1e-3)) {
                        nodes = std::move(trial);
                        T = Tt;
                        break;
                    }
                } catch (const Error&) {
                    // Step left the region where the flow is well behaved.
                }
            }
            lambda *= 0.5;
            if (lambda < 1e-4) throw Error(ErrorKind::NewtonDiverged, "shooting line search failed");
        }
    }
    throw Error(ErrorKind::NewtonDiverged, "shooting did not converge");
}

/// Locates a limit cycle through `section` starting from `seed`: optional
/// transient, period guess from the first near-return to the section, then
/// Newton on the shooting residual.
template <class System>
[[nodiscard]] LimitCycle<System::dim> find_limit_cycle(const System& sys, const Vec<System::dim>& seed,
                                                       const EventSpec<System::dim>& section,
                                                       const ShootingOptions& opt = {})
{
    constexpr int N = System::dim;
    Vec<N> y = seed;
    if (opt.transient > 0.0) {
        y = integrate<N>(detail::field_of(sys), y, 0.0, opt.transient, opt.transient_integrator, {},
                         {.store_samples = false})
                .y_final;
    }
    EventSpec<N> sec = section;
    sec.terminal = false;
    sec.label = "section";
    const std::vector<EventSpec<N>> ev{sec};
    const auto tr = integrate<N>(detail::field_of(sys), y, 0.0, opt.max_search_time, opt.integrator, ev,
                                 {.store_samples = false, .stop_after_events = opt.max_crossings});
    const auto& cr = tr.events;
    if (cr.size() < 2) throw Error(ErrorKind::NoRecurrence, "orbit does not return to the section");
    double spread = 0.0;
    for (const auto& c : cr) spread = std::max(spread, (c.state - cr.front().state).norm());
    const double tol = opt.recurrence_tol * std::max(spread, 1.0);
    for (std::size_t k = 1; k < cr.size(); ++k) {
        if ((cr[k].state - cr.front().state).norm() <= tol) {
            return refine_limit_cycle(sys, cr.front().state, cr[k].t - cr.front().t, section, opt);
        }
    }
    throw Error(ErrorKind::NoRecurrence, "no near-return among " + std::to_string(cr.size()) + " crossings");
}

/// Eigenvalues of the monodromy matrix recomputed around the cycle.
template <class System>
[[nodiscard]] std::vector<std::complex<double>> floquet_multipliers(const System& sys,
                                                                    const LimitCycle<System::dim>& c,
                                                                    const IntegratorConfig& cfg = {1e-11, 1e-12, 0.5,
                                                                                                   1e7})
{
    return sorted_eigenvalues<System::dim>(detail::flow_segment(sys, c.anchor, c.period, cfg).phi);
}

struct CycleContinuationOptions {
    IntegratorConfig integrator{1e-12, 1e-13, 0.5, 1e7};
    double initial_step = 0.01;
    double min_step = 1e-8;
    double max_step = 0.5;
    double residual_tol = 1e-8;
    int max_newton = 12;
    int max_points = 2000;
    double parameter_tol = 1e-5; // refinement target for special points
    /// Weights in the arclength metric; empty state weights mean all ones.
    Eigen::VectorXd state_weights;
    double period_weight = 0.1;
    double parameter_weight = 100.0;
    double max_period = 1e5;
};

enum class BranchEnd { ReachedEnd, Lost, MaxPoints, PeriodDiverged };

template <int N>
struct CycleBranch {
    std::vector<LimitCycle<N>> points;
    std::vector<CycleBifurcation<N>> special;
    BranchEnd end = BranchEnd::ReachedEnd;
    /// Why the branch stopped when it did not reach the end of the range.
    std::string message;
};

namespace detail {

template <int N>
struct CyclePoint {
    Eigen::Matrix<double, N + 2, 1> u; // (anchor, period, parameter)
    Eigen::Matrix<double, N + 2, 1> tangent;
    LimitCycle<N> cycle;
};

} // namespace detail

/// Pseudo-arclength continuation of a limit cycle in the system parameter.
/// Folds are turning points of the parameter along the branch; period
/// doubling and Neimark-Sacker points come from multiplier test functions.
/// Loss of the branch is reported in the result, with the points found so far.
template <class System>
[[nodiscard]] CycleBranch<System::dim> continue_cycle(const System& family, const LimitCycle<System::dim>& start,
                                                      double p_end, const CycleContinuationOptions& opt = {})
{
    constexpr int N = System::dim;
    constexpr int M = N + 2;
    using U = Eigen::Matrix<double, M, 1>;
    using Point = detail::CyclePoint<N>;

    U w;
    w.template head<N>() = opt.state_weights.size() == N ? Vec<N>(opt.state_weights) : Vec<N>::Ones();
    w[N] = opt.period_weight;
    w[N + 1] = opt.parameter_weight;
    const double p_start = start.parameter;
    const double p_lo = std::min(p_start, p_end), p_hi = std::max(p_start, p_end);
    auto wnorm = [&](const U& v) { return v.cwiseProduct(w).norm(); };

    // Jacobian of the N+1 defining equations at u with phase reference.
    struct Lin {
        Vec<N> residual;
        Eigen::Matrix<double, N + 1, M> D;
        Mat<N> monodromy;
    };
    auto linearize = [&](const U& u, const Vec<N>& ref_dir) {
        const auto sys = family.with_parameter(u[N + 1]);
        const auto seg = detail::flow_segment(sys, Vec<N>(u.template head<N>()), u[N], opt.integrator);
        Lin l;
        l.residual = seg.end - u.template head<N>();
        l.D.setZero();
        l.D.template block<N, N>(0, 0) = seg.phi - Mat<N>::Identity();
        l.D.template block<N, 1>(0, N) = sys.rhs(seg.end);
        l.D.template block<N, 1>(0, N + 1) = seg.dp;
        l.D.template block<1, N>(N, 0) = ref_dir.transpose();
        l.monodromy = seg.phi;
        return l;
    };
    auto tangent_of = [&](const Eigen::Matrix<double, N + 1, M>& D, const U& previous) {
        const Eigen::Matrix<double, N + 1, M> Ds = D * w.cwiseInverse().asDiagonal();
        const Eigen::JacobiSVD<Eigen::Matrix<double, N + 1, M>> svd(Ds, Eigen::ComputeFullV);
        U t = w.cwiseInverse().asDiagonal() * svd.matrixV().col(M - 1);
        t /= wnorm(t);
        if (t.dot(w.cwiseProduct(w).cwiseProduct(previous)) < 0.0) t = -t;
        return t;
    };
    auto make_cycle = [&](const U& u, const Lin& l) {
        const auto sys = family.with_parameter(u[N + 1]);
        LimitCycle<N> c;
        c.anchor = u.template head<N>();
        c.period = u[N];
        c.parameter = u[N + 1];
        c.monodromy = l.monodromy;
        c.residual = l.residual.norm();
        detail::finish_cycle(sys, c, opt.integrator);
        return c;
    };

    // Corrector from `from` at arclength s along its tangent.
    auto point_at = [&](const Point& from, double s) -> std::optional<Point> {
        const U pred = from.u + s * from.tangent;
        const Vec<N> ref = from.u.template head<N>();
        const Vec<N> ref_dir = family.with_parameter(from.u[N + 1]).rhs(ref);
        const U tw = w.cwiseProduct(w).cwiseProduct(from.tangent);
        U u = pred;
        try {
            for (int it = 0; it < opt.max_newton; ++it) {
                if (!(u[N] > 0.0) || u[N] > opt.max_period) return std::nullopt;
                const Lin l = linearize(u, ref_dir);
                Eigen::Matrix<double, M, 1> r;
                r.template head<N>() = l.residual;
                r[N] = ref_dir.dot(Vec<N>(u.template head<N>()) - ref);
                r[N + 1] = tw.dot(u - pred);
                if (!r.allFinite()) return std::nullopt;
                if (l.residual.norm() <= opt.residual_tol && std::abs(r[N]) <= 1e-9 * (1.0 + ref_dir.norm())) {
                    Point p;
                    p.u = u;
                    p.tangent = tangent_of(l.D, from.tangent);
                    p.cycle = make_cycle(u, l);
                    return p;
                }
                Eigen::Matrix<double, M, M> J;
                J.template topRows<N + 1>() = l.D;
                J.row(N + 1) = tw.transpose();
                const U du = J.fullPivLu().solve(-r);
                if (!du.allFinite()) return std::nullopt;
                u += du;
            }
        } catch (const Error&) {
            return std::nullopt;
        }
        return std::nullopt;
    };

    CycleBranch<N> branch;
    Point cur;
    cur.u.template head<N>() = start.anchor;
    cur.u[N] = start.period;
    cur.u[N + 1] = p_start;
    {
        const auto sys = family.with_parameter(p_start);
        const Vec<N> dir = sys.rhs(start.anchor);
        const Lin l = linearize(cur.u, dir);
        U seed = U::Zero();
        seed[N + 1] = p_end >= p_start ? 1.0 : -1.0;
        cur.tangent = tangent_of(l.D, seed);
        if (cur.tangent[N + 1] * seed[N + 1] < 0.0) cur.tangent = -cur.tangent;
        cur.cycle = start;
    }
    branch.points.push_back(cur.cycle);
    if (p_start == p_end) return branch;

    auto refine = [&](const Point& from, double s_hi, auto&& test) -> Point {
        double lo = 0.0, hi = s_hi;
        const double t_lo = test(from);
        Point best = from;
        double q_lo = from.u[N + 1];
        std::optional<double> q_hi;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto pm = point_at(from, mid);
            if (!pm) break;
            best = *pm;
            if ((test(*pm) < 0.0) == (t_lo < 0.0)) {
                lo = mid;
                q_lo = pm->u[N + 1];
            } else {
                hi = mid;
                q_hi = pm->u[N + 1];
            }
            if (q_hi && std::abs(*q_hi - q_lo) <= opt.parameter_tol && (hi - lo) <= 1e-7 * s_hi) break;
        }
        return best;
    };
    auto tests_of = [](const Point& p) { return multiplier_tests(p.cycle.nontrivial()); };
    auto add_special = [&](const Point& p, CycleBifurcationKind kind) {
        branch.special.push_back({p.u[N + 1], kind, p.cycle});
    };

    double ds = opt.initial_step;
    for (int count = 0;; ++count) {
        if (count >= opt.max_points) {
            branch.end = BranchEnd::MaxPoints;
            branch.message = "point limit reached";
            break;
        }
        std::optional<Point> next;
        for (;;) {
            next = point_at(cur, ds);
            if (next && wnorm(next->u - cur.u) <= 2.0 * ds) break;
            ds *= 0.5;
            if (ds < opt.min_step) break;
        }
        if (!next || ds < opt.min_step) {
            const double q = cur.u[N + 1];
            if (cur.u[N] * 1.5 > opt.max_period) {
                branch.end = BranchEnd::PeriodDiverged;
                branch.message = "period diverged near parameter " + std::to_string(q);
            } else {
                branch.end = BranchEnd::Lost;
                branch.message = "shooting failed after parameter " + std::to_string(q);
            }
            break;
        }

        if ((cur.tangent[N + 1] < 0.0) != (next->tangent[N + 1] < 0.0)) {
            add_special(refine(cur, ds, [](const Point& p) { return p.tangent[N + 1]; }),
                        CycleBifurcationKind::FoldOfCycles);
        }
        const MultiplierTests a = tests_of(cur), b = tests_of(*next);
        if ((a.period_doubling < 0.0) != (b.period_doubling < 0.0)) {
            add_special(refine(cur, ds, [&](const Point& p) { return tests_of(p).period_doubling; }),
                        CycleBifurcationKind::PeriodDoubling);
        }
        if ((a.neimark_sacker < 0.0) != (b.neimark_sacker < 0.0) && (a.complex_pair || b.complex_pair)) {
            const Point p = refine(cur, ds, [&](const Point& q) { return tests_of(q).neimark_sacker; });
            if (tests_of(p).complex_pair) add_special(p, CycleBifurcationKind::NeimarkSacker);
        }

        cur = *next;
        if (cur.u[N + 1] < p_lo || cur.u[N + 1] > p_hi) break;
        branch.points.push_back(cur.cycle);
        ds = std::min(ds * 1.3, opt.max_step);
    }
    return branch;
}

struct SnpoOptions {
    ShootingOptions shooting{};
    double parameter_tol = 1e-5;
    /// Nontrivial multiplier distance from 1 accepted as the fold signature
    /// at the last stable cycle.
    double fold_tol = 0.1;
    double linger_factor = 5.0;
    /// Distance from the dead cycle's anchor (relative to the cycle extent)
    /// that ends the slow passage.
    double escape_fraction = 0.1;
    double max_passage = 1e5;
    /// Offsets past the bifurcation at which the passage time is measured.
    double near_offset = 1e-4;
    double far_offset = 4e-4;
    IntegratorConfig integrator{};
};

template <int N>
struct SnpoResult {
    CycleBifurcation<N> bifurcation;
    double bracket_lo = 0.0; // last parameter with the cycle
    double bracket_hi = 0.0; // first parameter without it
    double leading_multiplier = 0.0;
    double passage_near = 0.0;
    double passage_far = 0.0;
    /// Fitted exponent of passage ~ (p - p*)^(-exponent); 1/2 for a saddle-node.
    double scaling_exponent = 0.0;
    Vec<N> successor = Vec<N>::Zero(); // state after the passage
};

/// Localizes the disappearance of a stable cycle between p_lo (exists) and
/// p_hi (gone) and checks the saddle-node signature of the event.
template <class System>
[[nodiscard]] SnpoResult<System::dim> detect_homoclinic_snpo(const System& family, const Vec<System::dim>& seed,
                                                             const EventSpec<System::dim>& section, double p_lo,
                                                             double p_hi, const SnpoOptions& opt = {})
{
    constexpr int N = System::dim;
    ShootingOptions warm = opt.shooting;
    warm.transient = 0.0;

    LimitCycle<N> good;
    try {
        good = find_limit_cycle(family.with_parameter(p_lo), seed, section, opt.shooting);
    } catch (const Error&) {
        throw Error(ErrorKind::Inconclusive, "no cycle at the start of the bracket");
    }
    if (good.stability != CycleStability::Stable) throw Error(ErrorKind::Inconclusive, "cycle at bracket start is not stable");

    const double extent = std::max((good.maxima - good.minima).norm(), 1e-12);
    auto findable = [&](double p, const LimitCycle<N>& from) -> std::optional<LimitCycle<N>> {
        try {
            auto c = refine_limit_cycle(family.with_parameter(p), from.anchor, from.period, section, warm);
            if (c.stability != CycleStability::Stable) return std::nullopt;
            if ((c.anchor - from.anchor).norm() > 0.25 * extent) return std::nullopt;
            return c;
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    // A cycle still found at the far end, tracked from the start, means no
    // disappearance.
    {
        LimitCycle<N> track = good;
        bool alive = true;
        const int probes = 16;
        for (int i = 1; i <= probes && alive; ++i) {
            const auto c = findable(p_lo + (p_hi - p_lo) * i / probes, track);
            if (c) track = *c;
            else alive = false;
        }
        if (alive) throw Error(ErrorKind::Inconclusive, "stable cycle persists across the bracket");
    }
    double lo = p_lo, hi = p_hi;
    while (std::abs(hi - lo) > opt.parameter_tol) {
        const double mid = 0.5 * (lo + hi);
        if (const auto c = findable(mid, good)) {
            good = *c;
            lo = mid;
        } else {
            hi = mid;
        }
    }

    SnpoResult<N> res;
    res.bracket_lo = lo;
    res.bracket_hi = hi;
    double lead = 0.0;
    for (const auto& m : good.nontrivial()) lead = std::max(lead, std::abs(m));
    res.leading_multiplier = lead;
    const bool fold_signature = std::abs(lead - 1.0) <= opt.fold_tol;

    const double dir = p_hi > p_lo ? 1.0 : -1.0;
    auto passage = [&](double offset, Vec<N>* final_state) {
        const auto sys = family.with_parameter(hi + dir * offset);
        EventSpec<N> sec = section;
        sec.terminal = false;
        sec.label = "section";
        const Vec<N> anchor = good.anchor;
        const double radius = opt.escape_fraction * extent;
        std::vector<EventSpec<N>> ev{sec};
        const auto tr = integrate<N>(detail::field_of(sys), anchor, 0.0, opt.max_passage, opt.integrator, ev,
                                     {.store_samples = false});
        for (const auto& e : tr.events) {
            if ((e.state - anchor).norm() > radius) {
                if (final_state) *final_state = tr.y_final;
                return e.t;
            }
        }
        if (final_state) *final_state = tr.y_final;
        return opt.max_passage;
    };
    res.passage_near = passage(opt.near_offset, &res.successor);
    res.passage_far = passage(opt.far_offset, nullptr);
    res.scaling_exponent = std::log(res.passage_near / res.passage_far) / std::log(opt.far_offset / opt.near_offset);

    const bool lingers = res.passage_near > opt.linger_factor * good.period;
    if (!fold_signature && !lingers) throw Error(ErrorKind::Inconclusive, "no saddle-node signature at the boundary");
    res.bifurcation.parameter = 0.5 * (lo + hi);
    res.bifurcation.kind = lingers ? CycleBifurcationKind::HomoclinicToSaddleNodeCycle
                                   : CycleBifurcationKind::FoldOfCycles;
    res.bifurcation.cycle = good;
    return res;
}

} // namespace inak
