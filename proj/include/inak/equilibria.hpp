#pragma once

// Equilibria of the single neuron and their continuation in the drive
// current: fold (saddle-node) and Hopf detection, SNIC classification and
// frequency-current curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "inak/error.hpp"
#include "inak/model.hpp"
#include "inak/ode.hpp"

namespace inak {

enum class EquilibriumClass { Stable, Saddle, Unstable };

constexpr std::string_view to_string(EquilibriumClass c)
{
    switch (c) {
    case EquilibriumClass::Stable: return "stable";
    case EquilibriumClass::Saddle: return "saddle";
    case EquilibriumClass::Unstable: return "unstable";
    }
    return "unknown";
}

struct Equilibrium {
    Eigen::Vector2d state = Eigen::Vector2d::Zero();
    std::array<std::complex<double>, 2> eigenvalues{};
    EquilibriumClass cls = EquilibriumClass::Stable;
};

enum class BranchKind { Fold, SNIC, SaddleNodeOffCycle, SubcriticalHopf, SupercriticalHopf };

constexpr std::string_view to_string(BranchKind k)
{
    switch (k) {
    case BranchKind::Fold: return "Fold";
    case BranchKind::SNIC: return "SNIC";
    case BranchKind::SaddleNodeOffCycle: return "SaddleNodeOffCycle";
    case BranchKind::SubcriticalHopf: return "SubcriticalHopf";
    case BranchKind::SupercriticalHopf: return "SupercriticalHopf";
    }
    return "unknown";
}

struct BranchPoint {
    double parameter = 0.0;
    BranchKind kind = BranchKind::Fold;
    Equilibrium equilibrium;
    /// Folds: +1 when the colliding equilibria exist only below the fold
    /// parameter, -1 when only above.
    int vanish_direction = 0;
    /// Hopf points: first Lyapunov coefficient (positive = subcritical).
    double lyapunov = 0.0;
};

struct EquilibriumBranch {
    std::vector<double> parameters;
    std::vector<Equilibrium> points;
    std::vector<BranchPoint> special;
};

/// Eigen-decomposition of a 2x2 Jacobian and stability class.
[[nodiscard]] inline Equilibrium classify_equilibrium(const Eigen::Matrix2d& J, const Eigen::Vector2d& state)
{
    const double tr = J.trace();
    const double det = J.determinant();
    const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det));
    Equilibrium e;
    e.state = state;
    e.eigenvalues = {0.5 * (tr - disc), 0.5 * (tr + disc)};
    const double r0 = e.eigenvalues[0].real(), r1 = e.eigenvalues[1].real();
    if (r0 < 0.0 && r1 < 0.0) e.cls = EquilibriumClass::Stable;
    else if (r0 > 0.0 && r1 > 0.0) e.cls = EquilibriumClass::Unstable;
    else e.cls = EquilibriumClass::Saddle;
    return e;
}

template <class Family>
[[nodiscard]] Equilibrium classify_equilibrium(const Family& f, const Eigen::Vector2d& state)
{
    return classify_equilibrium(f.jacobian(state), state);
}

struct EquilibriumSearch {
    double V_min = -90.0;
    double V_max = 40.0;
    int grid_points = 2000;
    double residual_tol = 1e-12;
    int max_newton = 60;
};

namespace detail {

/// dV/dt on the n-nullcline, multiplied by C. Its zeros are the equilibria.
inline double reduced_balance(const NeuronParams& p, double V)
{
    return p.C * (p.total_current(V, p.n_inf(V)) + p.I);
}

/// Damped Newton on a planar field; returns nullopt when it fails.
template <class Family>
std::optional<Eigen::Vector2d> newton_planar(const Family& f, Eigen::Vector2d y, double tol, int max_iter)
{
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::Vector2d r = f.rhs(y);
        if (!r.allFinite()) return std::nullopt;
        if (r.norm() <= tol) return y;
        const Eigen::Matrix2d J = f.jacobian(y);
        if (std::abs(J.determinant()) < 1e-300) return std::nullopt;
        const Eigen::Vector2d dy = J.partialPivLu().solve(-r);
        double lambda = 1.0;
        Eigen::Vector2d trial = y + dy;
        while (lambda > 1e-6 && !(f.rhs(trial).norm() < r.norm())) {
            lambda *= 0.5;
            trial = y + lambda * dy;
        }
        if (lambda <= 1e-6) {
            // Roundoff floor: accept when the full step is tiny.
            if (dy.norm() < 1e-13 * (1.0 + y.norm())) return y;
            return std::nullopt;
        }
        y = trial;
    }
    return f.rhs(y).norm() <= tol ? std::optional<Eigen::Vector2d>(y) : std::nullopt;
}

} // namespace detail

/// All equilibria with V in [V_min, V_max], ordered by V.
[[nodiscard]] inline std::vector<Equilibrium> find_equilibria(const NeuronParams& p, const EquilibriumSearch& opt = {})
{
    p.validate();
    const SingleNeuron sys{p};
    std::vector<Equilibrium> out;
    const int n = opt.grid_points;
    double Va = opt.V_min;
    double fa = detail::reduced_balance(p, Va);
    for (int i = 1; i <= n; ++i) {
        const double Vb = opt.V_min + (opt.V_max - opt.V_min) * i / n;
        const double fb = detail::reduced_balance(p, Vb);
        const bool root_at_a = fa == 0.0;
        if (root_at_a || (fa < 0.0) != (fb < 0.0)) {
            double lo = Va, hi = Vb, flo = fa;
            if (!root_at_a) {
                for (int k = 0; k < 80; ++k) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = detail::reduced_balance(p, mid);
                    if ((fm < 0.0) == (flo < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
            }
            const double V0 = root_at_a ? Va : 0.5 * (lo + hi);
            const auto y = detail::newton_planar(sys, Eigen::Vector2d(V0, p.n_inf(V0)), opt.residual_tol, opt.max_newton);
            if (!y) throw Error(ErrorKind::NoConvergence, "Newton failed near V=" + std::to_string(V0));
            out.push_back(classify_equilibrium(sys, *y));
        }
        Va = Vb;
        fa = fb;
    }
    return out;
}

struct ContinuationOptions {
    double initial_step = 0.05;
    double min_step = 1e-7;
    double max_step = 0.5;
    double parameter_tol = 1e-4; // bisection target for special points
    double residual_tol = 1e-11;
    int max_points = 200000;
    Eigen::Vector2d box_lo{-90.0, -1e-9};
    Eigen::Vector2d box_hi{40.0, 1.0 + 1e-9};
    /// Relative weights of (y0, y1, parameter) in the arclength metric.
    Eigen::Vector3d weights{1.0, 50.0, 1.0};
};

/// First Lyapunov coefficient of a planar field at a Hopf point, by finite
/// differences of the vector field. Positive means subcritical. The critical
/// eigenvector is unit-norm, so x' = mu x - y + a x r^2, y' = x + mu y + a y r^2
/// gives 2a.
template <class Family>
[[nodiscard]] double first_lyapunov_coefficient(const Family& f, const Eigen::Vector2d& y0)
{
    using C = std::complex<double>;
    using CV = Eigen::Vector2cd;
    const Eigen::Matrix2d A = f.jacobian(y0);
    const double det = A.determinant();
    if (!(det > 0.0)) throw Error(ErrorKind::AnalysisFailed, "not a Hopf point (det <= 0)");
    const double omega = std::sqrt(det - 0.25 * A.trace() * A.trace());

    // Right and left eigenvectors for +i omega / -i omega, <p, q> = 1.
    auto null_vector = [](const Eigen::Matrix2cd& M) {
        CV v;
        if (std::abs(M(0, 1)) + std::abs(M(0, 0)) > std::abs(M(1, 0)) + std::abs(M(1, 1))) v << -M(0, 1), M(0, 0);
        else v << -M(1, 1), M(1, 0);
        return CV(v / v.norm());
    };
    const Eigen::Matrix2cd Ac = A.cast<C>();
    const C iw(0.0, omega);
    const CV q = null_vector(Ac - iw * Eigen::Matrix2cd::Identity());
    CV p = null_vector(Ac.transpose() + iw * Eigen::Matrix2cd::Identity());
    p /= std::conj(p.dot(q)); // Eigen's dot conjugates the first argument
    // After this, p.dot(q) == 1.

    std::array<double, 2> h{};
    for (int j = 0; j < 2; ++j) h[j] = 2e-3 * std::max(std::abs(y0[j]), 1.0);
    auto fval = [&](const Eigen::Vector2d& y) { return f.rhs(y); };
    // Second and third derivative tensors by central differences.
    std::array<std::array<Eigen::Vector2d, 2>, 2> H;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            Eigen::Vector2d ej = Eigen::Vector2d::Zero(), ek = Eigen::Vector2d::Zero();
            ej[j] = h[j];
            ek[k] = h[k];
            H[j][k] = (fval(y0 + ej + ek) - fval(y0 + ej - ek) - fval(y0 - ej + ek) + fval(y0 - ej - ek)) /
                      (4.0 * h[j] * h[k]);
        }
    std::array<std::array<std::array<Eigen::Vector2d, 2>, 2>, 2> T;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) {
                Eigen::Vector2d acc = Eigen::Vector2d::Zero();
                for (int s1 : {-1, 1})
                    for (int s2 : {-1, 1})
                        for (int s3 : {-1, 1}) {
                            Eigen::Vector2d d = Eigen::Vector2d::Zero();
                            d[j] += s1 * h[j];
                            d[k] += s2 * h[k];
                            d[l] += s3 * h[l];
                            acc += static_cast<double>(s1 * s2 * s3) * fval(y0 + d);
                        }
                T[j][k][l] = acc / (8.0 * h[j] * h[k] * h[l]);
            }
    auto B = [&](const CV& x, const CV& y) {
        CV r = CV::Zero();
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) r += H[j][k].cast<C>() * (x[j] * y[k]);
        return r;
    };
    auto Cf = [&](const CV& x, const CV& y, const CV& z) {
        CV r = CV::Zero();
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) r += T[j][k][l].cast<C>() * (x[j] * y[k] * z[l]);
        return r;
    };
    const CV qb = q.conjugate();
    const CV a1 = Ac.partialPivLu().solve(B(q, qb));
    const CV a2 = (2.0 * iw * Eigen::Matrix2cd::Identity() - Ac).partialPivLu().solve(B(q, q));
    const C val = p.dot(Cf(q, q, qb)) - 2.0 * p.dot(B(q, a1)) + p.dot(B(qb, a2));
    return val.real() / (2.0 * omega);
}

namespace detail {

struct ArcPoint {
    Eigen::Vector3d u; // (y0, y1, parameter)
    Eigen::Vector3d tangent;
};

template <class Family>
Eigen::Vector2d family_rhs(const Family& base, const Eigen::Vector3d& u)
{
    return base.with_parameter(u[2]).rhs(u.head<2>());
}

template <class Family>
Eigen::Matrix<double, 2, 3> extended_jacobian(const Family& base, const Eigen::Vector3d& u)
{
    const auto f = base.with_parameter(u[2]);
    Eigen::Matrix<double, 2, 3> M;
    M.leftCols<2>() = f.jacobian(u.head<2>());
    M.col(2) = f.parameter_derivative(u.head<2>());
    return M;
}

inline Eigen::Vector3d null_direction(const Eigen::Matrix<double, 2, 3>& M, const Eigen::Vector3d& w)
{
    // Null vector of M in the weighted metric: work in scaled coordinates.
    const Eigen::Matrix<double, 2, 3> Ms = M * w.cwiseInverse().asDiagonal();
    const Eigen::Vector3d r0 = Ms.row(0).transpose(), r1 = Ms.row(1).transpose();
    Eigen::Vector3d t = r0.cross(r1);
    if (t.norm() == 0.0) throw Error(ErrorKind::NoConvergence, "degenerate branch tangent");
    t.normalize();
    return w.cwiseInverse().asDiagonal() * t; // back to natural coordinates
}

/// Newton corrector with the pseudo-arclength constraint
/// <t, W^2 (u - u_pred)> = 0.
template <class Family>
std::optional<Eigen::Vector3d> correct(const Family& base, Eigen::Vector3d u, const Eigen::Vector3d& t,
                                       const Eigen::Vector3d& w, double tol)
{
    const Eigen::Vector3d u_pred = u;
    const Eigen::Vector3d tw = w.cwiseProduct(w).cwiseProduct(t);
    for (int it = 0; it < 30; ++it) {
        Eigen::Vector3d r;
        r.head<2>() = family_rhs(base, u);
        r[2] = tw.dot(u - u_pred);
        if (!r.allFinite()) return std::nullopt;
        if (r.head<2>().norm() <= tol && it > 0) return u;
        Eigen::Matrix3d M;
        M.topRows<2>() = extended_jacobian(base, u);
        M.row(2) = tw.transpose();
        const Eigen::Vector3d du = M.partialPivLu().solve(-r);
        if (!du.allFinite()) return std::nullopt;
        u += du;
        if (du.norm() < 1e-14 * (1.0 + u.norm()) && family_rhs(base, u).norm() <= 1e3 * tol) return u;
    }
    return family_rhs(base, u).norm() <= tol ? std::optional<Eigen::Vector3d>(u) : std::nullopt;
}

template <class Family>
double fold_test(const Family& base, const Eigen::Vector3d& u)
{
    return base.with_parameter(u[2]).jacobian(u.head<2>()).determinant();
}

template <class Family>
double hopf_test(const Family& base, const Eigen::Vector3d& u)
{
    return base.with_parameter(u[2]).jacobian(u.head<2>()).trace();
}

} // namespace detail

/// Pseudo-arclength continuation of an equilibrium of a planar family from
/// parameter p_start towards p_end. Stops when the branch leaves the
/// parameter interval. Folds and Hopf points are refined by bisection.
template <class Family>
[[nodiscard]] EquilibriumBranch continue_equilibrium(const Family& family, const Eigen::Vector2d& start, double p_start,
                                                     double p_end, const ContinuationOptions& opt = {})
{
    using detail::ArcPoint;
    const Eigen::Vector3d& w = opt.weights;
    const double p_lo = std::min(p_start, p_end), p_hi = std::max(p_start, p_end);
    EquilibriumBranch branch;

    const auto y0 = detail::newton_planar(family.with_parameter(p_start), start, opt.residual_tol, 60);
    if (!y0) throw Error(ErrorKind::NoConvergence, "no equilibrium at the start of the branch");
    ArcPoint cur{Eigen::Vector3d(y0->x(), y0->y(), p_start), {}};
    cur.tangent = detail::null_direction(detail::extended_jacobian(family, cur.u), w);
    if ((p_end - p_start) * cur.tangent[2] < 0.0) cur.tangent = -cur.tangent;

    auto record = [&](const Eigen::Vector3d& u) {
        branch.parameters.push_back(u[2]);
        branch.points.push_back(classify_equilibrium(family.with_parameter(u[2]), u.head<2>()));
    };
    record(cur.u);
    if (p_start == p_end) return branch;

    auto weighted_norm = [&](const Eigen::Vector3d& v) { return v.cwiseProduct(w).norm(); };
    // Scaled tangent has unit weighted length.
    auto unit = [&](Eigen::Vector3d t) { return Eigen::Vector3d(t / weighted_norm(t)); };
    cur.tangent = unit(cur.tangent);

    // Corrector from `from` along its tangent at arclength s.
    auto point_at = [&](const ArcPoint& from, double s) -> std::optional<ArcPoint> {
        const auto u = detail::correct(family, Eigen::Vector3d(from.u + s * from.tangent), from.tangent, w,
                                       opt.residual_tol);
        if (!u) return std::nullopt;
        Eigen::Vector3d t = unit(detail::null_direction(detail::extended_jacobian(family, *u), w));
        if (t.dot(w.cwiseProduct(w).cwiseProduct(from.tangent)) < 0.0) t = -t;
        return ArcPoint{*u, t};
    };

    // Bisection in arclength between cur (test value ta) and s_hi.
    auto refine = [&](const ArcPoint& from, double s_hi, auto&& test) -> ArcPoint {
        double lo = 0.0, hi = s_hi;
        const double t_lo = test(from.u);
        ArcPoint best = from;
        ArcPoint lo_pt = from;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto pm = point_at(from, mid);
            if (!pm) break;
            best = *pm;
            if ((test(pm->u) < 0.0) == (t_lo < 0.0)) {
                lo = mid;
                lo_pt = *pm;
            } else {
                hi = mid;
            }
            const auto ph = point_at(from, hi);
            if (ph && std::abs(ph->u[2] - lo_pt.u[2]) <= opt.parameter_tol && (hi - lo) < 1e-3) break;
        }
        return best;
    };

    double ds = opt.initial_step;
    for (int count = 0; count < opt.max_points; ++count) {
        auto next = point_at(cur, ds);
        while (!next || weighted_norm(next->u - cur.u) > 2.0 * ds) {
            ds *= 0.5;
            if (ds < opt.min_step) throw Error(ErrorKind::NoConvergence, "equilibrium continuation stalled");
            next = point_at(cur, ds);
        }

        const double f0 = detail::fold_test(family, cur.u), f1 = detail::fold_test(family, next->u);
        if ((f0 < 0.0) != (f1 < 0.0)) {
            const ArcPoint fp = refine(cur, ds, [&](const Eigen::Vector3d& u) { return detail::fold_test(family, u); });
            BranchPoint bp;
            bp.parameter = fp.u[2];
            bp.kind = BranchKind::Fold;
            bp.equilibrium = classify_equilibrium(family.with_parameter(fp.u[2]), fp.u.head<2>());
            bp.vanish_direction = cur.tangent[2] > 0.0 ? +1 : -1;
            branch.special.push_back(bp);
        }
        const double h0 = detail::hopf_test(family, cur.u), h1 = detail::hopf_test(family, next->u);
        if ((h0 < 0.0) != (h1 < 0.0) && f0 > 0.0 && f1 > 0.0) {
            const ArcPoint hp = refine(cur, ds, [&](const Eigen::Vector3d& u) { return detail::hopf_test(family, u); });
            BranchPoint bp;
            bp.parameter = hp.u[2];
            const auto fam = family.with_parameter(hp.u[2]);
            bp.equilibrium = classify_equilibrium(fam, hp.u.head<2>());
            bp.lyapunov = first_lyapunov_coefficient(fam, hp.u.head<2>());
            bp.kind = bp.lyapunov > 0.0 ? BranchKind::SubcriticalHopf : BranchKind::SupercriticalHopf;
            branch.special.push_back(bp);
        }

        cur = *next;
        if (cur.u[2] < p_lo || cur.u[2] > p_hi) break;
        const Eigen::Vector2d y = cur.u.head<2>();
        if ((y.array() < opt.box_lo.array()).any() || (y.array() > opt.box_hi.array()).any()) {
            throw Error(ErrorKind::BranchEscapedBox, "branch left the state box at parameter " + std::to_string(cur.u[2]));
        }
        record(cur.u);
        ds = std::min(ds * 1.5, opt.max_step);
    }
    return branch;
}

/// Convenience overload for the neuron: starts from the lowest-V equilibrium.
[[nodiscard]] inline EquilibriumBranch continue_equilibrium(const NeuronParams& p, double I_start, double I_end,
                                                            const ContinuationOptions& opt = {})
{
    NeuronParams p0 = p;
    p0.I = I_start;
    const auto eqs = find_equilibria(p0);
    if (eqs.empty()) throw Error(ErrorKind::NoConvergence, "no equilibrium at the start of the branch");
    return continue_equilibrium(SingleNeuron{p0}, eqs.front().state, I_start, I_end, opt);
}

struct RecurrenceProbe {
    double max_time = 60000.0;   // ms
    std::size_t crossings = 4;
    double recurrence_tol = 1e-3; // relative distance between successive crossings
    double box = 1e3;             // escape radius around the start
    IntegratorConfig integrator{};
};

enum class RecurrenceOutcome { Periodic, Escaped, Equilibrium, Undetermined };

struct RecurrenceResult {
    RecurrenceOutcome outcome = RecurrenceOutcome::Undetermined;
    double period = 0.0;
};

/// Integrates from y0 and reports whether the orbit returns periodically to
/// the section through `anchor` orthogonal to `normal`.
template <class System>
[[nodiscard]] RecurrenceResult probe_recurrence(const System& sys, const Eigen::Vector2d& y0,
                                                const Eigen::Vector2d& anchor, const Eigen::Vector2d& normal,
                                                const RecurrenceProbe& opt = {})
{
    const Eigen::Vector2d nrm = normal.normalized();
    std::vector<EventSpec<2>> ev{
        {[anchor, nrm](const Vec<2>& y) { return nrm.dot(y - anchor); }, +1, false, "section"},
        {[anchor, r = opt.box](const Vec<2>& y) { return (y - anchor).norm() - r; }, +1, true, "escape"}};
    RecurrenceResult res;
    Trajectory<2> tr;
    try {
        tr = integrate<2>([&](const Vec<2>& y) { return sys.rhs(y); }, y0, 0.0, opt.max_time, opt.integrator, ev,
                          {.store_samples = false, .stop_after_events = opt.crossings});
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::StepSizeUnderflow) {
            res.outcome = RecurrenceOutcome::Escaped;
            return res;
        }
        throw;
    }
    if (!tr.events.empty() && tr.events.back().label == "escape") {
        res.outcome = RecurrenceOutcome::Escaped;
        return res;
    }
    const auto cross = tr.events_labelled("section");
    if (cross.size() >= 3) {
        const auto& a = cross[cross.size() - 2];
        const auto& b = cross[cross.size() - 1];
        const double scale = 1.0 + b.state.norm();
        if ((a.state - b.state).norm() <= opt.recurrence_tol * scale) {
            res.outcome = RecurrenceOutcome::Periodic;
            res.period = b.t - a.t;
            return res;
        }
    }
    if (sys.rhs(tr.y_final).norm() < 1e-6) res.outcome = RecurrenceOutcome::Equilibrium;
    return res;
}

struct SnicOptions {
    double near_offset = 1e-3;
    double far_offset = 1.0;
    double period_ratio = 10.0;
    RecurrenceProbe probe{};
};

struct SnicVerdict {
    BranchKind kind = BranchKind::SaddleNodeOffCycle;
    double period_near = 0.0;
    double period_far = 0.0;
};

/// Decides whether a fold of equilibria lies on an invariant circle. Past the
/// fold, a stable orbit through the ghost must exist and its period must
/// diverge as the fold is approached.
template <class Family>
[[nodiscard]] SnicVerdict classify_fold_as_snic(const Family& family, const BranchPoint& fold,
                                                const SnicOptions& opt = {})
{
    if (fold.vanish_direction == 0) throw Error(ErrorKind::ConfigInvalid, "fold has no vanishing side");
    const Eigen::Vector2d ghost = fold.equilibrium.state;
    auto run = [&](double offset) {
        const auto sys = family.with_parameter(fold.parameter + fold.vanish_direction * offset);
        const Eigen::Vector2d dir = sys.rhs(ghost);
        return probe_recurrence(sys, ghost, ghost, dir, opt.probe);
    };
    const RecurrenceResult near = run(opt.near_offset);
    const RecurrenceResult far = run(opt.far_offset);
    SnicVerdict v;
    v.period_near = near.period;
    v.period_far = far.period;
    const bool near_cycle = near.outcome == RecurrenceOutcome::Periodic;
    const bool far_cycle = far.outcome == RecurrenceOutcome::Periodic;
    if (near_cycle && far_cycle) {
        v.kind = near.period > opt.period_ratio * far.period ? BranchKind::SNIC : BranchKind::SaddleNodeOffCycle;
        return v;
    }
    const auto conclusive = [](RecurrenceOutcome o) {
        return o == RecurrenceOutcome::Escaped || o == RecurrenceOutcome::Equilibrium;
    };
    if ((near_cycle || conclusive(near.outcome)) && (far_cycle || conclusive(far.outcome))) {
        v.kind = BranchKind::SaddleNodeOffCycle;
        return v;
    }
    throw Error(ErrorKind::Inconclusive, "no periodic orbit or escape found near the fold");
}

struct FiOptions {
    double threshold = -20.0;     // mV, upward crossing
    double min_separation = 1.0;  // ms
    double transient = 2000.0;    // ms
    double window = 2000.0;       // ms, extended until min_spikes are seen
    double max_window = 20000.0;  // ms
    std::size_t min_spikes = 3;
    double kick = 1.0;            // mV added to the resting state
    IntegratorConfig integrator{};
};

/// Spiking frequency (Hz) of the single neuron at drive I, 0 when quiescent.
[[nodiscard]] inline double spiking_frequency(const NeuronParams& p, const FiOptions& opt = {})
{
    const auto eqs = find_equilibria(p);
    Eigen::Vector2d y0 = eqs.empty() ? Eigen::Vector2d(-60.0, 0.0) : eqs.front().state;
    y0[0] += opt.kick;
    const SingleNeuron sys{p};
    std::vector<EventSpec<2>> ev{coordinate_event<2>(0, opt.threshold, +1, "spike")};
    double window = opt.window;
    for (;;) {
        const double t_end = opt.transient + window;
        const auto tr = integrate<2>([&](const Vec<2>& y) { return sys.rhs(y); }, y0, 0.0, t_end, opt.integrator, ev,
                                     {.store_samples = false});
        std::vector<double> spikes;
        for (const auto& e : tr.events)
            if (spikes.empty() || e.t - spikes.back() >= opt.min_separation) spikes.push_back(e.t);
        const std::size_t total = spikes.size();
        std::erase_if(spikes, [&](double t) { return t < opt.transient; });
        if (spikes.size() >= opt.min_spikes) {
            const double mean_isi = (spikes.back() - spikes.front()) / static_cast<double>(spikes.size() - 1);
            return 1000.0 / mean_isi;
        }
        // Only slow spiking justifies a longer window.
        if (total == 0 || window >= opt.max_window) return 0.0;
        window = std::min(2.0 * window + 1.0, opt.max_window);
    }
}

struct FiPoint {
    double I = 0.0;
    double frequency = 0.0;
};

[[nodiscard]] inline std::vector<FiPoint> fi_curve(const NeuronParams& p, double I_lo, double I_hi, int n_points,
                                                   const FiOptions& opt = {})
{
    if (n_points < 2) throw Error(ErrorKind::ConfigInvalid, "fi_curve needs at least two points");
    std::vector<FiPoint> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        NeuronParams q = p;
        q.I = I_lo + (I_hi - I_lo) * i / (n_points - 1);
        out.push_back({q.I, spiking_frequency(q, opt)});
    }
    return out;
}

struct RepellingCycle {
    double amplitude = 0.0; // peak-to-peak of the first coordinate
    double period = 0.0;
};

struct RepellingCycleOptions {
    double kick = 1e-3;
    double duration = 2000.0;
    double escape_radius = 60.0; // in the metric of `weights`
    Eigen::Vector2d weights{1.0, 50.0};
    double settle_tol = 1e-2;    // relative amplitude change between quarters
};

/// Integrates the time-reversed field from a small displacement of a stable
/// focus. An unstable cycle around the focus attracts the reversed flow; the
/// result is its amplitude, or nullopt when the reversed orbit escapes or has
/// not settled.
template <class System>
[[nodiscard]] std::optional<RepellingCycle> repelling_cycle(const System& sys, const Eigen::Vector2d& focus,
                                                            const RepellingCycleOptions& opt = {})
{
    auto back = [&](const Vec<2>& y) { return Vec<2>(-sys.rhs(y)); };
    const Eigen::Vector2d w = opt.weights;
    std::vector<EventSpec<2>> ev{
        {[focus, w, r = opt.escape_radius](const Vec<2>& y) { return (y - focus).cwiseProduct(w).norm() - r; }, +1,
         true, "escape"},
        coordinate_event<2>(0, focus[0], +1, "section")};
    IntegratorConfig cfg;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    Trajectory<2> tr;
    try {
        tr = integrate<2>(back, Eigen::Vector2d(focus[0] + opt.kick, focus[1]), 0.0, opt.duration, cfg, ev,
                          {.record_from = 0.5 * opt.duration});
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::StepSizeUnderflow) return std::nullopt;
        throw;
    }
    if (!tr.events.empty() && tr.events.back().label == "escape") return std::nullopt;
    const auto cross = tr.events_labelled("section");
    if (cross.size() < 4) return std::nullopt;
    auto span = [&](double a, double b) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < tr.size(); ++i)
            if (tr.times[i] >= a && tr.times[i] <= b) {
                lo = std::min(lo, tr.states[i][0]);
                hi = std::max(hi, tr.states[i][0]);
            }
        return hi - lo;
    };
    const double a1 = span(0.5 * opt.duration, 0.75 * opt.duration);
    const double a2 = span(0.75 * opt.duration, opt.duration);
    if (!(a2 > 10.0 * opt.kick) || std::abs(a2 - a1) > opt.settle_tol * a2) return std::nullopt;
    RepellingCycle rc;
    rc.amplitude = a2;
    rc.period = cross.back().t - cross[cross.size() - 2].t;
    return rc;
}

} // namespace inak
