#pragma once

// Dormand-Prince 5(4) integration with the order-4 continuous extension,
// event location on the interpolant and variational (monodromy) integration.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "inak/error.hpp"

namespace inak {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

struct IntegratorConfig {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.5;      // ms
    double max_time = 1.0e7;    // ms, longest admissible span

    void validate() const
    {
        if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorKind::ConfigInvalid, "tolerances must be positive");
        if (!(max_step > 0.0)) throw Error(ErrorKind::ConfigInvalid, "max_step must be positive");
        if (!(max_time > 0.0)) throw Error(ErrorKind::ConfigInvalid, "max_time must be positive");
    }
};

/// Scalar event g(y) = 0. direction: +1 rising, -1 falling, 0 both.
template <int N>
struct EventSpec {
    std::function<double(const Vec<N>&)> g;
    int direction = 0;
    bool terminal = false;
    std::string label;
};

/// Hyperplane y[index] = level, the usual Poincare section.
template <int N>
[[nodiscard]] EventSpec<N> coordinate_event(int index, double level, int direction, std::string label = "section",
                                            bool terminal = false)
{
    return {[index, level](const Vec<N>& y) { return y[index] - level; }, direction, terminal, std::move(label)};
}

template <int N>
struct EventRecord {
    double t = 0.0;
    std::string label;
    int index = 0; // position of the spec in the event list
    Vec<N> state = Vec<N>::Zero();
};

template <int N>
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec<N>> states;
    std::vector<Vec<N>> derivatives;
    std::vector<EventRecord<N>> events;
    double t_final = 0.0;
    Vec<N> y_final = Vec<N>::Zero();
    std::size_t steps = 0;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool empty() const noexcept { return times.empty(); }

    /// Cubic Hermite interpolation between stored samples.
    [[nodiscard]] Vec<N> at(double t) const
    {
        if (times.empty()) throw Error(ErrorKind::AnalysisFailed, "trajectory has no stored samples");
        if (t <= times.front()) return states.front();
        if (t >= times.back()) return states.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
        return hermite(i, t);
    }

    /// Interpolates within sample interval [times[i], times[i+1]].
    [[nodiscard]] Vec<N> hermite(std::size_t i, double t) const
    {
        const double h = times[i + 1] - times[i];
        const double s = (t - times[i]) / h;
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return h00 * states[i] + h10 * h * derivatives[i] + h01 * states[i + 1] + h11 * h * derivatives[i + 1];
    }

    [[nodiscard]] std::vector<EventRecord<N>> events_labelled(const std::string& label) const
    {
        std::vector<EventRecord<N>> out;
        for (const auto& e : events)
            if (e.label == label) out.push_back(e);
        return out;
    }
};

struct IntegrateOptions {
    bool store_samples = true;
    /// Samples and events before this time are not stored.
    double record_from = -std::numeric_limits<double>::infinity();
    /// Stop exactly at the k-th recorded event (0 disables).
    std::size_t stop_after_events = 0;
};

namespace detail {

template <class State>
double error_norm(const State& err, const State& y0, const State& y1, double rtol, double atol)
{
    const auto sc = (atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array());
    const double ms = (err.array() / sc).square().mean();
    return std::sqrt(ms);
}

template <class State>
auto main_part(const State& s)
{
    return s.template leftCols<1>().eval();
}

/// Single-step Dormand-Prince engine with FSAL and dense output.
template <class State, class F>
class Dopri5 {
public:
    Dopri5(F& f, const State& y0, double t0, const IntegratorConfig& cfg) : f_(f), cfg_(cfg), t_(t0), y_(y0)
    {
        k1_ = f_(y_);
        check_finite(k1_);
    }

    [[nodiscard]] double t() const noexcept { return t_; }
    [[nodiscard]] const State& y() const noexcept { return y_; }
    [[nodiscard]] const State& dy() const noexcept { return k1_; }
    [[nodiscard]] double t_prev() const noexcept { return t_old_; }
    [[nodiscard]] const State& y_prev() const noexcept { return y_old_; }

    /// Takes one accepted step not beyond t_bound.
    void step(double t_bound)
    {
        if (h_ <= 0.0) h_ = initial_step(t_bound);
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                         a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        (void)c2; (void)c3; (void)c4; (void)c5;

        bool rejected = false;
        for (;;) {
            double h = std::min(h_, cfg_.max_step);
            if (t_ + h > t_bound) h = t_bound - t_;
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
                throw Error(ErrorKind::StepSizeUnderflow, "step size underflow at t=" + std::to_string(t_));
            }
            const State k2 = f_(State(y_ + h * (a21 * k1_)));
            const State k3 = f_(State(y_ + h * (a31 * k1_ + a32 * k2)));
            const State k4 = f_(State(y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3)));
            const State k5 = f_(State(y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4)));
            const State k6 = f_(State(y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
            const State y1 = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            const State k7 = f_(y1);
            const State err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double en = error_norm(err, y_, y1, cfg_.rtol, cfg_.atol);
            if (!std::isfinite(en)) en = 1e10;

            // PI step-size controller.
            constexpr double beta = 0.04, safety = 0.9;
            const double fac11 = std::pow(std::max(en, 1e-10), 0.2 - beta * 0.75);
            if (en <= 1.0) {
                double fac = fac11 / std::pow(facold_, beta);
                fac = std::clamp(fac / safety, 0.1, 5.0);
                double hnew = h / fac;
                if (rejected) hnew = std::min(hnew, h);
                facold_ = std::max(en, 1e-4);

                const State ydiff = y1 - y_;
                const State bspl = h * k1_ - ydiff;
                r1_ = y_;
                r2_ = ydiff;
                r3_ = bspl;
                r4_ = ydiff - h * k7 - bspl;
                r5_ = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

                t_old_ = t_;
                y_old_ = y_;
                t_ = (t_ + h == t_bound || h == t_bound - t_) ? t_bound : t_ + h;
                y_ = y1;
                k1_ = k7;
                h_old_ = h;
                h_ = hnew;
                check_finite(y_);
                return;
            }
            rejected = true;
            h_ = h / std::min(1.0 / 0.2, fac11 / safety);
        }
    }

    /// Continuous extension on the last accepted step.
    [[nodiscard]] State dense(double t) const
    {
        const double theta = (t - t_old_) / h_old_;
        const double theta1 = 1.0 - theta;
        return r1_ + theta * (r2_ + theta1 * (r3_ + theta * (r4_ + theta1 * r5_)));
    }

private:
    void check_finite(const State& s) const
    {
        if (!s.allFinite()) throw Error(ErrorKind::StepSizeUnderflow, "non-finite state (blow-up) near t=" + std::to_string(t_));
    }

    double initial_step(double t_bound)
    {
        const auto sc = (cfg_.atol + cfg_.rtol * y_.cwiseAbs().array());
        const double d0 = std::sqrt((y_.array() / sc).square().mean());
        const double d1 = std::sqrt((k1_.array() / sc).square().mean());
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min({h0, cfg_.max_step, std::max(t_bound - t_, 1e-12)});
        const State y1 = y_ + h0 * k1_;
        const State f1 = f_(y1);
        const double d2 = std::sqrt(((f1 - k1_).array() / sc).square().mean()) / h0;
        const double h1 = (std::max(d1, d2) <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                        : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
        return std::min({100 * h0, h1, cfg_.max_step});
    }

    F& f_;
    const IntegratorConfig& cfg_;
    double t_;
    State y_;
    State k1_;
    double h_ = 0.0;
    double h_old_ = 0.0;
    double t_old_ = 0.0;
    State y_old_;
    double facold_ = 1e-4;
    State r1_, r2_, r3_, r4_, r5_;
};

/// Locates a root of g on [ta, tb] (ga, gb of opposite sign) by Illinois regula falsi.
template <class G>
double locate_root(G&& g, double ta, double tb, double ga, double gb, double gtol)
{
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double tc = (ta * gb - tb * ga) / (gb - ga);
        if (!(tc > std::min(ta, tb) && tc < std::max(ta, tb))) tc = 0.5 * (ta + tb);
        const double gc = g(tc);
        if (std::abs(gc) <= gtol || std::abs(tb - ta) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(tc))
            return tc;
        if ((gc > 0) == (gb > 0)) {
            tb = tc;
            gb = gc;
            if (side == -1) ga *= 0.5;
            side = -1;
        } else {
            ta = tc;
            ga = gc;
            if (side == 1) gb *= 0.5;
            side = 1;
        }
    }
    return (ta * gb - tb * ga) / (gb - ga);
}

inline bool crosses(double g0, double g1, int direction)
{
    const bool rising = g0 < 0.0 && g1 >= 0.0;
    const bool falling = g0 > 0.0 && g1 <= 0.0;
    if (direction > 0) return rising;
    if (direction < 0) return falling;
    return rising || falling;
}

/// Shared driver. State may be a column vector or an augmented matrix whose
/// first column is the phase-space point.
template <int N, class State, class F>
State run(F&& field, const State& y0, double t0, double t1, const IntegratorConfig& cfg,
          std::span<const EventSpec<N>> events, const IntegrateOptions& opt, Trajectory<N>& traj)
{
    cfg.validate();
    if (!(t1 >= t0)) throw Error(ErrorKind::ConfigInvalid, "integration span must be forward in time");
    if (t1 - t0 > cfg.max_time) throw Error(ErrorKind::MaxTimeExceeded, "requested span exceeds max_time");
    if (!y0.allFinite()) throw Error(ErrorKind::ConfigInvalid, "initial state is not finite");

    auto record_sample = [&](double t, const State& y, const State& dy) {
        if (!opt.store_samples || t < opt.record_from) return;
        if (!traj.times.empty() && t <= traj.times.back()) return;
        traj.times.push_back(t);
        traj.states.push_back(main_part(y));
        traj.derivatives.push_back(main_part(dy));
    };

    Dopri5<State, F> solver(field, y0, t0, cfg);
    record_sample(t0, y0, solver.dy());
    std::vector<double> gprev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) gprev[i] = events[i].g(main_part(y0));

    std::size_t recorded_events = 0;
    while (solver.t() < t1) {
        solver.step(t1);
        ++traj.steps;
        const Vec<N> ynew = main_part(solver.y());

        struct Hit {
            double t;
            std::size_t idx;
        };
        std::vector<Hit> hits;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double gnew = events[i].g(ynew);
            if (crosses(gprev[i], gnew, events[i].direction)) {
                auto gt = [&](double t) { return events[i].g(main_part(solver.dense(t))); };
                const Vec<N> ymid = main_part(solver.y_prev());
                const double gtol = 1e-12 * (1.0 + std::max(ymid.cwiseAbs().maxCoeff(), ynew.cwiseAbs().maxCoeff()));
                hits.push_back({locate_root(gt, solver.t_prev(), solver.t(), gprev[i], gnew, gtol), i});
            }
            gprev[i] = gnew;
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.t < b.t; });

        for (const Hit& h : hits) {
            const State yev = solver.dense(h.t);
            if (h.t >= opt.record_from) {
                traj.events.push_back({h.t, events[h.idx].label, static_cast<int>(h.idx), main_part(yev)});
                ++recorded_events;
            }
            const bool stop_count = opt.stop_after_events != 0 && recorded_events >= opt.stop_after_events;
            if (events[h.idx].terminal || stop_count) {
                const State dy = field(yev);
                record_sample(h.t, yev, dy);
                traj.t_final = h.t;
                traj.y_final = main_part(yev);
                return yev;
            }
        }
        record_sample(solver.t(), solver.y(), solver.dy());
    }
    traj.t_final = solver.t();
    traj.y_final = main_part(solver.y());
    return solver.y();
}

} // namespace detail

/// Integrates dy/dt = field(y) on [t0, t1] (autonomous fields only).
template <int N, class F>
Trajectory<N> integrate(F&& field, const Vec<N>& y0, double t0, double t1, const IntegratorConfig& cfg = {},
                        std::span<const EventSpec<N>> events = {}, const IntegrateOptions& opt = {})
{
    Trajectory<N> traj;
    auto f = [&field](const Vec<N>& y) -> Vec<N> { return field(y); };
    detail::run<N, Vec<N>>(f, y0, t0, t1, cfg, events, opt, traj);
    return traj;
}

/// Integrates a System (rhs member) on [t0, t1].
template <class System>
Trajectory<System::dim> integrate_system(const System& sys, const Vec<System::dim>& y0, double t0, double t1,
                                         const IntegratorConfig& cfg = {},
                                         const std::vector<EventSpec<System::dim>>& events = {},
                                         const IntegrateOptions& opt = {})
{
    return integrate<System::dim>([&sys](const Vec<System::dim>& y) { return sys.rhs(y); }, y0, t0, t1, cfg,
                                  std::span<const EventSpec<System::dim>>(events), opt);
}

template <int N>
struct VariationalResult {
    Trajectory<N> trajectory;
    Mat<N> phi = Mat<N>::Identity();              // fundamental matrix at t1
    Vec<N> param_sensitivity = Vec<N>::Zero();    // d y(t1) / d parameter
};

/// Co-integrates y' = f(y), Phi' = J(y) Phi (Phi(t0) = I) and, when
/// dfdp is supplied, psi' = J psi + df/dp (psi(t0) = 0).
template <int N, class F, class Jac, class DfDp>
VariationalResult<N> integrate_with_variational(F&& field, Jac&& jacobian, DfDp&& dfdp, const Vec<N>& y0, double t0,
                                                double t1, const IntegratorConfig& cfg = {},
                                                std::span<const EventSpec<N>> events = {},
                                                const IntegrateOptions& opt = {})
{
    using Aug = Eigen::Matrix<double, N, N + 2>;
    Aug a0 = Aug::Zero();
    a0.col(0) = y0;
    a0.template block<N, N>(0, 1) = Mat<N>::Identity();
    auto f = [&](const Aug& a) -> Aug {
        const Vec<N> y = a.col(0);
        const Mat<N> J = jacobian(y);
        Aug d;
        d.col(0) = field(y);
        d.template block<N, N>(0, 1) = J * a.template block<N, N>(0, 1);
        d.col(N + 1) = J * a.col(N + 1) + dfdp(y);
        return d;
    };
    VariationalResult<N> out;
    const Aug a1 = detail::run<N, Aug>(f, a0, t0, t1, cfg, events, opt, out.trajectory);
    out.phi = a1.template block<N, N>(0, 1);
    out.param_sensitivity = a1.col(N + 1);
    return out;
}

template <int N, class F, class Jac>
VariationalResult<N> integrate_with_variational(F&& field, Jac&& jacobian, const Vec<N>& y0, double t0, double t1,
                                                const IntegratorConfig& cfg = {})
{
    return integrate_with_variational<N>(std::forward<F>(field), std::forward<Jac>(jacobian),
                                         [](const Vec<N>&) { return Vec<N>::Zero().eval(); }, y0, t0, t1, cfg);
}

/// Variational integration of a System, including d/d(parameter).
template <class System>
VariationalResult<System::dim> integrate_system_variational(const System& sys, const Vec<System::dim>& y0,
                                                            double t0, double t1, const IntegratorConfig& cfg = {})
{
    constexpr int N = System::dim;
    return integrate_with_variational<N>([&](const Vec<N>& y) { return sys.rhs(y); },
                                         [&](const Vec<N>& y) { return sys.jacobian(y); },
                                         [&](const Vec<N>& y) { return sys.parameter_derivative(y); }, y0, t0, t1,
                                         cfg);
}

} // namespace inak
