#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "inak/model.hpp"
#include "inak/ode.hpp"

using namespace inak;

namespace {

Vec<2> harmonic(const Vec<2>& y) { return {y[1], -y[0]}; }

double harmonic_error(double rtol)
{
    IntegratorConfig cfg;
    cfg.rtol = rtol;
    cfg.atol = rtol * 1e-2;
    cfg.max_step = 10.0;
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 20.0, cfg, {}, {.store_samples = false});
    return (tr.y_final - Vec<2>(std::cos(20.0), -std::sin(20.0))).norm();
}

} // namespace

TEST(Ode, ExponentialDecay)
{
    IntegratorConfig cfg;
    const auto tr = integrate<1>([](const Vec<1>& y) { return Vec<1>(-y); }, Vec<1>(1.0), 0.0, 1.0, cfg);
    EXPECT_NEAR(tr.y_final[0], std::exp(-1.0), 10 * cfg.rtol);
    EXPECT_DOUBLE_EQ(tr.t_final, 1.0);
}

TEST(Ode, HarmonicZeroCrossings)
{
    IntegratorConfig cfg;
    std::vector<EventSpec<2>> ev{coordinate_event<2>(0, 0.0, 0, "zero")};
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 30.0, cfg, ev);
    ASSERT_EQ(tr.events.size(), 10u);
    for (std::size_t k = 0; k < tr.events.size(); ++k) {
        const double expected = std::numbers::pi / 2 + static_cast<double>(k) * std::numbers::pi;
        EXPECT_NEAR(tr.events[k].t, expected, 1e-8);
    }
}

TEST(Ode, RisingOnlyEvents)
{
    std::vector<EventSpec<2>> ev{coordinate_event<2>(0, 0.0, +1, "up")};
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 30.0, {}, ev);
    ASSERT_EQ(tr.events.size(), 5u);
    for (std::size_t k = 0; k < tr.events.size(); ++k)
        EXPECT_NEAR(tr.events[k].t, 1.5 * std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(k), 1e-8);
}

TEST(Ode, EventStatesSatisfyCondition)
{
    const CoupledSystem c(integrator_neuron(8.0), resonator_neuron(25.0), 0.05, 0.1);
    std::vector<EventSpec<4>> ev{coordinate_event<4>(2, -50.0, 0, "V2"), coordinate_event<4>(0, -20.0, +1, "V1")};
    const auto tr = integrate_system(c, Eigen::Vector4d(-60, 0.01, -55, 0.2), 0.0, 500.0, {}, ev);
    ASSERT_GT(tr.events.size(), 5u);
    for (const auto& e : tr.events) {
        const double g = ev[static_cast<std::size_t>(e.index)].g(e.state);
        EXPECT_LE(std::abs(g), 1e-8 * (1.0 + e.state.cwiseAbs().maxCoeff()));
        EXPECT_GE(e.t, 0.0);
        EXPECT_LE(e.t, 500.0);
    }
}

TEST(Ode, TerminalEventStopsIntegration)
{
    std::vector<EventSpec<2>> ev{coordinate_event<2>(0, 0.0, -1, "down", true)};
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 30.0, {}, ev);
    EXPECT_NEAR(tr.t_final, std::numbers::pi / 2, 1e-8);
    EXPECT_EQ(tr.times.back(), tr.t_final);
}

TEST(Ode, StopAfterEvents)
{
    std::vector<EventSpec<2>> ev{coordinate_event<2>(0, 0.0, 0, "zero")};
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 100.0, {}, ev, {.stop_after_events = 3});
    ASSERT_EQ(tr.events.size(), 3u);
    EXPECT_NEAR(tr.t_final, 2.5 * std::numbers::pi, 1e-8);
}

TEST(Ode, TimesStrictlyIncreasing)
{
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 10.0);
    for (std::size_t i = 1; i < tr.times.size(); ++i) EXPECT_LT(tr.times[i - 1], tr.times[i]);
}

TEST(Ode, HermiteInterpolationIsAccurate)
{
    const auto tr = integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 10.0);
    for (double t = 0.05; t < 10.0; t += 0.37) EXPECT_NEAR(tr.at(t)[0], std::cos(t), 1e-5);
}

TEST(Ode, OrderOfConvergence)
{
    // Halving the tolerance must shrink the error by the 4/5-power law of the
    // embedded pair (local error ~ h^5 controlled by a 4th-order estimate).
    const double e0 = harmonic_error(1e-5);
    const double e1 = harmonic_error(1e-5 / 1024.0);
    const double per_halving = std::pow(e0 / e1, 1.0 / 10.0);
    EXPECT_GE(per_halving, std::pow(2.0, 0.8) * 0.9);
}

TEST(Ode, Deterministic)
{
    const CoupledSystem c(integrator_neuron(8.0), resonator_neuron(25.0), 0.05, 0.1);
    const auto a = integrate_system(c, Eigen::Vector4d(-60, 0.01, -55, 0.2), 0.0, 300.0);
    const auto b = integrate_system(c, Eigen::Vector4d(-60, 0.01, -55, 0.2), 0.0, 300.0);
    ASSERT_EQ(a.times.size(), b.times.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.times[i], b.times[i]);
        EXPECT_EQ(a.states[i], b.states[i]);
    }
}

TEST(Ode, Errors)
{
    IntegratorConfig cfg;
    cfg.max_time = 10.0;
    EXPECT_THROW((void)integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 20.0, cfg), Error);
    try {
        (void)integrate<1>([](const Vec<1>& y) { return Vec<1>(y[0] * y[0]); }, Vec<1>(1.0), 0.0, 2.0);
        FAIL() << "blow-up not reported";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepSizeUnderflow);
    }
    cfg = {};
    cfg.rtol = -1.0;
    EXPECT_THROW((void)integrate<2>(harmonic, Vec<2>(1.0, 0.0), 0.0, 1.0, cfg), Error);
}

TEST(Variational, LinearFieldMatchesMatrixExponential)
{
    Mat<3> A;
    A << -0.5, 1.0, 0.0, -1.0, -0.2, 0.3, 0.1, 0.0, -1.5;
    IntegratorConfig cfg;
    const auto r = integrate_with_variational<3>([&](const Vec<3>& y) { return Vec<3>(A * y); },
                                                 [&](const Vec<3>&) { return A; }, Vec<3>(1.0, 2.0, -1.0), 0.0,
                                                 2.0, cfg);
    const Mat<3> expected = (A * 2.0).exp();
    EXPECT_LE((r.phi - expected).cwiseAbs().maxCoeff(), 10 * cfg.rtol);
}

TEST(Variational, ZeroSpanGivesIdentity)
{
    Mat<2> A;
    A << 0, 1, -1, 0;
    const auto r = integrate_with_variational<2>([&](const Vec<2>& y) { return Vec<2>(A * y); },
                                                 [&](const Vec<2>&) { return A; }, Vec<2>(1.0, 0.0), 3.0, 3.0);
    EXPECT_EQ(r.phi, Mat<2>::Identity());
}

TEST(Variational, AbelLiouville)
{
    const CoupledSystem c(integrator_neuron(8.0), resonator_neuron(25.0), 0.05, 0.1);
    // Short span: over long spans det(Phi) underflows relative to |Phi|^4.
    const auto r = integrate_system_variational(c, Eigen::Vector4d(-60, 0.01, -55, 0.2), 0.0, 1.5);
    const auto& tr = r.trajectory;
    // Simpson's rule per step with the Hermite midpoint.
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
        const double a = tr.times[i], b = tr.times[i + 1];
        const double fa = c.jacobian(tr.states[i]).trace();
        const double fb = c.jacobian(tr.states[i + 1]).trace();
        const double fm = c.jacobian(tr.hermite(i, 0.5 * (a + b))).trace();
        integral += (b - a) / 6.0 * (fa + 4 * fm + fb);
    }
    const double det = r.phi.determinant();
    EXPECT_GT(det, 0.0);
    EXPECT_NEAR(det / std::exp(integral), 1.0, 1e-6) << "integral of trace = " << integral;
}

TEST(Variational, ParameterSensitivityMatchesFiniteDifference)
{
    const CoupledSystem c(integrator_neuron(8.0), resonator_neuron(25.0), 0.05, 0.1);
    IntegratorConfig cfg;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-12;
    const Eigen::Vector4d y0(-60, 0.01, -55, 0.2);
    const auto r = integrate_system_variational(c, y0, 0.0, 20.0, cfg);
    const double h = 1e-6;
    const auto p = integrate_system(c.with_q2(0.1 + h), y0, 0.0, 20.0, cfg);
    const auto m = integrate_system(c.with_q2(0.1 - h), y0, 0.0, 20.0, cfg);
    const Eigen::Vector4d fd = (p.y_final - m.y_final) / (2 * h);
    EXPECT_LE((fd - r.param_sensitivity).norm(), 1e-4 * std::max(1.0, fd.norm()));
}
