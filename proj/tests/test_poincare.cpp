#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "inak/model.hpp"
#include "inak/poincare.hpp"

using namespace inak;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec<2>> rigid_rotation(double rho, std::size_t n, double radius = 1.0)
{
    std::vector<Vec<2>> pts;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = 2.0 * kPi * std::fmod(rho * static_cast<double>(k), 1.0);
        pts.emplace_back(radius * std::cos(a) + 3.0, radius * std::sin(a) - 1.0);
    }
    return pts;
}

// r' = r (mu + 2 r^2 - r^4), theta' = 1 (stable cycle for -1 < mu).
struct CycleFold {
    static constexpr int dim = 2;
    double mu = 0.0;
    Vec<2> rhs(const Vec<2>& y) const
    {
        const double r2 = y.squaredNorm();
        const double h = mu + 2 * r2 - r2 * r2;
        return {y[0] * h - y[1], y[1] * h + y[0]};
    }
    CycleFold with_parameter(double m) const { return {m}; }
};

CoupledSystem coupled(double q2) { return {integrator_neuron(6.0), resonator_neuron(48.0), 0.05, q2}; }
const Vec<4> kSeed(-60.0, 0.003, -55.0, 0.4);
const EventSpec<4> kSpikeSection = coordinate_event<4>(0, -20.0, +1);

SectionOrbit<4> coupled_orbit(double q2, std::size_t n)
{
    SectionOptions opt;
    opt.transient_time = 5000.0;
    return section_orbit(coupled(q2), kSeed, kSpikeSection, n, opt);
}

} // namespace

TEST(Rotation, RigidRationalIsExact)
{
    const auto est = rotation_number(rigid_rotation(3.0 / 7.0, 700));
    EXPECT_TRUE(est.locked);
    EXPECT_EQ(est.p, 3);
    EXPECT_EQ(est.q, 7);
    EXPECT_EQ(est.rho, 3.0 / 7.0);
    EXPECT_LE(std::abs(est.measured - 3.0 / 7.0), 1.0 / (7.0 * 700.0));
}

TEST(Rotation, GoldenMeanIsQuasiperiodic)
{
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    const auto est = rotation_number(rigid_rotation(golden, 2000));
    EXPECT_FALSE(est.locked);
    EXPECT_NEAR(est.rho, golden, 1e-4);
}

TEST(Rotation, IndependentOfLiftStart)
{
    const auto pts = rigid_rotation(0.2718281828, 1500);
    const std::vector<Vec<2>> shifted(pts.begin() + 37, pts.end());
    const double a = rotation_number(pts).rho;
    const double b = rotation_number(shifted).rho;
    EXPECT_LE(std::abs(a - b), 2.0 / static_cast<double>(shifted.size()));
}

TEST(Rotation, FixedPointHasZeroRotation)
{
    const std::vector<Vec<2>> pts(600, Vec<2>(1.0, 2.0));
    const auto est = rotation_number(pts);
    EXPECT_TRUE(est.locked);
    EXPECT_EQ(est.q, 1);
    EXPECT_EQ(est.rho, 0.0);
}

TEST(Rotation, ScatteredPointsFailTheCurveFit)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec<2>> pts;
    while (pts.size() < 800) {
        const Vec<2> p(u(rng), u(rng));
        if (p.norm() <= 1.0) pts.push_back(p);
    }
    try {
        (void)rotation_number(pts);
        FAIL() << "expected CurveFitFailed";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CurveFitFailed);
    }
}

TEST(Rotation, ShortOrbitRejected)
{
    try {
        (void)rotation_number(rigid_rotation(0.3, 100));
        FAIL() << "expected WindowTooShort";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::WindowTooShort);
    }
}

TEST(Smoothness, CircleIsSmooth)
{
    const auto s = torus_smoothness(rigid_rotation((std::sqrt(5.0) - 1.0) / 2.0, 1000));
    EXPECT_TRUE(s.smooth);
    EXPECT_NEAR(s.score_deg, 360.0 / 1000.0, 0.2);
}

TEST(Smoothness, SixtyDegreeCornerIsFlagged)
{
    // Arc from 60 to 300 degrees closed by the two tangents, which meet at
    // (2, 0) with an interior angle of 60 degrees.
    std::vector<Vec<2>> pts;
    for (int i = 0; i < 15; ++i) {
        const double a = (60.0 + 240.0 * i / 14.0) * kPi / 180.0;
        pts.emplace_back(std::cos(a), std::sin(a));
    }
    pts.emplace_back(2.0, 0.0);
    const auto s = torus_smoothness(pts);
    EXPECT_FALSE(s.smooth);
    EXPECT_NEAR(s.score_deg, 120.0, 1e-9);
}

TEST(SectionOrbit, StableCycleCollapsesToOnePoint)
{
    const auto orbit = coupled_orbit(0.12, 50);
    ASSERT_EQ(orbit.points.size(), 50u);
    double spread = 0.0;
    for (const auto& p : orbit.points) spread = std::max(spread, (p - orbit.points.front()).norm());
    EXPECT_LE(spread, 1e-6);
    for (std::size_t i = 1; i < orbit.times.size(); ++i) EXPECT_GT(orbit.times[i], orbit.times[i - 1]);
    for (const auto& p : orbit.points) EXPECT_NEAR(p[0], -20.0, 1e-9);
}

TEST(SectionOrbit, CoupledTorusRegimes)
{
    const auto quasi = rotation_number(coupled_orbit(0.01, 1000).points);
    EXPECT_FALSE(quasi.locked);
    EXPECT_TRUE(torus_smoothness(coupled_orbit(0.01, 1000).points).smooth);
    const auto locked = rotation_number(coupled_orbit(0.03, 1000).points);
    EXPECT_TRUE(locked.locked);
    EXPECT_LE(std::abs(locked.measured - static_cast<double>(locked.p) / locked.q), 1.0 / (locked.q * 1000.0));
}

TEST(SectionOrbit, BreakdownBracket)
{
    BreakdownOptions opt;
    opt.parameter_tol = 1e-3;
    const auto b = bracket_torus_breakdown(coupled(0.0), 0.035, 0.04, kSeed, kSpikeSection, opt);
    EXPECT_LT(b.intact, b.broken);
    EXPECT_LE(b.broken - b.intact, 1e-3);
    EXPECT_GE(b.intact, 0.035);
    EXPECT_LE(b.broken, 0.04);
}

TEST(OrbitDiagram, ConstantAttractorGivesOnePointPerParameter)
{
    OrbitDiagramOptions opt;
    opt.section.transient_time = 50.0;
    opt.crossings = 200;
    const std::vector<double> mus{-0.5, -0.4, -0.3};
    const auto cols = orbit_diagram(CycleFold{}, mus, Vec<2>(1.3, 0.0), coordinate_event<2>(1, 0.0, +1), opt);
    ASSERT_EQ(cols.size(), 3u);
    for (const auto& c : cols) {
        ASSERT_TRUE(c.error.empty()) << c.error;
        ASSERT_EQ(c.values.size(), 200u);
        const auto [lo, hi] = std::minmax_element(c.values.begin(), c.values.end());
        EXPECT_LE(*hi - *lo, 1e-6);
        EXPECT_NEAR(*lo, std::sqrt(1.0 + std::sqrt(1.0 + c.parameter)), 1e-6);
    }
}

TEST(OrbitDiagram, DeterministicAcrossSeedingAndThreads)
{
    OrbitDiagramOptions opt;
    opt.section.transient_time = 1000.0;
    opt.crossings = 30;
    const std::vector<double> q2{0.1, 0.11, 0.12};
    const auto warm1 = orbit_diagram(coupled(0.0), q2, kSeed, kSpikeSection, opt);
    const auto warm2 = orbit_diagram(coupled(0.0), q2, kSeed, kSpikeSection, opt);
    opt.seeding = SeedPolicy::Cold;
    const auto cold1 = orbit_diagram(coupled(0.0), q2, kSeed, kSpikeSection, opt);
    opt.jobs = 3;
    const auto cold3 = orbit_diagram(coupled(0.0), q2, kSeed, kSpikeSection, opt);
    for (std::size_t i = 0; i < q2.size(); ++i) {
        EXPECT_EQ(warm1[i].values, warm2[i].values);
        EXPECT_EQ(cold1[i].values, cold3[i].values);
    }
}

TEST(OrbitDiagram, FailuresAreRecordedPerPoint)
{
    OrbitDiagramOptions opt;
    opt.section.max_time = 50.0;
    opt.section.transient_time = 0.0;
    opt.crossings = 100;
    const auto cols = orbit_diagram(coupled(0.0), {0.1, 0.2}, kSeed, kSpikeSection, opt);
    ASSERT_EQ(cols.size(), 2u);
    for (const auto& c : cols) EXPECT_NE(c.error.find("NoRecurrence"), std::string::npos);
}
