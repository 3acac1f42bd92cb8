#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "inak/classify.hpp"

using namespace inak;

namespace {

constexpr double kPi = std::numbers::pi;

using Signal = std::function<double(double)>;

// Samples two voltage signals on a uniform grid; gating variables are held at
// zero. Derivatives come from central differences so the dense output is a
// faithful cubic interpolant.
Trajectory<4> synthetic(const Signal& v1, const Signal& v2, double t1, double dt = 0.02)
{
    Trajectory<4> tr;
    const double h = 1e-5;
    const auto n = static_cast<std::size_t>(std::llround(t1 / dt));
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) * dt;
        tr.times.push_back(t);
        tr.states.emplace_back(v1(t), 0.0, v2(t), 0.0);
        tr.derivatives.emplace_back((v1(t + h) - v1(t - h)) / (2 * h), 0.0, (v2(t + h) - v2(t - h)) / (2 * h), 0.0);
    }
    tr.y_final = tr.states.back();
    return tr;
}

double pulse(double t, double at, double width, double height)
{
    const double x = (t - at) / width;
    return height * std::exp(-x * x);
}

// Baseline -65 mV; spikes reach +30 mV; small bumps rise 5 mV.
struct Train {
    std::vector<double> spikes;
    std::vector<double> bumps;
    double operator()(double t) const
    {
        double v = -65.0;
        for (const double s : spikes)
            if (std::abs(t - s) < 5.0) v += pulse(t, s, 0.5, 95.0);
        for (const double b : bumps)
            if (std::abs(t - b) < 10.0) v += pulse(t, b, 1.5, 5.0);
        return v;
    }
};

Train tonic(double period, double offset, double t1)
{
    Train tr;
    for (double t = offset; t < t1 - 5.0; t += period) tr.spikes.push_back(t);
    return tr;
}

// Neuron II from a per-spike sequence of small-oscillation counts, 10 ms apart.
Train from_counts(const std::vector<std::size_t>& counts, std::size_t repeats)
{
    Train tr;
    double t = 7.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        for (const std::size_t s : counts) {
            tr.spikes.push_back(t);
            t += 10.0;
            for (std::size_t k = 0; k < s; ++k, t += 10.0) tr.bumps.push_back(t);
        }
    }
    return tr;
}

CoupledSystem coupled(double q2) { return {integrator_neuron(6.0), resonator_neuron(48.0), 0.05, q2}; }
const Vec<4> kSeed(-60.0, 0.003, -55.0, 0.4);

// Oracle for the synchrony predicate: largest distance from a neuron-I spike
// to the nearest neuron-II spike, by brute force.
double max_offset(const SpikeTrain& a, const SpikeTrain& b)
{
    double worst = 0.0;
    for (const double t : a.times) {
        double best = std::numeric_limits<double>::infinity();
        for (const double u : b.times) best = std::min(best, std::abs(t - u));
        worst = std::max(worst, best);
    }
    return worst;
}

} // namespace

TEST(DetectSpikes, SineBelowThresholdHasNoSpikes)
{
    const auto tr = synthetic([](double t) { return -60.0 + 10.0 * std::sin(t); }, [](double) { return -65.0; }, 100.0);
    EXPECT_EQ(detect_spikes(tr, 0).size(), 0u);
}

TEST(DetectSpikes, SineCrossingsMatchClosedForm)
{
    // V = -30 + 50 sin(w t) crosses -20 upward where sin(w t) = 0.2.
    const double w = 2.0 * kPi / 25.0;
    const auto tr = synthetic([&](double t) { return -30.0 + 50.0 * std::sin(w * t); }, [](double) { return -65.0; },
                              500.0);
    const auto s = detect_spikes(tr, 0);
    ASSERT_EQ(s.size(), 20u);
    for (std::size_t k = 0; k < s.size(); ++k) {
        EXPECT_NEAR(s.times[k], (std::asin(0.2) + 2.0 * kPi * static_cast<double>(k)) / w, 1e-6);
        EXPECT_NEAR(s.peaks[k], 20.0, 1e-4);
        EXPECT_GT(s.peaks[k], -20.0);
    }
}

TEST(DetectSpikes, RippleIsMergedWithinMinimumSeparation)
{
    // Upward crossings every 0.2 ms; greedy merging at 0.9 ms keeps every fifth.
    const auto tr = synthetic([](double t) { return -20.0 + 5.0 * std::sin(2.0 * kPi * (t - 0.05) / 0.2); },
                              [](double) { return -65.0; }, 10.0, 0.002);
    const auto s = detect_spikes(tr, 0, -20.0, 0.9);
    std::vector<double> expected;
    for (int k = 0; k < 50; ++k) {
        const double t = 0.05 + 0.2 * k;
        if (t > 10.0 - 0.002) break;
        if (expected.empty() || t - expected.back() >= 0.9) expected.push_back(t);
    }
    ASSERT_EQ(s.size(), expected.size());
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(s.times[k], expected[k], 1e-6);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(s.times[k], s.times[k - 1]);
}

TEST(InputSignal, EqualVoltagesLeaveDrivesUnchanged)
{
    const auto tr = synthetic([](double t) { return -60.0 + std::sin(t); }, [](double t) { return -60.0 + std::sin(t); },
                              20.0);
    const auto c = coupled(0.3);
    const auto s = input_signal(tr, c);
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        EXPECT_EQ(s.Y[i], 6.0);
        EXPECT_EQ(s.Z[i], 48.0);
    }
}

TEST(InputSignal, MatchesRecomputationFromVoltageColumns)
{
    const auto c = coupled(0.2);
    const auto tr = integrate<4>([&](const Vec<4>& y) { return c.rhs(y); }, kSeed, 0.0, 200.0, {});
    const auto s = input_signal(tr, c);
    ASSERT_EQ(s.times.size(), tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double v1 = tr.states[i][0], v2 = tr.states[i][2];
        EXPECT_NEAR(s.Y[i], 6.0 + 0.05 * (v2 - v1), 1e-12);
        EXPECT_NEAR(s.Z[i], 48.0 + 0.2 * (v1 - v2), 1e-12);
    }
}

TEST(Classify, SyntheticLabels)
{
    const double t1 = 1500.0;
    const Train one = tonic(20.0, 2.0, t1);

    const auto quiet = synthetic([](double) { return -65.0; }, [](double) { return -65.0; }, t1);
    EXPECT_EQ(classify_pattern(quiet, coupled(0.1)).label, Pattern::Quiescent);

    const auto sub = synthetic(one, [](double t) { return -65.0 + 4.0 * std::sin(t); }, t1);
    const auto rs = classify_pattern(sub, coupled(0.1));
    EXPECT_EQ(rs.label, Pattern::TS_Sub);
    EXPECT_EQ(rs.spikes_2, 0u);
    EXPECT_GT(rs.small_oscillations, 0u);

    Train sync_train = one;
    for (double& s : sync_train.spikes) s += 0.5;
    const auto sync = classify_pattern(synthetic(one, sync_train, t1), coupled(0.1));
    EXPECT_EQ(sync.label, Pattern::Synchronous);
    EXPECT_EQ(sync.neuron2_label, "1-burst");
    EXPECT_NEAR(sync.max_sync_offset, 0.5, 1e-6);

    const auto locked = classify_pattern(synthetic(one, tonic(20.0, 9.0, t1), t1), coupled(0.1));
    EXPECT_EQ(locked.label, Pattern::PhaseLocking);
    EXPECT_TRUE(locked.periodic);

    const auto mmo = classify_pattern(synthetic(one, from_counts({3}, 37), t1), coupled(0.1));
    EXPECT_EQ(mmo.label, Pattern::TS_MMO);
    EXPECT_EQ(mmo.mmo_signature, "1^3");

    Train burst;
    for (double b = 10.0; b < t1 - 40.0; b += 60.0)
        for (int k = 0; k < 3; ++k) burst.spikes.push_back(b + 5.0 * k);
    const auto rb = classify_pattern(synthetic(one, burst, t1), coupled(0.1));
    EXPECT_EQ(rb.label, Pattern::TS_Bursting);
    EXPECT_GE(rb.bursts, 20u);
}

TEST(Classify, IrregularEpochsAreIntermittent)
{
    const double t1 = 3000.0;
    Train ii;
    double t = 10.0;
    const std::vector<int> epoch{5, 14, 6, 22, 8, 4, 17, 9};
    const std::vector<double> silence{60.0, 220.0, 45.0, 140.0, 300.0, 70.0, 160.0, 90.0};
    for (std::size_t e = 0; e < epoch.size(); ++e) {
        for (int k = 0; k < epoch[e]; ++k, t += 8.0) ii.spikes.push_back(t);
        for (double b = t + 5.0; b < t + silence[e] - 5.0; b += 10.0) ii.bumps.push_back(b);
        t += silence[e];
    }
    ASSERT_LT(t, t1);
    const auto r = classify_pattern(synthetic(tonic(20.0, 2.0, t1), ii, t1), coupled(0.1));
    EXPECT_EQ(r.label, Pattern::Intermittent);
    EXPECT_EQ(r.bursts, epoch.size());
}

TEST(Classify, TooFewIntegratorSpikesIsRejected)
{
    const auto tr = synthetic(tonic(20.0, 2.0, 400.0), [](double) { return -65.0; }, 400.0);
    try {
        (void)classify_pattern(tr, coupled(0.1));
        FAIL() << "expected WindowTooShort";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::WindowTooShort);
    }
}

TEST(MmoSignature, PeriodicUnitIsRunLengthEncoded)
{
    const double t1 = 2000.0;
    const auto sig = mmo_signature(synthetic(tonic(20.0, 2.0, t1), from_counts({1, 0, 2}, 25), t1));
    EXPECT_TRUE(sig.periodic);
    EXPECT_EQ(sig.signature, "1^1 2^2");
}

TEST(MmoSignature, PureTonicIsDegenerate)
{
    const double t1 = 1000.0;
    const auto sig = mmo_signature(synthetic(tonic(20.0, 2.0, t1), tonic(15.0, 3.0, t1), t1));
    EXPECT_TRUE(sig.periodic);
    EXPECT_EQ(sig.signature, "1^0");
}

TEST(MmoSignature, AperiodicSequenceGivesWindowSignatures)
{
    std::vector<std::size_t> counts;
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int k = 0; k < 60; ++k) counts.push_back(1 + static_cast<std::size_t>(3.0 * std::fmod(k * golden, 1.0)));
    const double t1 = 3000.0;
    const auto sig = mmo_signature(synthetic(tonic(20.0, 2.0, t1), from_counts(counts, 1), t1));
    EXPECT_FALSE(sig.periodic);
    EXPECT_TRUE(sig.signature.empty());
    ASSERT_GE(sig.window_signatures.size(), 2u);
    EXPECT_NE(sig.window_signatures[0], sig.window_signatures[1]);
}

TEST(Classify, CoupledLabelsSatisfyTheirPredicates)
{
    for (const double q2 : {0.0, 0.2, 0.5}) {
        const auto c = coupled(q2);
        const auto tr = simulate_window(c, kSeed);
        const auto r = classify_pattern(tr, c);
        const auto s1 = detect_spikes(tr, 0);
        const auto s2 = detect_spikes(tr, 2);
        EXPECT_GE(s1.size(), 50u);
        EXPECT_EQ(r.spikes_2, s2.size());
        switch (r.label) {
        case Pattern::TS_Sub: EXPECT_EQ(s2.size(), 0u) << q2; break;
        case Pattern::Synchronous:
            EXPECT_LE(max_offset(s1, s2), 2.0) << q2;
            EXPECT_EQ(r.neuron2_label, "1-burst") << q2;
            break;
        case Pattern::TS_MMO: EXPECT_GT(r.small_oscillations, 0u) << q2; break;
        default: break;
        }
    }
}

TEST(Classify, DeterministicAndStableUnderTransientDoubling)
{
    for (const double q2 : {0.2, 0.5}) {
        const auto c = coupled(q2);
        AnalysisWindow w;
        const auto a = classify_pattern(simulate_window(c, kSeed, w), c);
        const auto b = classify_pattern(simulate_window(c, kSeed, w), c);
        EXPECT_EQ(a.label, b.label);
        EXPECT_EQ(a.spikes_2, b.spikes_2);
        EXPECT_EQ(a.synchrony_index, b.synchrony_index);
        AnalysisWindow longer = w;
        longer.min_transient = 2.0 * w.transient();
        longer.duration = w.duration + w.transient();
        ASSERT_DOUBLE_EQ(longer.duration - longer.transient(), w.duration - w.transient());
        EXPECT_EQ(classify_pattern(simulate_window(c, kSeed, longer), c).label, a.label) << q2;
    }
}

TEST(MultistabilityProbe, NearbySeedsAgreeAndErrorsStayPerItem)
{
    const auto c = coupled(0.5);
    const Vec<4> nudge(0.01, 0.0, -0.01, 0.0);
    const auto res = multistability_probe(c, {kSeed, kSeed + nudge});
    ASSERT_EQ(res.size(), 2u);
    ASSERT_TRUE(res[0].report && res[1].report);
    EXPECT_EQ(res[0].report->label, res[1].report->label);

    ClassifyConfig strict;
    strict.min_spikes = 100000;
    const auto failed = multistability_probe(c, {kSeed}, strict);
    ASSERT_EQ(failed.size(), 1u);
    EXPECT_FALSE(failed[0].report);
    EXPECT_NE(failed[0].error.find("WindowTooShort"), std::string::npos);

    EXPECT_THROW((void)multistability_probe(c, {}), Error);
}
