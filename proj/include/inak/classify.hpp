#pragma once

// Oscillation-pattern taxonomy of the coupled pair: spike trains, burst
// grouping, mixed-mode signatures, synchrony and the drive-plus-coupling
// input signals.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "inak/error.hpp"
#include "inak/model.hpp"
#include "inak/ode.hpp"

namespace inak {

enum class Pattern { PhaseLocking, TS_MMO, TS_Bursting, TS_Sub, Intermittent, Synchronous, Quiescent };

constexpr std::string_view to_string(Pattern p)
{
    switch (p) {
    case Pattern::PhaseLocking: return "PhaseLocking";
    case Pattern::TS_MMO: return "TS_MMO";
    case Pattern::TS_Bursting: return "TS_Bursting";
    case Pattern::TS_Sub: return "TS_Sub";
    case Pattern::Intermittent: return "Intermittent";
    case Pattern::Synchronous: return "Synchronous";
    case Pattern::Quiescent: return "Quiescent";
    }
    return "unknown";
}

struct SpikeTrain {
    std::vector<double> times;
    std::vector<double> peaks;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

struct ClassifyConfig {
    double threshold = -20.0;       // mV
    double min_separation = 1.0;    // ms
    double small_osc_floor = 2.0;   // mV peak-to-peak
    double gap_factor = 3.0;        // burst gap / median ISI
    double sync_offset = 2.0;       // ms
    double sync_index = 0.95;
    std::size_t min_spikes = 50;    // neuron-I spikes in the window
    std::size_t epoch_isis = 3;     // ISIs per spiking epoch for intermittency
    double epoch_cv = 0.5;          // irregularity of epoch durations for intermittency
    int max_period = 64;            // return-map period cap for `periodic`
    double period_tol = 1e-4;       // relative to the return-map point spread
};

struct PatternReport {
    Pattern label = Pattern::Quiescent;
    std::size_t spikes_1 = 0;
    std::size_t spikes_2 = 0;
    std::size_t small_oscillations = 0; // neuron II
    std::size_t bursts = 0;             // neuron-II spike groups
    std::string mmo_signature;
    double synchrony_index = 0.0;
    double max_sync_offset = 0.0;       // ms, over neuron-I spikes
    double mean_abs_dv_at_spikes = 0.0; // |V1 - V2| at neuron-I spikes
    std::string neuron2_label;          // "k-burst" when neuron II fires k spikes per neuron-I period
    bool periodic = false;
    double window_start = 0.0;
    double window_end = 0.0;
    ClassifyConfig config;
};

namespace detail {

template <int N>
double locate_up_crossing(const Trajectory<N>& tr, std::size_t i, int index, double level)
{
    double a = tr.times[i], b = tr.times[i + 1];
    for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        (tr.hermite(i, m)[index] < level ? a : b) = m;
    }
    return 0.5 * (a + b);
}

template <int N>
double refine_peak(const Trajectory<N>& tr, std::size_t i, int index)
{
    const std::size_t lo = i > 0 ? i - 1 : i;
    const std::size_t hi = std::min(i + 1, tr.size() - 1);
    double best = tr.states[i][index];
    for (std::size_t k = lo; k < hi; ++k) {
        for (int s = 1; s < 32; ++s) {
            const double t = tr.times[k] + (tr.times[k + 1] - tr.times[k]) * s / 32.0;
            best = std::max(best, tr.hermite(k, t)[index]);
        }
    }
    return best;
}

} // namespace detail

/// Upward threshold crossings of coordinate `index`, merged within
/// min_separation; peaks from the dense output.
template <int N>
[[nodiscard]] SpikeTrain detect_spikes(const Trajectory<N>& tr, int index, double threshold = -20.0,
                                       double min_separation = 1.0)
{
    SpikeTrain out;
    if (tr.size() < 2) return out;
    std::optional<std::size_t> open; // sample index of the current spike's start
    std::size_t peak_at = 0;
    auto close = [&] {
        if (open) out.peaks.push_back(detail::refine_peak(tr, peak_at, index));
        open.reset();
    };
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
        const double a = tr.states[i][index], b = tr.states[i + 1][index];
        if (open && b > tr.states[peak_at][index]) peak_at = i + 1;
        if (a < threshold && b >= threshold) {
            const double t = detail::locate_up_crossing(tr, i, index, threshold);
            if (!out.times.empty() && t - out.times.back() < min_separation) continue;
            close();
            out.times.push_back(t);
            open = i;
            peak_at = i + 1;
        }
    }
    close();
    return out;
}

struct InputSignal {
    std::vector<double> times;
    std::vector<double> Y; // drive plus coupling seen by neuron I
    std::vector<double> Z; // drive plus coupling seen by neuron II
};

[[nodiscard]] inline InputSignal input_signal(const Trajectory<4>& tr, const CoupledSystem& c)
{
    InputSignal s;
    s.times = tr.times;
    s.Y.reserve(tr.size());
    s.Z.reserve(tr.size());
    for (const auto& y : tr.states) {
        s.Y.push_back(c.I1() + c.q1() * (y[2] - y[0]));
        s.Z.push_back(c.I2() + c.q2() * (y[0] - y[2]));
    }
    return s;
}

/// Number of subthreshold oscillations of coordinate `index` in [t0, t1]:
/// local maxima below threshold rising at least `floor` above the preceding
/// local minimum.
template <int N>
[[nodiscard]] std::size_t count_small_oscillations(const Trajectory<N>& tr, int index, double t0, double t1,
                                                   double threshold, double floor)
{
    std::size_t count = 0;
    double last_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
        if (tr.times[i] < t0 || tr.times[i] > t1) continue;
        const double a = tr.states[i - 1][index], b = tr.states[i][index], c = tr.states[i + 1][index];
        if (b <= a && b < c) last_min = std::min(last_min, b);
        if (b >= a && b > c) {
            if (b < threshold && b - last_min >= floor) ++count;
            last_min = std::numeric_limits<double>::infinity();
        }
    }
    return count;
}

struct MmoSignature {
    bool periodic = false;
    std::string signature;                     // repeating unit, when periodic
    std::vector<std::string> window_signatures; // per window, when not periodic
};

namespace detail {

/// L^s notation of a per-spike sequence of small-oscillation counts: runs of
/// spikes followed by zero small oscillations merge into one large group.
inline std::string mmo_notation(const std::vector<std::size_t>& small)
{
    std::string out;
    std::size_t large = 0;
    for (const std::size_t s : small) {
        ++large;
        if (s == 0) continue;
        if (!out.empty()) out += ' ';
        out += std::to_string(large) + '^' + std::to_string(s);
        large = 0;
    }
    if (large > 0) {
        if (!out.empty()) out += ' ';
        out += std::to_string(large) + "^0";
    }
    return out;
}

/// Smallest p with seq[k + p] == seq[k] for all k, seen at least 3 times.
inline std::optional<std::size_t> exact_period(const std::vector<std::size_t>& seq)
{
    for (std::size_t p = 1; 3 * p <= seq.size(); ++p) {
        bool ok = true;
        for (std::size_t k = 0; k + p < seq.size() && ok; ++k) ok = seq[k] == seq[k + p];
        if (ok) return p;
    }
    return std::nullopt;
}

/// Rotates a repeating unit so it ends on a spike with small oscillations,
/// giving a canonical starting point.
inline std::vector<std::size_t> canonical_unit(std::vector<std::size_t> unit)
{
    const auto it = std::find_if(unit.rbegin(), unit.rend(), [](std::size_t s) { return s > 0; });
    if (it != unit.rend()) std::rotate(unit.begin(), it.base(), unit.end());
    return unit;
}

} // namespace detail

/// Per-spike small-oscillation counts of neuron II between its consecutive spikes.
[[nodiscard]] inline std::vector<std::size_t> small_counts_between_spikes(const Trajectory<4>& tr,
                                                                          const SpikeTrain& spikes,
                                                                          const ClassifyConfig& cfg)
{
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k + 1 < spikes.size(); ++k) {
        counts.push_back(count_small_oscillations(tr, 2, spikes.times[k], spikes.times[k + 1], cfg.threshold,
                                                  cfg.small_osc_floor));
    }
    return counts;
}

/// Mixed-mode signature of neuron II. Aperiodic (chaotic) sequences yield
/// per-window signatures instead of a single repeating unit.
[[nodiscard]] inline MmoSignature mmo_signature(const Trajectory<4>& tr, const ClassifyConfig& cfg = {},
                                                std::size_t window_spikes = 12)
{
    const SpikeTrain s2 = detect_spikes(tr, 2, cfg.threshold, cfg.min_separation);
    const auto counts = small_counts_between_spikes(tr, s2, cfg);
    MmoSignature sig;
    if (counts.empty()) return sig;
    if (const auto p = detail::exact_period(counts)) {
        sig.periodic = true;
        sig.signature = detail::mmo_notation(
            detail::canonical_unit(std::vector<std::size_t>(counts.begin(), counts.begin() + static_cast<long>(*p))));
        return sig;
    }
    for (std::size_t k = 0; k < counts.size(); k += window_spikes) {
        const auto end = std::min(counts.size(), k + window_spikes);
        sig.window_signatures.push_back(detail::mmo_notation(
            std::vector<std::size_t>(counts.begin() + static_cast<long>(k), counts.begin() + static_cast<long>(end))));
    }
    return sig;
}

namespace detail {

struct SpikeGroups {
    std::vector<std::size_t> sizes;     // spikes per group
    std::vector<double> durations;      // first to last spike, ms
    std::vector<double> gaps;           // silent gaps between groups, ms
};

inline SpikeGroups group_spikes(const SpikeTrain& s, double gap_factor)
{
    SpikeGroups g;
    if (s.size() < 2) return g;
    std::vector<double> isi;
    for (std::size_t k = 1; k < s.size(); ++k) isi.push_back(s.times[k] - s.times[k - 1]);
    std::vector<double> sorted = isi;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::size_t start = 0;
    for (std::size_t k = 0; k <= isi.size(); ++k) {
        const bool boundary = k == isi.size() || isi[k] >= gap_factor * median;
        if (!boundary) continue;
        g.sizes.push_back(k - start + 1);
        g.durations.push_back(s.times[k] - s.times[start]);
        if (k < isi.size()) g.gaps.push_back(isi[k]);
        start = k + 1;
    }
    return g;
}

inline double coefficient_of_variation(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (mean == 0.0) return 0.0;
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size() - 1)) / mean;
}

/// True when the states at the given times repeat with some period q <= cap.
inline bool return_map_periodic(const Trajectory<4>& tr, const std::vector<double>& times, const ClassifyConfig& cfg)
{
    if (times.size() < 3) return false;
    std::vector<Vec<4>> pts;
    for (const double t : times) pts.push_back(tr.at(t));
    Vec<4> lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double spread = std::max((hi - lo).norm(), 1e-9);
    for (int q = 1; q <= cfg.max_period && 2 * static_cast<std::size_t>(q) < pts.size(); ++q) {
        double worst = 0.0;
        for (std::size_t k = 0; k + static_cast<std::size_t>(q) < pts.size(); ++k)
            worst = std::max(worst, (pts[k + static_cast<std::size_t>(q)] - pts[k]).norm());
        if (worst <= cfg.period_tol * std::max(spread, 1.0)) return true;
    }
    return false;
}

} // namespace detail

/// Classifies a post-transient trajectory of the coupled pair.
[[nodiscard]] inline PatternReport classify_pattern(const Trajectory<4>& tr, const CoupledSystem& c,
                                                    const ClassifyConfig& cfg = {})
{
    PatternReport r;
    r.config = cfg;
    if (tr.size() < 2 || tr.times.back() - tr.times.front() < 2.0 * cfg.min_separation) {
        throw Error(ErrorKind::WindowTooShort, "trajectory window is too short to classify");
    }
    r.window_start = tr.times.front();
    r.window_end = tr.times.back();
    const SpikeTrain s1 = detect_spikes(tr, 0, cfg.threshold, cfg.min_separation);
    const SpikeTrain s2 = detect_spikes(tr, 2, cfg.threshold, cfg.min_separation);
    r.spikes_1 = s1.size();
    r.spikes_2 = s2.size();
    r.small_oscillations =
        count_small_oscillations(tr, 2, r.window_start, r.window_end, cfg.threshold, cfg.small_osc_floor);

    if (s1.size() == 0) {
        r.label = Pattern::Quiescent;
        return r;
    }
    if (s1.size() < cfg.min_spikes) {
        throw Error(ErrorKind::WindowTooShort, "only " + std::to_string(s1.size()) + " neuron-I spikes (need " +
                                                   std::to_string(cfg.min_spikes) + ")");
    }
    double dv = 0.0;
    for (const double t : s1.times) {
        const auto y = tr.at(t);
        dv += std::abs(y[0] - y[2]);
    }
    r.mean_abs_dv_at_spikes = dv / static_cast<double>(s1.size());
    r.periodic = detail::return_map_periodic(tr, s1.times, cfg);
    (void)c;

    if (s2.size() == 0) {
        r.label = Pattern::TS_Sub;
        return r;
    }

    // Synchrony: neuron-I spikes matched to a neuron-II spike within the offset.
    std::size_t matched = 0;
    for (const double t : s1.times) {
        const auto it = std::lower_bound(s2.times.begin(), s2.times.end(), t);
        double off = std::numeric_limits<double>::infinity();
        if (it != s2.times.end()) off = std::min(off, *it - t);
        if (it != s2.times.begin()) off = std::min(off, t - *std::prev(it));
        r.max_sync_offset = std::max(r.max_sync_offset, off);
        if (off <= cfg.sync_offset) ++matched;
    }
    r.synchrony_index = static_cast<double>(matched) / static_cast<double>(std::max(s1.size(), s2.size()));

    // Neuron-II spikes per neuron-I period.
    {
        std::optional<std::size_t> per;
        bool constant = true;
        for (std::size_t k = 0; k + 1 < s1.size() && constant; ++k) {
            const auto a = std::lower_bound(s2.times.begin(), s2.times.end(), s1.times[k]);
            const auto b = std::lower_bound(s2.times.begin(), s2.times.end(), s1.times[k + 1]);
            const auto n = static_cast<std::size_t>(b - a);
            if (!per) per = n;
            constant = *per == n;
        }
        if (constant && per && *per > 0) r.neuron2_label = std::to_string(*per) + "-burst";
    }

    const auto counts = small_counts_between_spikes(tr, s2, cfg);
    {
        const MmoSignature sig = mmo_signature(tr, cfg);
        r.mmo_signature = sig.periodic ? sig.signature : "";
    }
    const detail::SpikeGroups groups = detail::group_spikes(s2, cfg.gap_factor);
    r.bursts = groups.sizes.size();

    if (r.synchrony_index >= cfg.sync_index && r.max_sync_offset <= cfg.sync_offset) {
        r.label = Pattern::Synchronous;
        return r;
    }
    if (groups.sizes.size() >= 3) {
        std::vector<double> sizes(groups.sizes.begin(), groups.sizes.end());
        std::vector<double> sorted = sizes;
        std::sort(sorted.begin(), sorted.end());
        const bool long_epochs = sorted[sorted.size() / 2] >= static_cast<double>(cfg.epoch_isis + 1);
        const bool irregular = detail::coefficient_of_variation(groups.durations) > cfg.epoch_cv ||
                               detail::coefficient_of_variation(groups.gaps) > cfg.epoch_cv;
        if (long_epochs && irregular) {
            r.label = Pattern::Intermittent;
            return r;
        }
    }
    if (groups.sizes.size() >= 2 && *std::max_element(groups.sizes.begin(), groups.sizes.end()) >= 2) {
        r.label = Pattern::TS_Bursting;
        return r;
    }
    if (std::any_of(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; })) {
        r.label = Pattern::TS_MMO;
        return r;
    }
    r.label = Pattern::PhaseLocking;
    return r;
}

struct AnalysisWindow {
    double duration = 6000.0;     // ms, total integration time
    double min_transient = 2000.0; // ms
    double transient_fraction = 0.2;
    IntegratorConfig integrator{};

    [[nodiscard]] double transient() const { return std::max(transient_fraction * duration, min_transient); }
};

/// Integrates from x0 and keeps the post-transient part.
[[nodiscard]] inline Trajectory<4> simulate_window(const CoupledSystem& c, const Vec<4>& x0,
                                                   const AnalysisWindow& w = {})
{
    const double t0 = w.transient();
    if (!(w.duration > t0)) throw Error(ErrorKind::ConfigInvalid, "analysis window shorter than its transient");
    return integrate<4>([&](const Vec<4>& y) { return c.rhs(y); }, x0, 0.0, w.duration, w.integrator, {},
                        {.record_from = t0});
}

struct ProbeResult {
    Vec<4> initial = Vec<4>::Zero();
    std::optional<PatternReport> report;
    std::string error; // set when the item failed
};

/// Classifies the attractor reached from each initial condition.
[[nodiscard]] inline std::vector<ProbeResult> multistability_probe(const CoupledSystem& c,
                                                                   const std::vector<Vec<4>>& initial,
                                                                   const ClassifyConfig& cfg = {},
                                                                   const AnalysisWindow& w = {})
{
    if (initial.empty()) throw Error(ErrorKind::ConfigInvalid, "multistability probe needs initial conditions");
    std::vector<ProbeResult> out;
    for (const auto& x0 : initial) {
        ProbeResult p;
        p.initial = x0;
        try {
            p.report = classify_pattern(simulate_window(c, x0, w), c, cfg);
        } catch (const Error& e) {
            p.error = e.what();
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace inak
