#pragma once

// Command-line front end. Every subcommand writes CSV or JSON into --out and
// prints a one-line summary; errors go to stderr as a JSON object.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "inak/classify.hpp"
#include "inak/csv.hpp"
#include "inak/cycles.hpp"
#include "inak/equilibria.hpp"
#include "inak/params_io.hpp"
#include "inak/parallel.hpp"
#include "inak/poincare.hpp"

#ifndef INAK_SCENARIO_DIR
#define INAK_SCENARIO_DIR "scenarios"
#endif

namespace inak::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { Ok = 0, ConfigError = 2, AnalysisError = 3 };

struct Globals {
    std::string params;
    std::string out = ".";
    double rtol = 1e-8;
    double atol = 1e-10;
    std::string seed_policy = "warm";
    unsigned jobs = 1;
    std::string scenario_dir = INAK_SCENARIO_DIR;

    [[nodiscard]] IntegratorConfig integrator() const
    {
        IntegratorConfig cfg;
        cfg.rtol = rtol;
        cfg.atol = atol;
        cfg.validate();
        return cfg;
    }
};

const std::vector<std::string> kCoupledNames{"V1", "n1", "V2", "n2"};
const Vec<4> kDefaultSeed(-60.0, 0.003, -55.0, 0.4);

[[nodiscard]] inline Error config_error(const std::string& what) { return {ErrorKind::ConfigInvalid, what}; }

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    int n = 1;

    [[nodiscard]] std::vector<double> grid() const
    {
        std::vector<double> v;
        for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        return v;
    }
};

[[nodiscard]] inline double parse_number(const std::string& s)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        throw config_error("not a number: '" + s + "'");
    }
    if (used != s.size()) throw config_error("not a number: '" + s + "'");
    return x;
}

[[nodiscard]] inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

/// "v", "a:b" (with a default count) or "a:b:n".
[[nodiscard]] inline Range parse_range(const std::string& s, int default_n = 2)
{
    const auto parts = split(s, ':');
    Range r;
    if (parts.size() == 1) {
        r.lo = r.hi = parse_number(parts[0]);
        return r;
    }
    if (parts.size() != 2 && parts.size() != 3) throw config_error("range must be v, a:b or a:b:n, got '" + s + "'");
    r.lo = parse_number(parts[0]);
    r.hi = parse_number(parts[1]);
    r.n = default_n;
    if (parts.size() == 3) {
        const double n = parse_number(parts[2]);
        if (n < 1 || n != std::floor(n)) throw config_error("range count must be a positive integer");
        r.n = static_cast<int>(n);
    }
    if (r.n == 1 && r.lo != r.hi) throw config_error("a one-point range needs equal endpoints");
    return r;
}

[[nodiscard]] inline Vec<4> parse_state(const std::string& s)
{
    const auto parts = split(s, ',');
    if (parts.size() != 4) throw config_error("initial condition needs 4 comma-separated values");
    Vec<4> x;
    for (int i = 0; i < 4; ++i) x[i] = parse_number(parts[static_cast<std::size_t>(i)]);
    return x;
}

[[nodiscard]] inline int coordinate_index(const std::string& name, const std::vector<std::string>& names)
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw config_error("unknown coordinate '" + name + "'");
    return static_cast<int>(it - names.begin());
}

/// "V2=-50" (upward) or "V2=-50-" (downward).
[[nodiscard]] inline EventSpec<4> parse_section(std::string s)
{
    int dir = +1;
    if (!s.empty() && (s.back() == '+' || s.back() == '-') && s.find('=') != s.size() - 1) {
        const auto eq = s.find('=');
        if (eq != std::string::npos && s.size() > eq + 2) {
            dir = s.back() == '+' ? +1 : -1;
            s.pop_back();
        }
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw config_error("section must look like V2=-50");
    return coordinate_event<4>(coordinate_index(s.substr(0, eq), kCoupledNames), parse_number(s.substr(eq + 1)), dir,
                               "section");
}

[[nodiscard]] inline SeedPolicy seed_policy(const Globals& g)
{
    if (g.seed_policy == "warm") return SeedPolicy::Warm;
    if (g.seed_policy == "cold") return SeedPolicy::Cold;
    throw config_error("seed policy must be warm or cold");
}

/// Default coupled system: integrator driven at 6, resonator at 48, q1 = 0.05.
[[nodiscard]] inline CoupledSystem default_system() { return {integrator_neuron(6.0), resonator_neuron(48.0), 0.05, 0.0}; }

[[nodiscard]] inline CoupledSystem load_system(const Globals& g)
{
    return g.params.empty() ? default_system() : load_coupled(g.params);
}

[[nodiscard]] inline NeuronParams load_neuron(const Globals& g, const std::string& which)
{
    const CoupledSystem c = load_system(g);
    if (which == "integrator" || which == "1") return c.neuron1();
    if (which == "resonator" || which == "2") return c.neuron2();
    throw config_error("neuron must be integrator or resonator");
}

[[nodiscard]] inline std::string output_path(const Globals& g, const std::string& file)
{
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw config_error("cannot create output directory '" + g.out + "': " + ec.message());
    return (fs::path(g.out) / file).string();
}

inline void write_table(const Globals& g, const std::string& file, const CsvTable& t, std::ostream& out)
{
    const auto path = output_path(g, file);
    write_text_file(path, to_csv(t));
    out << "wrote " << path << " (" << t.rows.size() << " rows)\n";
}

inline void write_json(const Globals& g, const std::string& file, const json& j, std::ostream& out)
{
    const auto path = output_path(g, file);
    write_text_file(path, j.dump(2) + "\n");
    out << "wrote " << path << "\n";
}

[[nodiscard]] inline CsvCell complex_cell(std::complex<double> z)
{
    if (z.imag() == 0.0) return z.real();
    return format_number(z.real()) + (z.imag() < 0 ? "-" : "+") + format_number(std::abs(z.imag())) + "i";
}

[[nodiscard]] inline json report_json(const PatternReport& r)
{
    const auto& c = r.config;
    return {{"label", to_string(r.label)},
            {"periodic", r.periodic},
            {"metrics",
             {{"spikes_neuron1", r.spikes_1},
              {"spikes_neuron2", r.spikes_2},
              {"small_oscillations", r.small_oscillations},
              {"bursts", r.bursts},
              {"mmo_signature", r.mmo_signature},
              {"synchrony_index", r.synchrony_index},
              {"max_sync_offset_ms", r.max_sync_offset},
              {"mean_abs_dv_at_spikes", r.mean_abs_dv_at_spikes},
              {"neuron2_label", r.neuron2_label}}},
            {"window", {{"start_ms", r.window_start}, {"end_ms", r.window_end}}},
            {"thresholds",
             {{"spike_threshold_mV", c.threshold},
              {"min_separation_ms", c.min_separation},
              {"small_oscillation_floor_mV", c.small_osc_floor},
              {"burst_gap_factor", c.gap_factor},
              {"sync_offset_ms", c.sync_offset},
              {"sync_index", c.sync_index},
              {"min_spikes", c.min_spikes},
              {"epoch_isis", c.epoch_isis},
              {"epoch_cv", c.epoch_cv},
              {"max_period", c.max_period},
              {"period_tol", c.period_tol}}}};
}

[[nodiscard]] inline json state_json(const Vec<4>& x) { return json::array({x[0], x[1], x[2], x[3]}); }

// ---------------------------------------------------------------------------
// Subcommand bodies.

struct SimulateArgs {
    std::optional<double> q2;
    std::string x0;
    double t1 = 1000.0;
    double record_from = 0.0;
    bool inputs = false;
};

inline void cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out)
{
    CoupledSystem c = load_system(g);
    if (a.q2) c = c.with_q2(*a.q2);
    const Vec<4> x0 = a.x0.empty() ? kDefaultSeed : parse_state(a.x0);
    if (!(a.t1 > 0.0)) throw config_error("--t1 must be positive");
    const std::vector<EventSpec<4>> ev{coordinate_event<4>(0, -20.0, +1, "spike1"),
                                       coordinate_event<4>(2, -20.0, +1, "spike2")};
    const auto tr = integrate<4>([&](const Vec<4>& y) { return c.rhs(y); }, x0, 0.0, a.t1, g.integrator(), ev,
                                 {.record_from = a.record_from});
    write_table(g, "trajectory.csv", trajectory_table(tr, kCoupledNames), out);
    write_table(g, "events.csv", events_table(tr, kCoupledNames), out);
    if (!a.inputs) return;
    const auto sig = input_signal(tr, c);
    CsvTable t{{"t", "Y", "Z"}, {}};
    for (std::size_t i = 0; i < sig.times.size(); ++i) t.add_row({sig.times[i], sig.Y[i], sig.Z[i]});
    write_table(g, "inputs.csv", t, out);
}

struct EquilibriaArgs {
    std::string neuron = "integrator";
    std::string sweep = "I=0:20:201";
};

inline void cmd_equilibria(const Globals& g, const EquilibriaArgs& a, std::ostream& out)
{
    const NeuronParams base = load_neuron(g, a.neuron);
    if (a.sweep.rfind("I=", 0) != 0) throw config_error("sweep must look like I=a:b:n");
    const Range r = parse_range(a.sweep.substr(2), 101);
    CsvTable eq{{"I", "V", "n", "class"}, {}};
    for (const double I : r.grid()) {
        NeuronParams p = base;
        p.I = I;
        for (const auto& e : find_equilibria(p)) eq.add_row({I, e.state[0], e.state[1], std::string(to_string(e.cls))});
    }
    write_table(g, "equilibria.csv", eq, out);

    CsvTable bp{{"I", "kind"}, {}};
    if (r.n > 1) {
        const auto branch = continue_equilibrium(base, r.lo, r.hi);
        NeuronParams p0 = base;
        for (const auto& s : branch.special) {
            BranchKind kind = s.kind;
            if (kind == BranchKind::Fold && s.vanish_direction != 0) {
                try {
                    kind = classify_fold_as_snic(SingleNeuron{p0}, s).kind;
                } catch (const Error&) {
                    // Inconclusive probes keep the plain fold label.
                }
            }
            bp.add_row({s.parameter, std::string(to_string(kind))});
        }
    }
    write_table(g, "branch_points.csv", bp, out);
}

struct FiArgs {
    std::string neuron = "integrator";
    std::string range = "0:20:41";
};

inline void cmd_fi(const Globals& g, const FiArgs& a, std::ostream& out)
{
    const NeuronParams p = load_neuron(g, a.neuron);
    const Range r = parse_range(a.range, 41);
    FiOptions opt;
    opt.integrator = g.integrator();
    std::vector<double> f(static_cast<std::size_t>(r.n));
    const auto grid = r.grid();
    parallel_for(grid.size(), g.jobs, [&](std::size_t i) {
        NeuronParams pi = p;
        pi.I = grid[i];
        f[i] = spiking_frequency(pi, opt);
    });
    CsvTable t{{"I", "f"}, {}};
    for (std::size_t i = 0; i < grid.size(); ++i) t.add_row({grid[i], f[i]});
    write_table(g, "fi.csv", t, out);
}

struct CyclesArgs {
    std::string q2 = "0.1";
    std::string section = "V2=-50";
    std::string x0;
    double transient = 3000.0;
    double max_step = 0.01;
};

[[nodiscard]] inline LimitCycle<4> locate_cycle(const Globals& g, const CoupledSystem& c, const EventSpec<4>& section,
                                                const CyclesArgs& a)
{
    ShootingOptions opt;
    opt.transient = a.transient;
    opt.transient_integrator = g.integrator();
    return find_limit_cycle(c, a.x0.empty() ? kDefaultSeed : parse_state(a.x0), section, opt);
}

/// Section crossings per period, i.e. the period of the cycle as a fixed
/// point of the return map.
[[nodiscard]] inline int crossings_per_period(const CoupledSystem& c, const LimitCycle<4>& cyc,
                                              const EventSpec<4>& section)
{
    EventSpec<4> ev = section;
    ev.terminal = false;
    // Counted over [T/2, 3T/2) so an anchor lying on the section is not an edge case.
    const auto tr = integrate<4>([&](const Vec<4>& y) { return c.rhs(y); }, cyc.anchor, 0.0, 1.5 * cyc.period,
                                 {1e-10, 1e-12}, std::vector<EventSpec<4>>{ev}, {.store_samples = false});
    return static_cast<int>(std::count_if(tr.events.begin(), tr.events.end(),
                                          [&](const auto& e) { return e.t >= 0.5 * cyc.period; }));
}

inline std::vector<CsvCell> cycle_row(const CoupledSystem& c, const LimitCycle<4>& cyc, const EventSpec<4>& section)
{
    std::vector<CsvCell> row{cyc.parameter, cyc.period, static_cast<double>(crossings_per_period(c, cyc, section))};
    for (std::size_t k = 0; k < 4; ++k)
        row.push_back(k < cyc.multipliers.size() ? complex_cell(cyc.multipliers[k]) : CsvCell{std::string()});
    row.emplace_back(std::string(to_string(cyc.stability)));
    return row;
}

const std::vector<std::string> kCycleHeader{"q2", "T", "period", "mult1", "mult2", "mult3", "mult4", "stability"};

inline void cmd_cycles_find(const Globals& g, const CyclesArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2, 1);
    if (r.n != 1) throw config_error("cycles find takes a single q2 value");
    const CoupledSystem c = load_system(g).with_q2(r.lo);
    const auto section = parse_section(a.section);
    const auto cyc = locate_cycle(g, c, section, a);
    CsvTable t{kCycleHeader, {}};
    t.add_row(cycle_row(c, cyc, section));
    write_table(g, "cycles.csv", t, out);
}

inline int cmd_cycles_continue(const Globals& g, const CyclesArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2);
    const CoupledSystem c = load_system(g).with_q2(r.lo);
    const auto section = parse_section(a.section);
    const auto start = locate_cycle(g, c, section, a);
    CycleContinuationOptions opt;
    opt.max_step = a.max_step;
    opt.initial_step = std::min(opt.initial_step, a.max_step);
    const auto branch = continue_cycle(c, start, r.hi, opt);
    CsvTable t{kCycleHeader, {}};
    for (const auto& p : branch.points) t.add_row(cycle_row(c.with_q2(p.parameter), p, section));
    write_table(g, "cycles.csv", t, out);
    CsvTable b{{"q2", "kind"}, {}};
    for (const auto& s : branch.special) b.add_row({s.parameter, std::string(to_string(s.kind))});
    write_table(g, "cycle_bifurcations.csv", b, out);
    if (branch.end == BranchEnd::Lost && branch.points.size() < 2)
        throw Error(ErrorKind::BranchLost, branch.message);
    if (branch.end != BranchEnd::ReachedEnd) out << "branch stopped early: " << branch.message << "\n";
    return Ok;
}

struct PoincareArgs {
    std::string q2 = "0.1";
    std::string section = "V2=-50";
    std::string obs = "V1";
    std::string x0;
    std::size_t crossings = 200;
    double transient = 2000.0;
};

inline void cmd_poincare_sweep(const Globals& g, const PoincareArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2, 11);
    OrbitDiagramOptions opt;
    opt.crossings = a.crossings;
    opt.section.transient_time = a.transient;
    opt.section.integrator = g.integrator();
    opt.observable = coordinate_index(a.obs, kCoupledNames);
    opt.seeding = seed_policy(g);
    opt.jobs = g.jobs;
    const auto cols = orbit_diagram(load_system(g), r.grid(), a.x0.empty() ? kDefaultSeed : parse_state(a.x0),
                                    parse_section(a.section), opt);
    CsvTable t{{"q2", "crossing_index", "obs"}, {}};
    CsvTable errors{{"q2", "error"}, {}};
    for (const auto& col : cols) {
        for (std::size_t k = 0; k < col.values.size(); ++k)
            t.add_row({col.parameter, static_cast<double>(k), col.values[k]});
        if (!col.error.empty()) errors.add_row({col.parameter, csv_safe(col.error)});
    }
    write_table(g, "poincare.csv", t, out);
    if (!errors.rows.empty()) write_table(g, "poincare_errors.csv", errors, out);
    if (2 * errors.rows.size() > cols.size())
        throw Error(ErrorKind::AnalysisFailed, std::to_string(errors.rows.size()) + " of " +
                                                   std::to_string(cols.size()) + " sweep points failed");
}

inline void cmd_poincare_rotation(const Globals& g, const PoincareArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2, 1);
    if (r.n != 1) throw config_error("poincare rotation takes a single q2 value");
    SectionOptions so;
    so.transient_time = a.transient;
    so.integrator = g.integrator();
    const auto orbit = section_orbit(load_system(g).with_q2(r.lo), a.x0.empty() ? kDefaultSeed : parse_state(a.x0),
                                     parse_section(a.section), a.crossings, so);
    const auto rot = rotation_number(orbit.points);
    const auto smooth = torus_smoothness(orbit.points);
    const json j{{"q2", r.lo},
                 {"crossings", orbit.points.size()},
                 {"rho", rot.rho},
                 {"measured", rot.measured},
                 {"locked", rot.locked},
                 {"p", rot.p},
                 {"q", rot.q},
                 {"confidence", rot.confidence},
                 {"smoothness_deg", smooth.score_deg},
                 {"smooth", smooth.smooth}};
    write_json(g, "rotation.json", j, out);
    out << j.dump() << "\n";
}

struct ClassifyArgs {
    std::string q2 = "0.1";
    std::string x0;
    double duration = 6000.0;
};

[[nodiscard]] inline AnalysisWindow analysis_window(const Globals& g, double duration)
{
    AnalysisWindow w;
    w.duration = duration;
    w.integrator = g.integrator();
    return w;
}

inline void cmd_classify(const Globals& g, const ClassifyArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2, 1);
    if (r.n != 1) throw config_error("classify takes a single q2 value");
    const CoupledSystem c = load_system(g).with_q2(r.lo);
    const Vec<4> x0 = a.x0.empty() ? kDefaultSeed : parse_state(a.x0);
    const auto w = analysis_window(g, a.duration);
    const auto report = classify_pattern(simulate_window(c, x0, w), c);
    json j = report_json(report);
    j["q2"] = r.lo;
    j["x0"] = state_json(x0);
    j["window"]["transient_ms"] = w.transient();
    write_json(g, "classify.json", j, out);
    out << j.dump() << "\n";
}

struct SweepArgs {
    std::string q2 = "0:0.36:73";
    std::vector<std::string> x0;
    double duration = 6000.0;
};

inline void cmd_sweep(const Globals& g, const SweepArgs& a, std::ostream& out)
{
    const Range r = parse_range(a.q2, 11);
    const auto grid = r.grid();
    std::vector<Vec<4>> seeds;
    for (const auto& s : a.x0) seeds.push_back(parse_state(s));
    if (seeds.empty()) seeds.push_back(kDefaultSeed);
    const auto w = analysis_window(g, a.duration);
    const CoupledSystem base = load_system(g);
    const SeedPolicy policy = seed_policy(g);

    struct Cell {
        std::optional<PatternReport> report;
        std::string error;
    };
    std::vector<Cell> cells(grid.size() * seeds.size());
    auto classify_at = [&](std::size_t cell, double q2, const Vec<4>& x0) -> std::optional<Vec<4>> {
        const CoupledSystem c = base.with_q2(q2);
        try {
            const auto tr = simulate_window(c, x0, w);
            cells[cell].report = classify_pattern(tr, c);
            return tr.y_final;
        } catch (const Error& e) {
            cells[cell].error = e.what();
            return std::nullopt;
        }
    };
    if (policy == SeedPolicy::Warm) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            Vec<4> x = seeds[s];
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (const auto end = classify_at(s * grid.size() + i, grid[i], x)) x = *end;
        }
    } else {
        parallel_for(cells.size(), g.jobs, [&](std::size_t k) {
            (void)classify_at(k, grid[k % grid.size()], seeds[k / grid.size()]);
        });
    }

    CsvTable t{{"q2", "seed", "label", "spikes_1", "spikes_2", "small_oscillations", "bursts", "synchrony_index",
                "periodic", "mmo_signature", "error"},
               {}};
    std::size_t failures = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const Cell& cell = cells[s * grid.size() + i];
            if (!cell.report) {
                ++failures;
                t.add_row({grid[i], static_cast<double>(s), std::string("error"), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                           std::string(), csv_safe(cell.error)});
                continue;
            }
            const auto& rep = *cell.report;
            t.add_row({grid[i], static_cast<double>(s), std::string(to_string(rep.label)),
                       static_cast<double>(rep.spikes_1), static_cast<double>(rep.spikes_2),
                       static_cast<double>(rep.small_oscillations), static_cast<double>(rep.bursts),
                       rep.synchrony_index, rep.periodic ? 1.0 : 0.0, rep.mmo_signature, std::string()});
        }
    }
    write_table(g, "sweep.csv", t, out);
    if (2 * failures > cells.size())
        throw Error(ErrorKind::AnalysisFailed,
                    std::to_string(failures) + " of " + std::to_string(cells.size()) + " sweep points failed");
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Runs each argument list of a scenario file with the scenario's parameter
/// file and an output directory named after the scenario. A failing analysis
/// does not stop later runs; the worst exit code is returned.
inline int cmd_scenario(const Globals& g, const std::string& name, std::ostream& out, std::ostream& err)
{
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
        throw config_error("invalid scenario name '" + name + "'");
    const fs::path file = fs::path(g.scenario_dir) / (name + ".json");
    if (!fs::exists(file)) throw config_error("unknown scenario '" + name + "'");
    const json s = read_json_file(file.string());
    if (!s.contains("runs") || !s["runs"].is_array()) throw config_error(file.string() + ": missing 'runs' array");
    std::string params = g.params;
    if (params.empty() && s.contains("params")) params = (file.parent_path() / s["params"].get<std::string>()).string();
    const std::string outdir = (fs::path(g.out) / name).string();
    int worst = Ok;
    for (const auto& runj : s["runs"]) {
        if (!runj.is_array() || runj.empty()) throw config_error(file.string() + ": each run is a non-empty argument list");
        std::vector<std::string> args;
        for (const auto& a : runj) args.push_back(a.get<std::string>());
        auto has = [&](const std::string& flag) { return std::find(args.begin(), args.end(), flag) != args.end(); };
        std::string sub = outdir;
        if (has("--out")) {
            const auto it = std::find(args.begin(), args.end(), "--out");
            if (it + 1 == args.end()) throw config_error("--out needs a value");
            sub = (fs::path(outdir) / *(it + 1)).string();
            args.erase(it, it + 2);
        }
        args.insert(args.end(), {"--out", sub});
        if (!params.empty() && !has("--params")) args.insert(args.end(), {"--params", params});
        if (!has("--rtol")) args.insert(args.end(), {"--rtol", format_number(g.rtol)});
        if (!has("--atol")) args.insert(args.end(), {"--atol", format_number(g.atol)});
        if (!has("--jobs")) args.insert(args.end(), {"--jobs", std::to_string(g.jobs)});
        if (!has("--seed-policy")) args.insert(args.end(), {"--seed-policy", g.seed_policy});
        out << "scenario " << name << ":";
        for (const auto& a : args) out << ' ' << a;
        out << "\n";
        const int code = run(args, out, err);
        if (code == ConfigError) return code;
        worst = std::max(worst, code);
    }
    return worst;
}

inline void report_error(std::ostream& err, const std::string& kind, const std::string& message)
{
    err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

/// Parses args (without the program name) and runs the chosen subcommand.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Integrator/resonator neuron dynamics toolkit", "inak"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--params", g.params, "Parameter JSON file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--rtol", g.rtol, "Relative integration tolerance");
    app.add_option("--atol", g.atol, "Absolute integration tolerance");
    app.add_option("--seed-policy", g.seed_policy, "Sweep seeding: warm or cold")
        ->check(CLI::IsMember({"warm", "cold"}));
    app.add_option("--jobs", g.jobs, "Worker threads for cold sweeps")->check(CLI::PositiveNumber);
    app.add_option("--scenario-dir", g.scenario_dir, "Directory holding scenario JSON files");

    int code = Ok;
    std::function<int()> action;

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Integrate the coupled pair; writes trajectory and spike events");
    simulate->add_option("--q2", sim.q2);
    simulate->add_option("--x0", sim.x0, "Initial state V1,n1,V2,n2");
    simulate->add_option("--t1", sim.t1, "End time, ms");
    simulate->add_option("--record-from", sim.record_from, "First stored time, ms");
    simulate->add_flag("--inputs", sim.inputs, "Also write the drive-plus-coupling signals Y, Z");
    simulate->callback([&] { action = [&] { return cmd_simulate(g, sim, out), Ok; }; });

    EquilibriaArgs eqa;
    auto* equilibria = app.add_subcommand("equilibria", "Equilibria of a single neuron over a current sweep");
    equilibria->add_option("--neuron", eqa.neuron, "integrator or resonator");
    equilibria->add_option("--sweep", eqa.sweep, "I=a:b:n");
    equilibria->callback([&] { action = [&] { return cmd_equilibria(g, eqa, out), Ok; }; });

    FiArgs fia;
    auto* fi = app.add_subcommand("fi", "Frequency-current curve of a single neuron");
    fi->add_option("--neuron", fia.neuron, "integrator or resonator");
    fi->add_option("--range", fia.range, "a:b:n");
    fi->callback([&] { action = [&] { return cmd_fi(g, fia, out), Ok; }; });

    CyclesArgs cya;
    auto* cycles = app.add_subcommand("cycles", "Limit cycles of the coupled pair");
    cycles->require_subcommand(1);
    cycles->fallthrough();
    auto add_cycle_opts = [&](CLI::App* s) {
        s->add_option("--q2", cya.q2, "q2 value or a:b");
        s->add_option("--section", cya.section, "Shooting section, e.g. V2=-50");
        s->add_option("--x0", cya.x0, "Seed V1,n1,V2,n2");
        s->add_option("--transient", cya.transient, "Settling time before shooting, ms");
        s->fallthrough();
    };
    auto* cfind = cycles->add_subcommand("find", "Locate one cycle");
    add_cycle_opts(cfind);
    cfind->callback([&] { action = [&] { return cmd_cycles_find(g, cya, out), Ok; }; });
    auto* ccont = cycles->add_subcommand("continue", "Continue a cycle in q2");
    add_cycle_opts(ccont);
    ccont->add_option("--max-step", cya.max_step, "Largest arclength step");
    ccont->callback([&] { action = [&] { return cmd_cycles_continue(g, cya, out); }; });

    PoincareArgs pa;
    auto* poincare = app.add_subcommand("poincare", "Section orbits and rotation numbers");
    poincare->require_subcommand(1);
    poincare->fallthrough();
    auto add_poincare_opts = [&](CLI::App* s) {
        s->add_option("--q2", pa.q2);
        s->add_option("--section", pa.section, "Section, e.g. V2=-50");
        s->add_option("--x0", pa.x0, "Seed V1,n1,V2,n2");
        s->add_option("--crossings", pa.crossings, "Recorded crossings");
        s->add_option("--transient", pa.transient, "Discarded time, ms");
        s->fallthrough();
    };
    auto* psweep = poincare->add_subcommand("sweep", "Orbit diagram over a q2 grid");
    add_poincare_opts(psweep);
    psweep->add_option("--obs", pa.obs, "Recorded coordinate");
    psweep->callback([&] { action = [&] { return cmd_poincare_sweep(g, pa, out), Ok; }; });
    auto* prot = poincare->add_subcommand("rotation", "Rotation number and torus smoothness at one q2");
    add_poincare_opts(prot);
    prot->callback([&] { action = [&] { return cmd_poincare_rotation(g, pa, out), Ok; }; });

    ClassifyArgs cla;
    auto* classify = app.add_subcommand("classify", "Oscillation pattern at one q2; JSON report");
    classify->add_option("--q2", cla.q2);
    classify->add_option("--x0", cla.x0, "Initial state V1,n1,V2,n2");
    classify->add_option("--duration", cla.duration, "Total integration time, ms");
    classify->callback([&] { action = [&] { return cmd_classify(g, cla, out), Ok; }; });

    SweepArgs swa;
    auto* sweep = app.add_subcommand("sweep", "Pattern classification over a q2 grid");
    sweep->add_option("--q2", swa.q2, "a:b:n");
    sweep->add_option("--x0", swa.x0, "Initial state V1,n1,V2,n2 (repeatable)");
    sweep->add_option("--duration", swa.duration, "Total integration time per point, ms");
    sweep->callback([&] { action = [&] { return cmd_sweep(g, swa, out), Ok; }; });

    std::string scenario_name;
    auto* scenario = app.add_subcommand("scenario", "Run a named scenario file");
    scenario->add_option("name", scenario_name, "Scenario name")->required();
    scenario->callback([&] { action = [&] { return cmd_scenario(g, scenario_name, out, err); }; });

    for (auto* s : {simulate, equilibria, fi, cycles, cfind, ccont, poincare, psweep, prot, classify, sweep, scenario})
        s->fallthrough();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "ConfigInvalid", e.what());
        return ConfigError;
    }
    try {
        if (action) code = action();
    } catch (const Error& e) {
        const bool config = e.kind() == ErrorKind::ConfigInvalid;
        report_error(err, config ? "ConfigInvalid" : "AnalysisFailed", e.what());
        return config ? ConfigError : AnalysisError;
    } catch (const std::exception& e) {
        report_error(err, "AnalysisFailed", e.what());
        return AnalysisError;
    }
    return code;
}

} // namespace inak::cli
