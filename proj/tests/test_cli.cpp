#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli.hpp"

using namespace inak;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(std::move(args), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("inak_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

void expect_round_trip(const fs::path& file)
{
    const std::string text = slurp(file);
    ASSERT_FALSE(text.empty()) << file;
    EXPECT_EQ(to_csv(parse_csv(text)), text) << file;
}

int system_exit(const std::string& args)
{
    const std::string cmd = std::string(INAK_CLI_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Csv, NumbersRoundTripAndTextStaysText)
{
    CsvTable t{{"a", "b", "c"}, {}};
    t.add_row({0.1, std::string("1-burst"), 1e-300});
    t.add_row({-0.0, std::string("0.5+0.25i"), 3.0});
    t.add_row({1.0 / 3.0, std::string(), 12345678.9});
    const std::string text = to_csv(t);
    const auto back = parse_csv(text);
    ASSERT_EQ(back.rows.size(), 3u);
    EXPECT_EQ(std::get<double>(back.rows[2][0]), 1.0 / 3.0);
    EXPECT_EQ(std::get<std::string>(back.rows[0][1]), "1-burst");
    EXPECT_EQ(to_csv(back), text);
    EXPECT_THROW(t.add_row({1.0}), Error);
    CsvTable bad{{"x"}, {}};
    bad.add_row({std::string("a,b")});
    EXPECT_THROW((void)to_csv(bad), Error);
}

TEST(Cli, ArgumentParsers)
{
    EXPECT_EQ(cli::parse_range("0.1").grid(), std::vector<double>{0.1});
    EXPECT_EQ(cli::parse_range("0:1:3").grid(), (std::vector<double>{0.0, 0.5, 1.0}));
    EXPECT_EQ(cli::parse_range("0.2:0.3").n, 2);
    EXPECT_THROW((void)cli::parse_range("0:1:0"), Error);
    EXPECT_THROW((void)cli::parse_range("0:1:2.5"), Error);
    EXPECT_THROW((void)cli::parse_range("0:1:1"), Error);
    EXPECT_THROW((void)cli::parse_range("a:b"), Error);

    const auto up = cli::parse_section("V2=-50");
    EXPECT_EQ(up.direction, +1);
    EXPECT_DOUBLE_EQ(up.g(Vec<4>(0.0, 0.0, -48.0, 0.0)), 2.0);
    const auto down = cli::parse_section("V1=-20-");
    EXPECT_EQ(down.direction, -1);
    EXPECT_DOUBLE_EQ(down.g(Vec<4>(-25.0, 0.0, 0.0, 0.0)), -5.0);
    EXPECT_THROW((void)cli::parse_section("V3=-50"), Error);
    EXPECT_THROW((void)cli::parse_section("V2"), Error);

    EXPECT_EQ(cli::parse_state("1,2,3,4"), Vec<4>(1, 2, 3, 4));
    EXPECT_THROW((void)cli::parse_state("1,2,3"), Error);
}

TEST(Cli, UnknownScenarioIsAConfigError)
{
    const auto r = run_cli({"scenario", "no_such_figure", "--out", scratch("unknown").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("\"error\":\"ConfigInvalid\""), std::string::npos) << r.err;
}

TEST(Cli, ExitCodesFromTheBinary)
{
    const auto out = scratch("exit").string();
    EXPECT_EQ(system_exit("--help"), 0);
    EXPECT_EQ(system_exit("classify --q2 nan_please --out " + out), 2);
    EXPECT_EQ(system_exit("frobnicate"), 2);
    EXPECT_EQ(system_exit("scenario missing --out " + out), 2);
    // Fewer crossings than the rotation estimate accepts.
    EXPECT_EQ(system_exit("poincare rotation --q2 0.01 --section V1=-20 --crossings 50 --out " + out), 3);
}

TEST(Cli, InvalidParameterFileIsAConfigError)
{
    const auto dir = scratch("params");
    fs::create_directories(dir);
    const auto file = (dir / "bad.json").string();
    write_text_file(file, R"({"neuron1": {"g_Nax": 1}})");
    const auto r = run_cli({"simulate", "--params", file, "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("g_Nax"), std::string::npos);
}

TEST(Cli, SinglePointRangesGiveOneRow)
{
    const auto dir = scratch("single");
    ASSERT_EQ(run_cli({"sweep", "--q2", "0.1", "--out", dir.string()}).code, 0);
    EXPECT_EQ(parse_csv(slurp(dir / "sweep.csv")).rows.size(), 1u);
    ASSERT_EQ(run_cli({"fi", "--range", "8", "--out", dir.string()}).code, 0);
    EXPECT_EQ(parse_csv(slurp(dir / "fi.csv")).rows.size(), 1u);
    ASSERT_EQ(run_cli({"equilibria", "--sweep", "I=10:10:1", "--out", dir.string()}).code, 0);
    const auto eq = parse_csv(slurp(dir / "equilibria.csv"));
    for (const auto& row : eq.rows) EXPECT_EQ(std::get<double>(row[0]), 10.0);
}

TEST(Cli, EmittedFilesRoundTripByteForByte)
{
    const auto dir = scratch("roundtrip");
    const auto d = dir.string();
    ASSERT_EQ(run_cli({"simulate", "--q2", "0.2", "--t1", "100", "--inputs", "--out", d}).code, 0);
    ASSERT_EQ(run_cli({"equilibria", "--sweep", "I=0:10:6", "--out", d}).code, 0);
    ASSERT_EQ(run_cli({"cycles", "find", "--q2", "0.12", "--section", "V1=-20", "--out", d}).code, 0);
    ASSERT_EQ(run_cli({"poincare", "sweep", "--q2", "0.1:0.12:2", "--section", "V1=-20", "--crossings", "5",
                       "--transient", "500", "--out", d})
                  .code,
              0);
    ASSERT_EQ(run_cli({"sweep", "--q2", "0.1:0.5:2", "--out", d}).code, 0);
    for (const char* f : {"trajectory.csv", "events.csv", "inputs.csv", "equilibria.csv", "branch_points.csv",
                          "cycles.csv", "poincare.csv", "sweep.csv"})
        expect_round_trip(dir / f);

    const auto cyc = parse_csv(slurp(dir / "cycles.csv"));
    EXPECT_EQ(cyc.header, (std::vector<std::string>{"q2", "T", "period", "mult1", "mult2", "mult3", "mult4",
                                                     "stability"}));
    EXPECT_EQ(parse_csv(slurp(dir / "trajectory.csv")).header,
              (std::vector<std::string>{"t", "V1", "n1", "V2", "n2"}));
    EXPECT_EQ(parse_csv(slurp(dir / "events.csv")).header,
              (std::vector<std::string>{"t", "label", "V1", "n1", "V2", "n2"}));
}

TEST(Cli, RunsAreReproducible)
{
    const auto a = scratch("repro_a"), b = scratch("repro_b");
    for (const auto& d : {a, b})
        ASSERT_EQ(run_cli({"simulate", "--q2", "0.3", "--t1", "200", "--out", d.string()}).code, 0);
    EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));

    const std::vector<std::string> sweep{"sweep", "--q2", "0.1:0.5:3", "--seed-policy", "cold", "--x0",
                                         "-60,0.003,-55,0.4", "--x0", "-62,0.003,-50,0.5"};
    auto with = [&](const fs::path& d, const char* jobs) {
        auto args = sweep;
        args.insert(args.end(), {"--jobs", jobs, "--out", d.string()});
        return run_cli(args).code;
    };
    ASSERT_EQ(with(a, "1"), 0);
    ASSERT_EQ(with(b, "3"), 0);
    EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
    EXPECT_EQ(parse_csv(slurp(a / "sweep.csv")).rows.size(), 6u);
}

TEST(Cli, ClassifyReportCarriesThresholds)
{
    const auto dir = scratch("classify");
    const auto r = run_cli({"classify", "--q2", "0.5", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(dir / "classify.json"));
    EXPECT_TRUE(j.contains("label"));
    EXPECT_EQ(j["thresholds"]["spike_threshold_mV"], -20.0);
    EXPECT_EQ(j["thresholds"]["burst_gap_factor"], 3.0);
    EXPECT_EQ(j["thresholds"]["sync_offset_ms"], 2.0);
    EXPECT_EQ(j["q2"], 0.5);
    EXPECT_EQ(j["window"]["transient_ms"], 2000.0);
}

TEST(Scenarios, FilesAreWellFormed)
{
    const fs::path dir = INAK_SCENARIO_DIR;
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        const auto s = read_json_file(entry.path().string());
        ASSERT_TRUE(s.contains("description")) << entry.path();
        ASSERT_TRUE(s.contains("runs") && s["runs"].is_array() && !s["runs"].empty()) << entry.path();
        ASSERT_TRUE(s.contains("params")) << entry.path();
        const auto params = entry.path().parent_path() / s["params"].get<std::string>();
        EXPECT_NO_THROW((void)load_coupled(params.string())) << params;
        for (const auto& run : s["runs"]) ASSERT_TRUE(run.is_array() && run[0].is_string()) << entry.path();
    }
    EXPECT_GE(count, 10u);
}

TEST(Scenarios, QuickScenarioRunsEndToEnd)
{
    const auto dir = scratch("scenario");
    const auto r = run_cli({"scenario", "fig13", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "fig13" / "classify.json"));
    expect_round_trip(dir / "fig13" / "trajectory.csv");
}
