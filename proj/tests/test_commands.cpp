#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "grains/commands.hpp"

using namespace grains;
namespace fs = std::filesystem;

namespace {

const char* kScenarioText = R"(
# desk-scale test medium
f0 = 10
periodic_amp = 1.0
noise_sigma = 0.06
wedge_radius = 0.03
wedge_half_angle = 0.6
jamming_gain = 6.0
jamming_exponent = 2.0
startup_gain = 0.5
startup_tau = 0.004
seed = 5
cr = 0.02
av = 0.01
mv = 0.2
h = 1000
v_max = 0.08968
f_s = 10
start = 0 0
end = 1 0
explore_distance = 0.12
calibration_explore = 0.15
mv_candidates = 0.2 0.3
window_m = 150
horizon_m_star = 75
filter_cutoff = 0.2
object = 0.08 0.0 0.01
)";

struct Workspace {
  fs::path root;
  fs::path scenario;

  Workspace() {
    root = fs::temp_directory_path() / "grains_cmd_tests";
    fs::remove_all(root);
    fs::create_directories(root);
    scenario = root / "scenario.cfg";
    std::ofstream os(scenario);
    os << kScenarioText;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

cli::Options base_options(const Workspace& ws, const std::string& out) {
  cli::Options o;
  o.scenario_path = ws.scenario.string();
  o.out_dir = (ws.root / out).string();
  o.seeds = {1, 2};
  return o;
}

}  // namespace

TEST_CASE("command pipeline: calibrate, run, baseline, report") {
  Workspace ws;

  SUBCASE("run before calibrate fails with a usage error") {
    const auto opts = base_options(ws, "norun");
    CHECK(cli::cmd_run(opts) == cli::kExitUsage);
  }

  SUBCASE("full pipeline") {
    auto opts = base_options(ws, "sandbox");
    REQUIRE(cli::cmd_calibrate(opts) == cli::kExitOk);
    const fs::path cal = fs::path(opts.out_dir) / "calibration.csv";
    REQUIRE(fs::exists(cal));
    const std::string cal_text = slurp(cal);
    CHECK(cal_text.rfind("mv,T,rmse,max_z,n_windows,selected,", 0) == 0);
    // two candidate rows, exactly one selected
    CHECK(std::count(cal_text.begin(), cal_text.end(), '\n') == 3);
    CHECK(cal_text.find(",1,") != std::string::npos);

    REQUIRE(cli::cmd_run(opts) == cli::kExitOk);
    CHECK(fs::exists(fs::path(opts.out_dir) / "episode_1.csv"));
    CHECK(fs::exists(fs::path(opts.out_dir) / "episode_2.csv"));
    const fs::path summary = fs::path(opts.out_dir) / "summary.csv";
    REQUIRE(fs::exists(summary));
    const std::string summary_text = slurp(summary);
    CHECK(summary_text.rfind("seed,triggered,stop_index,zeta,collision\n", 0) ==
          0);
    CHECK(summary_text.find("aggregate,trigger_rate,") != std::string::npos);
    CHECK(summary_text.find("aggregate,mv_star,") != std::string::npos);

    // identical seeds twice -> identical summaries
    auto again = opts;
    again.out_dir = (ws.root / "sandbox_again").string();
    fs::create_directories(again.out_dir);
    fs::copy_file(cal, fs::path(again.out_dir) / "calibration.csv");
    REQUIRE(cli::cmd_run(again) == cli::kExitOk);
    CHECK(slurp(fs::path(again.out_dir) / "summary.csv") == summary_text);

    // report over the directory containing the run
    cli::Options report;
    report.out_dir = opts.out_dir;
    REQUIRE(cli::cmd_report(report) == cli::kExitOk);
    const std::string report_text =
        slurp(fs::path(opts.out_dir) / "report.csv");
    CHECK(report_text.rfind("medium,mv_star,t_star,z_bar,zeta_median,", 0) == 0);
    CHECK(std::count(report_text.begin(), report_text.end(), '\n') == 2);
  }

  SUBCASE("scenario-pinned z_threshold works without calibration") {
    const fs::path path = ws.root / "pinned.cfg";
    std::ofstream(path) << kScenarioText << "z_threshold = 5.0\n";
    cli::Options opts;
    opts.scenario_path = path.string();
    opts.out_dir = (ws.root / "pinned").string();
    opts.seeds = {1};
    CHECK(cli::cmd_run(opts) == cli::kExitOk);
  }

  SUBCASE("inline calibration override bypasses calibration.csv") {
    auto opts = base_options(ws, "inline");
    opts.mv = 0.2;
    opts.t_star = 70.2;
    opts.z_bar = 4.5;
    CHECK(cli::cmd_run(opts) == cli::kExitOk);
    CHECK(fs::exists(fs::path(opts.out_dir) / "summary.csv"));

    auto partial = base_options(ws, "inline2");
    partial.mv = 0.2;
    CHECK_THROWS_AS(cli::cmd_run(partial), std::invalid_argument);
  }

  SUBCASE("baseline: infinite bar never stops, low bar stops immediately") {
    auto opts = base_options(ws, "baseline_hi");
    opts.seeds = {3};
    opts.threshold = 1e9;
    REQUIRE(cli::cmd_baseline(opts) == cli::kExitOk);
    std::string summary = slurp(fs::path(opts.out_dir) / "summary.csv");
    CHECK(summary.find("aggregate,trigger_rate,0\n") != std::string::npos);

    auto low = base_options(ws, "baseline_lo");
    low.seeds = {3};
    low.threshold = 10.2;  // below drag + startup transient
    REQUIRE(cli::cmd_baseline(low) == cli::kExitOk);
    summary = slurp(fs::path(low.out_dir) / "summary.csv");
    CHECK(summary.find("aggregate,trigger_rate,1\n") != std::string::npos);
    // stopped within the breakaway, long before the buried object
    std::istringstream rows(summary);
    std::string line;
    std::getline(rows, line);  // header
    std::getline(rows, line);
    const auto second_comma = line.find(',', line.find(',') + 1);
    const long stop = std::strtol(line.c_str() + second_comma + 1, nullptr, 10);
    CHECK(stop < 20);
  }

  SUBCASE("object-free run reports no triggers and empty zeta") {
    const std::string no_objects = [&] {
      std::string s = kScenarioText;
      const auto pos = s.find("object =");
      return s.substr(0, pos);
    }();
    const fs::path path = ws.root / "objectfree.cfg";
    std::ofstream(path) << no_objects;
    cli::Options opts;
    opts.scenario_path = path.string();
    opts.out_dir = (ws.root / "objectfree").string();
    opts.seeds = {4};
    opts.mv = 0.2;
    opts.t_star = 70.2;
    opts.z_bar = 6.0;
    REQUIRE(cli::cmd_run(opts) == cli::kExitOk);
    const std::string summary = slurp(fs::path(opts.out_dir) / "summary.csv");
    CHECK(summary.find("4,0,-1,,0\n") != std::string::npos);
    CHECK(summary.find("aggregate,trigger_rate,0\n") != std::string::npos);
  }

  SUBCASE("sweep produces per-material runs and a merged report") {
    auto opts = base_options(ws, "sweepout");
    opts.seeds = {1};
    REQUIRE(cli::cmd_sweep(opts) == cli::kExitOk);
    for (const char* m : {"sand", "cassia", "cat-litter", "soybean"}) {
      CHECK(fs::exists(fs::path(opts.out_dir) / m / "calibration.csv"));
      CHECK(fs::exists(fs::path(opts.out_dir) / m / "summary.csv"));
    }
    const std::string report = slurp(fs::path(opts.out_dir) / "report.csv");
    CHECK(std::count(report.begin(), report.end(), '\n') == 5);  // header + 4
  }

  SUBCASE("report on an empty directory is a usage error") {
    cli::Options opts;
    opts.out_dir = (ws.root / "empty").string();
    fs::create_directories(opts.out_dir);
    CHECK(cli::cmd_report(opts) == cli::kExitUsage);
  }

  SUBCASE("missing scenario fails before any output is written") {
    auto opts = base_options(ws, "missing");
    opts.scenario_path = (ws.root / "nope.cfg").string();
    CHECK_THROWS_AS(cli::cmd_calibrate(opts), std::invalid_argument);
    CHECK(!fs::exists(opts.out_dir));
  }
}

TEST_CASE("run requires seeds") {
  Workspace ws;
  auto opts = base_options(ws, "noseeds");
  opts.seeds.clear();
  CHECK_THROWS_AS(cli::cmd_run(opts), std::invalid_argument);
}
