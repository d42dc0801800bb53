#include "grains/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "grains/calibration.hpp"
#include "grains/rng.hpp"
#include "grains/scenario.hpp"
#include "grains/simulator.hpp"

namespace grains::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Runs fn(0..n-1) on a bounded pool; results land by index so output order
// is deterministic.
void parallel_for(std::size_t n, int max_workers,
                  const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<std::size_t>(n, max_workers > 0 ? max_workers : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

calibration::CalibrationConfig calibration_config(const scenario::Scenario& sc) {
  calibration::CalibrationConfig cfg;
  cfg.mv_candidates = sc.mv_candidates;
  cfg.spiral = sc.spiral;
  cfg.explore_distance = sc.calibration_explore;
  cfg.consts = sc.consts;
  cfg.window_m = sc.window_m;
  cfg.horizon_m_star = sc.horizon_m_star;
  cfg.filter_cutoff = sc.filter_cutoff;
  cfg.z_margin = sc.z_margin;
  return cfg;
}

// Object-free source for calibration: the sample-container run. The child
// seed depends on the MV value, not its index, so dropping a candidate does
// not perturb the others.
calibration::MediumSource medium_from(const scenario::Scenario& sc) {
  return [sc](double mv, int n_rev) {
    sim::WorldConfig world = sc.world;
    world.objects.clear();
    world.rng_seed = mix_seed(sc.world.rng_seed, mv);
    trajectory::SpiralParams spiral = sc.spiral;
    spiral.mv = mv;
    return sim::explore_stream(spiral, sc.start, sc.end, world, sc.consts,
                               n_rev);
  };
}

void write_calibration_csv(const fs::path& path,
                           const calibration::CalibrationResult& result) {
  std::ofstream os(path);
  os << "mv,T,rmse,max_z,n_windows,selected,sigma_p2,length_scale,period,"
        "sigma_w2\n";
  for (const auto& c : result.per_candidate) {
    const bool selected = !c.excluded && c.mv == result.mv_star;
    os << fmt(c.mv) << ',' << fmt(c.period) << ',' << fmt(c.rmse) << ','
       << fmt(c.max_z) << ',' << c.n_windows << ',' << (selected ? 1 : 0)
       << ',' << fmt(c.kernel.ess.sigma_p2) << ','
       << fmt(c.kernel.ess.length_scale) << ',' << fmt(c.kernel.ess.period)
       << ',' << fmt(c.kernel.white.sigma_w2) << '\n';
  }
}

void print_calibration_table(const calibration::CalibrationResult& result) {
  std::printf("  %-6s %-6s %-10s %-8s %s\n", "MV", "T", "RMSE", "max(z)",
              "windows");
  for (const auto& c : result.per_candidate) {
    const bool selected = !c.excluded && c.mv == result.mv_star;
    if (c.excluded) {
      std::printf("  %-6.3g %-6.0f %-10s %-8s excluded\n", c.mv,
                  std::round(c.period), "-", "-");
      continue;
    }
    std::printf("%s %-6.3g %-6.0f %-10.4f %-8.4g %d\n", selected ? "*" : " ",
                c.mv, std::round(c.period), c.rmse, c.max_z, c.n_windows);
  }
  std::printf("selected: MV*=%g T*=%g z_bar=%g\n", result.mv_star,
              std::round(result.t_star), result.z_bar);
}

struct CalibrationD {
  double mv_star = 0.0;
  double t_star = 0.0;
  double z_bar = 0.0;
  std::optional<gp::KernelParams> kernel;
};

std::optional<CalibrationD> read_calibration_csv(const fs::path& path,
                                                 double z_margin) {
  std::ifstream is(path);
  if (!is) return std::nullopt;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double mv, t, rmse, max_z, sp2, l, period, sw2;
    int n_windows, selected;
    if (!(row >> mv >> t >> rmse >> max_z >> n_windows >> selected >> sp2 >>
          l >> period >> sw2))
      continue;
    if (selected == 1) {
      CalibrationD d;
      d.mv_star = mv;
      d.t_star = t;
      d.z_bar = max_z * z_margin;
      gp::KernelParams k;
      k.ess.sigma_p2 = sp2;
      k.ess.length_scale = l;
      k.ess.period = period;
      k.white.sigma_w2 = sw2;
      d.kernel = k;
      return d;
    }
  }
  return std::nullopt;
}

detector::DetectorConfig detector_config(const scenario::Scenario& sc,
                                         const CalibrationD& d) {
  detector::DetectorConfig cfg;
  cfg.window_m = sc.window_m;
  cfg.horizon_m_star = sc.horizon_m_star;
  cfg.z_threshold = d.z_bar;
  cfg.filter_cutoff = sc.filter_cutoff;
  cfg.refit_stride = sc.refit_stride;
  cfg.zero_offset_samples = sc.zero_offset_samples;
  cfg.t_star = d.t_star;
  cfg.kernel_init = d.kernel;
  return cfg;
}

struct SeedRow {
  std::uint64_t seed = 0;
  bool triggered = false;
  std::int64_t stop_index = -1;
  double zeta = std::numeric_limits<double>::quiet_NaN();
  bool collision = false;
};

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

struct SummaryStats {
  double trigger_rate = 0.0;
  double collision_rate = 0.0;
  double zeta_median = std::numeric_limits<double>::quiet_NaN();
  double zeta_q1 = std::numeric_limits<double>::quiet_NaN();
  double zeta_q3 = std::numeric_limits<double>::quiet_NaN();
};

SummaryStats stats_of(const std::vector<SeedRow>& rows) {
  SummaryStats s;
  std::vector<double> zetas;
  for (const auto& r : rows) {
    s.trigger_rate += r.triggered ? 1.0 : 0.0;
    s.collision_rate += r.collision ? 1.0 : 0.0;
    if (r.triggered && std::isfinite(r.zeta)) zetas.push_back(r.zeta);
  }
  if (!rows.empty()) {
    s.trigger_rate /= static_cast<double>(rows.size());
    s.collision_rate /= static_cast<double>(rows.size());
  }
  s.zeta_median = quantile(zetas, 0.5);
  s.zeta_q1 = quantile(zetas, 0.25);
  s.zeta_q3 = quantile(zetas, 0.75);
  return s;
}

void write_summary_csv(const fs::path& path, const std::vector<SeedRow>& rows,
                       const SummaryStats& stats, const CalibrationD& d) {
  std::ofstream os(path);
  os << "seed,triggered,stop_index,zeta,collision\n";
  for (const auto& r : rows) {
    os << r.seed << ',' << (r.triggered ? 1 : 0) << ',' << r.stop_index << ','
       << (std::isfinite(r.zeta) ? fmt(r.zeta) : std::string{}) << ','
       << (r.collision ? 1 : 0) << '\n';
  }
  os << "aggregate,n_seeds," << rows.size() << '\n';
  os << "aggregate,trigger_rate," << fmt(stats.trigger_rate) << '\n';
  os << "aggregate,collision_rate," << fmt(stats.collision_rate) << '\n';
  os << "aggregate,zeta_median," << fmt(stats.zeta_median) << '\n';
  os << "aggregate,zeta_q1," << fmt(stats.zeta_q1) << '\n';
  os << "aggregate,zeta_q3," << fmt(stats.zeta_q3) << '\n';
  os << "aggregate,mv_star," << fmt(d.mv_star) << '\n';
  os << "aggregate,t_star," << fmt(d.t_star) << '\n';
  os << "aggregate,z_bar," << fmt(d.z_bar) << '\n';
}

void print_summary(const std::vector<SeedRow>& rows,
                   const SummaryStats& stats) {
  std::printf("episodes: %zu  trigger_rate: %.3f  collision_rate: %.3f\n",
              rows.size(), stats.trigger_rate, stats.collision_rate);
  if (std::isfinite(stats.zeta_median))
    std::printf("zeta median: %.4f m  q1: %.4f  q3: %.4f\n", stats.zeta_median,
                stats.zeta_q1, stats.zeta_q3);
}

std::optional<CalibrationD> resolve_d(const Options& options,
                                      const scenario::Scenario& sc) {
  const int inline_given = (options.mv.has_value() ? 1 : 0) +
                           (options.t_star.has_value() ? 1 : 0) +
                           (options.z_bar.has_value() ? 1 : 0);
  if (inline_given == 3)
    return CalibrationD{*options.mv, *options.t_star, *options.z_bar,
                        std::nullopt};
  if (inline_given != 0)
    throw std::invalid_argument(
        "--mv, --t-star and --z-bar must be given together");
  auto from_csv = read_calibration_csv(
      fs::path(options.out_dir) / "calibration.csv", sc.z_margin);
  if (from_csv) return from_csv;
  if (sc.z_threshold > 0.0) {
    // scenario-pinned threshold: run at the scenario speed
    return CalibrationD{sc.spiral.mv,
                        trajectory::periodicity(sc.spiral, sc.consts),
                        sc.z_threshold, std::nullopt};
  }
  return std::nullopt;
}

int run_or_baseline(const Options& options, bool baseline) {
  if (options.seeds.empty())
    throw std::invalid_argument("at least one --seeds value is required");
  const scenario::Scenario sc = scenario::load_scenario(options.scenario_path);

  CalibrationD d;
  if (!baseline) {
    const auto resolved = resolve_d(options, sc);
    if (!resolved) {
      std::cerr << "no calibration found in '" << options.out_dir
                << "'; run the calibrate subcommand first or pass "
                   "--mv/--t-star/--z-bar\n";
      return kExitUsage;
    }
    d = *resolved;
    if (!(d.z_bar > 0.0))
      throw std::invalid_argument("calibrated z_bar must be > 0");
  } else {
    d.mv_star = sc.spiral.mv;  // baseline runs at the scenario speed
  }

  fs::create_directories(options.out_dir);
  const int n_rev = sc.episode_revolutions();
  std::vector<sim::EpisodeResult> episodes(options.seeds.size());
  parallel_for(options.seeds.size(), options.max_workers, [&](std::size_t i) {
    sim::WorldConfig world = sc.world;
    world.rng_seed = options.seeds[i];
    trajectory::SpiralParams spiral = sc.spiral;
    spiral.mv = d.mv_star;
    if (baseline) {
      episodes[i] =
          sim::run_episode_baseline(spiral, sc.start, sc.end, world, sc.consts,
                                    options.threshold, sc.filter_cutoff, n_rev);
    } else {
      episodes[i] = sim::run_episode(spiral, sc.start, sc.end, world, sc.consts,
                                     detector_config(sc, d), n_rev);
    }
  });

  std::vector<SeedRow> rows(options.seeds.size());
  for (std::size_t i = 0; i < options.seeds.size(); ++i) {
    const auto& e = episodes[i];
    rows[i] = {options.seeds[i], e.outcome.triggered, e.outcome.stop_index,
               e.zeta, e.collision};
    std::ofstream os(fs::path(options.out_dir) /
                     ("episode_" + std::to_string(options.seeds[i]) + ".csv"));
    sim::write_episode_csv(os, e);
  }
  const SummaryStats stats = stats_of(rows);
  write_summary_csv(fs::path(options.out_dir) / "summary.csv", rows, stats, d);
  print_summary(rows, stats);
  return kExitOk;
}

std::map<std::string, double> read_summary_aggregates(const fs::path& path) {
  std::map<std::string, double> agg;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("aggregate,", 0) != 0) continue;
    const auto second = line.find(',', 10);
    if (second == std::string::npos) continue;
    const std::string name = line.substr(10, second - 10);
    agg[name] = std::strtod(line.c_str() + second + 1, nullptr);
  }
  return agg;
}

int report_into(const fs::path& out_dir) {
  struct ReportRow {
    std::string medium;
    std::map<std::string, double> agg;
  };
  std::vector<ReportRow> rows;
  auto try_add = [&](const fs::path& dir, const std::string& name) {
    const fs::path summary = dir / "summary.csv";
    if (fs::exists(summary))
      rows.push_back({name, read_summary_aggregates(summary)});
  };
  if (fs::exists(out_dir / "summary.csv"))
    try_add(out_dir, out_dir.filename().string());
  std::vector<fs::path> subdirs;
  if (fs::exists(out_dir))
    for (const auto& entry : fs::directory_iterator(out_dir))
      if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& dir : subdirs) try_add(dir, dir.filename().string());

  if (rows.empty()) {
    std::cerr << "no summary.csv found under '" << out_dir.string() << "'\n";
    return kExitUsage;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const double ma = a.agg.count("zeta_median") ? a.agg.at("zeta_median")
                                                 : -std::numeric_limits<double>::infinity();
    const double mb = b.agg.count("zeta_median") ? b.agg.at("zeta_median")
                                                 : -std::numeric_limits<double>::infinity();
    const double ka = std::isfinite(ma) ? ma : -std::numeric_limits<double>::infinity();
    const double kb = std::isfinite(mb) ? mb : -std::numeric_limits<double>::infinity();
    if (ka != kb) return ka > kb;
    return a.medium < b.medium;
  });

  std::ofstream os(out_dir / "report.csv");
  os << "medium,mv_star,t_star,z_bar,zeta_median,trigger_rate,collision_rate\n";
  std::printf("  %-12s %-6s %-6s %-8s %-12s %-8s %s\n", "medium", "MV*", "T*",
              "z_bar", "zeta_median", "trig", "coll");
  auto get = [](const std::map<std::string, double>& m, const char* k) {
    const auto it = m.find(k);
    return it == m.end() ? std::numeric_limits<double>::quiet_NaN()
                         : it->second;
  };
  for (const auto& r : rows) {
    const double mv = get(r.agg, "mv_star"), t = get(r.agg, "t_star"),
                 zb = get(r.agg, "z_bar"), zm = get(r.agg, "zeta_median"),
                 tr = get(r.agg, "trigger_rate"),
                 cr = get(r.agg, "collision_rate");
    os << r.medium << ',' << fmt(mv) << ',' << fmt(t) << ',' << fmt(zb) << ','
       << fmt(zm) << ',' << fmt(tr) << ',' << fmt(cr) << '\n';
    std::printf("  %-12s %-6.3g %-6.0f %-8.4g %-12.4g %-8.3g %.3g\n",
                r.medium.c_str(), mv, std::round(t), zb, zm, tr, cr);
  }
  return kExitOk;
}

}  // namespace

int cmd_calibrate(const Options& options) {
  const scenario::Scenario sc = scenario::load_scenario(options.scenario_path);
  const calibration::CalibrationResult result =
      calibration::calibrate(calibration_config(sc), medium_from(sc));
  fs::create_directories(options.out_dir);
  write_calibration_csv(fs::path(options.out_dir) / "calibration.csv", result);
  print_calibration_table(result);
  return kExitOk;
}

int cmd_run(const Options& options) { return run_or_baseline(options, false); }

int cmd_baseline(const Options& options) {
  return run_or_baseline(options, true);
}

int cmd_sweep(const Options& options) {
  if (options.seeds.empty())
    throw std::invalid_argument("at least one --seeds value is required");
  const scenario::Scenario base = scenario::load_scenario(options.scenario_path);
  for (const std::string& name : sim::material_names()) {
    scenario::Scenario sc = base;
    const std::vector<Disk> objects = sc.world.objects;
    const double f0 = sc.world.f0, amp = sc.world.periodic_amp;
    const double sg = sc.world.startup_gain, st = sc.world.startup_tau;
    const std::uint64_t seed = sc.world.rng_seed;
    sc.world = sim::material_preset(name);
    sc.world.objects = objects;
    sc.world.f0 = f0;
    sc.world.periodic_amp = amp;
    sc.world.startup_gain = sg;
    sc.world.startup_tau = st;
    sc.world.rng_seed = seed;
    sc.material = name;

    const fs::path out = fs::path(options.out_dir) / name;
    fs::create_directories(out);
    std::printf("== %s ==\n", name.c_str());
    const calibration::CalibrationResult cal =
        calibration::calibrate(calibration_config(sc), medium_from(sc));
    write_calibration_csv(out / "calibration.csv", cal);
    print_calibration_table(cal);

    CalibrationD d{cal.mv_star, cal.t_star, cal.z_bar, cal.kernel_star};
    const int n_rev = sc.episode_revolutions();
    std::vector<sim::EpisodeResult> episodes(options.seeds.size());
    parallel_for(options.seeds.size(), options.max_workers,
                 [&](std::size_t i) {
                   sim::WorldConfig world = sc.world;
                   world.rng_seed = options.seeds[i];
                   trajectory::SpiralParams spiral = sc.spiral;
                   spiral.mv = d.mv_star;
                   episodes[i] =
                       sim::run_episode(spiral, sc.start, sc.end, world,
                                        sc.consts, detector_config(sc, d), n_rev);
                 });
    std::vector<SeedRow> rows(options.seeds.size());
    for (std::size_t i = 0; i < options.seeds.size(); ++i) {
      const auto& e = episodes[i];
      rows[i] = {options.seeds[i], e.outcome.triggered, e.outcome.stop_index,
                 e.zeta, e.collision};
      std::ofstream os(out / ("episode_" + std::to_string(options.seeds[i]) +
                              ".csv"));
      sim::write_episode_csv(os, e);
    }
    const SummaryStats stats = stats_of(rows);
    write_summary_csv(out / "summary.csv", rows, stats, d);
    print_summary(rows, stats);
  }
  return report_into(options.out_dir);
}

int cmd_report(const Options& options) {
  return report_into(options.out_dir);
}

}  // namespace grains::cli
