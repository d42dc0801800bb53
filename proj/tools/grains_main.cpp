#include <CLI11.hpp>
#include <iostream>

#include "grains/commands.hpp"

int main(int argc, char** argv) {
  using grains::cli::Options;

  CLI::App app{"GRAINS: haptic proximity sensing in granular media "
               "(calibration, episodes, baseline comparison, reports)"};
  app.require_subcommand(1);

  Options options;
  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", options.scenario_path,
                      "scenario config file")
          ->required();
    cmd->add_option("--out", options.out_dir, "output directory")->required();
    cmd->add_option("--seeds", options.seeds, "episode seeds");
    cmd->add_option("--workers", options.max_workers,
                    "max parallel episodes (0 = auto)");
  };

  auto* calibrate = app.add_subcommand(
      "calibrate", "sweep MV candidates over object-free runs");
  add_common(calibrate, true);

  auto* run = app.add_subcommand("run", "run seeded detection episodes");
  add_common(run, true);
  run->add_option("--mv", options.mv, "inline MV* (with --t-star and --z-bar)");
  run->add_option("--t-star", options.t_star, "inline T*");
  run->add_option("--z-bar", options.z_bar, "inline z threshold");

  auto* baseline = app.add_subcommand(
      "baseline", "run seeded episodes with the fixed force threshold");
  add_common(baseline, true);
  baseline->add_option("--threshold", options.threshold,
                       "force bar in newtons");

  auto* sweep = app.add_subcommand(
      "sweep", "calibrate + run every material preset into <out>/<material>");
  add_common(sweep, true);

  auto* report = app.add_subcommand(
      "report", "merge run summaries under <out> into report.csv");
  report->add_option("--out", options.out_dir, "directory of run outputs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : grains::cli::kExitUsage;
  }

  try {
    if (calibrate->parsed()) return grains::cli::cmd_calibrate(options);
    if (run->parsed()) return grains::cli::cmd_run(options);
    if (baseline->parsed()) return grains::cli::cmd_baseline(options);
    if (sweep->parsed()) return grains::cli::cmd_sweep(options);
    if (report->parsed()) return grains::cli::cmd_report(options);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return grains::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return grains::cli::kExitRuntime;
  }
  return grains::cli::kExitUsage;
}
