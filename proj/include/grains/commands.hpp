#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace grains::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags or scenario config
inline constexpr int kExitRuntime = 2;  // failure while running

struct Options {
  std::string scenario_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  double threshold = 15.0;  // baseline force bar, N
  // Inline calibration override; all three must be given together.
  std::optional<double> mv;
  std::optional<double> t_star;
  std::optional<double> z_bar;
  int max_workers = 0;  // 0 -> hardware concurrency
};

int cmd_calibrate(const Options& options);
int cmd_run(const Options& options);
int cmd_baseline(const Options& options);
int cmd_sweep(const Options& options);
int cmd_report(const Options& options);

}  // namespace grains::cli
