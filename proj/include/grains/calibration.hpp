#pragma once

#include <functional>
#include <span>
#include <vector>

#include "grains/gp.hpp"
#include "grains/measurement.hpp"
#include "grains/trajectory.hpp"

namespace grains::calibration {

struct CalibrationConfig {
  std::vector<double> mv_candidates{0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  trajectory::SpiralParams spiral;  // mv field is replaced per candidate
  double explore_distance = 0.20;   // m of linear advance per candidate
  trajectory::RobotConstants consts;
  int window_m = 2000;
  int horizon_m_star = 1000;
  double filter_cutoff = 0.08;
  bool use_abs_z = false;   // max(z) over |z| instead of signed z
  double z_margin = 1.0;    // multiplier applied to the observed max
  bool tune_every_window = false;  // re-tune hyperparameters on every window
  bool parallel = true;
  gp::FitOptions fit_options = default_fit_options();

  static gp::FitOptions default_fit_options();
  void validate() const;
};

// Per-candidate sweep outcome; `excluded` marks runs too short to form a
// fit/score window pair.
struct CandidateReport {
  double mv = 0.0;
  double period = 0.0;  // T_i, samples
  double rmse = 0.0;
  double max_z = 0.0;
  int n_windows = 0;
  bool excluded = false;
  gp::KernelParams kernel;  // as fitted on the first window
};

struct CalibrationResult {
  double mv_star = 0.0;
  double t_star = 0.0;
  double z_bar = 0.0;
  gp::KernelParams kernel_star;
  std::vector<CandidateReport> per_candidate;
};

// Root mean squared error of a z-score sequence.
double rmse_of_zscores(std::span<const double> z);

// Produces the object-free measurement stream for one candidate speed. Must
// be deterministic in (mv, n_rev) so results do not depend on the candidate
// list ordering.
using MediumSource =
    std::function<std::vector<Measurement>(double mv, int n_rev)>;

// Sweep the MV candidates over object-free exploration runs: fit a GP on
// window k, z-score window k+1, and select the candidate with minimum RMSE
// (ties resolve to the smallest MV). z_bar is the maximum z-score observed
// at the winning candidate times z_margin.
CalibrationResult calibrate(const CalibrationConfig& config,
                            const MediumSource& medium);

}  // namespace grains::calibration
