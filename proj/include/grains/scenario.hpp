#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "grains/simulator.hpp"
#include "grains/trajectory.hpp"

namespace grains::scenario {

// Everything a reproducible experiment needs, loaded from a flat key-value
// file. z_threshold = 0 means "not yet calibrated".
struct Scenario {
  sim::WorldConfig world;
  trajectory::SpiralParams spiral;
  trajectory::RobotConstants consts;
  Pose2D start{0.0, 0.0};
  Pose2D end{1.0, 0.0};
  double explore_distance = 0.20;       // episode advance, m
  double calibration_explore = 0.20;    // calibration advance per MV, m
  std::vector<double> mv_candidates{0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  int window_m = 2000;
  int horizon_m_star = 1000;
  double z_threshold = 0.0;
  double filter_cutoff = 0.08;
  int refit_stride = 0;
  int zero_offset_samples = 0;
  double z_margin = 1.0;
  std::string material;  // preset name, if one was applied

  int episode_revolutions() const;
};

// Parse from a stream; `origin` labels error messages. Unknown keys are
// rejected. A `material` key applies the preset first; explicit keys then
// override individual fields regardless of their position in the file.
Scenario parse_scenario(std::istream& is, const std::string& origin);

// Load from a file; throws std::invalid_argument on missing file or any
// parse error.
Scenario load_scenario(const std::string& path);

}  // namespace grains::scenario
