#pragma once

#include <utility>
#include <vector>

#include "grains/geometry.hpp"

namespace grains::trajectory {

// Spiral search path parameters: circular radius CR, advance per revolution
// AV, dimensionless speed ratio MV, and discretization count per revolution.
struct SpiralParams {
  double cr = 0.02;   // m
  double av = 0.01;   // m
  double mv = 0.2;    // in (0, 1]
  int h = 1000;       // segments per revolution

  void validate() const;
};

// End-effector speed cap and force sampling rate of the rig.
struct RobotConstants {
  double v_max = 0.08968;  // m/s
  double f_s = 62.5;       // Hz

  void validate() const;
};

struct Heading {
  Pose2D unit;
  double angle;  // rad, full-quadrant
};

// Unit direction and angle of the start->end segment. Rejects start == end.
Heading heading(Pose2D start, Pose2D end);

// Probe position at spiral phase theta (rad, may exceed 2*pi; the circle
// center keeps advancing along the heading).
Pose2D spiral_point(const SpiralParams& params, Pose2D start, Pose2D end,
                    double theta);

// Pointwise positions for n_rev revolutions, theta_i = i * 2*pi/h.
// Returns n_rev*h + 1 points, the first being exactly `start`.
std::vector<Pose2D> discretize_path(const SpiralParams& params, Pose2D start,
                                    Pose2D end, int n_rev);

// Polyline length of one revolution, summed over h segments. Depends only on
// cr, av and h, not on the start/end choice.
double revolution_path_length(const SpiralParams& params);

// Expected force-pattern period in samples: l_p / (v_max * mv) * f_s.
double periodicity(const SpiralParams& params, const RobotConstants& consts);

}  // namespace grains::trajectory
