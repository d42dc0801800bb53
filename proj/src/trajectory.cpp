#include "grains/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace grains::trajectory {

void SpiralParams::validate() const {
  if (!(cr > 0.0)) throw std::invalid_argument("SpiralParams: cr must be > 0");
  if (!(av > 0.0)) throw std::invalid_argument("SpiralParams: av must be > 0");
  if (!(mv > 0.0 && mv <= 1.0))
    throw std::invalid_argument("SpiralParams: mv must be in (0, 1]");
  if (h < 8) throw std::invalid_argument("SpiralParams: h must be >= 8");
}

void RobotConstants::validate() const {
  if (!(v_max > 0.0))
    throw std::invalid_argument("RobotConstants: v_max must be > 0");
  if (!(f_s > 0.0))
    throw std::invalid_argument("RobotConstants: f_s must be > 0");
}

Heading heading(Pose2D start, Pose2D end) {
  const Pose2D u = end - start;
  const double n = norm(u);
  if (n == 0.0)
    throw std::invalid_argument("heading: start and end coincide");
  return {{u.x / n, u.y / n}, std::atan2(u.y, u.x)};
}

Pose2D spiral_point(const SpiralParams& params, Pose2D start, Pose2D end,
                    double theta) {
  if (theta < 0.0) throw std::invalid_argument("spiral_point: theta < 0");
  const Heading h = heading(start, end);
  const double advance = params.cr + theta / (2.0 * M_PI) * params.av;
  const double big_theta = h.angle + M_PI + theta;
  return {start.x + advance * h.unit.x + params.cr * std::cos(big_theta),
          start.y + advance * h.unit.y + params.cr * std::sin(big_theta)};
}

std::vector<Pose2D> discretize_path(const SpiralParams& params, Pose2D start,
                                    Pose2D end, int n_rev) {
  params.validate();
  if (n_rev < 1) throw std::invalid_argument("discretize_path: n_rev < 1");
  const int n_points = n_rev * params.h + 1;
  std::vector<Pose2D> points;
  points.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double theta = i * (2.0 * M_PI / params.h);
    points.push_back(spiral_point(params, start, end, theta));
  }
  return points;
}

double revolution_path_length(const SpiralParams& params) {
  params.validate();
  // Shape is translation/rotation invariant; use the canonical +x heading.
  const Pose2D start{0.0, 0.0};
  const Pose2D end{1.0, 0.0};
  double length = 0.0;
  Pose2D prev = spiral_point(params, start, end, 0.0);
  for (int i = 1; i <= params.h; ++i) {
    const Pose2D cur =
        spiral_point(params, start, end, i * (2.0 * M_PI / params.h));
    length += distance(prev, cur);
    prev = cur;
  }
  return length;
}

double periodicity(const SpiralParams& params, const RobotConstants& consts) {
  params.validate();
  consts.validate();
  return revolution_path_length(params) / (consts.v_max * params.mv) *
         consts.f_s;
}

}  // namespace grains::trajectory
