#pragma once

#include <cstdint>

#include "grains/geometry.hpp"

namespace grains {

// One sample of the online measurement set: probe position plus the planar
// force reading from the load cell.
struct Measurement {
  std::int64_t t = 0;
  Pose2D pos;
  double fx = 0.0;  // N
  double fy = 0.0;  // N
};

}  // namespace grains
