#pragma once

#include <cmath>
#include <stdexcept>

namespace grains {

// Planar position in meters.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
};

inline Pose2D operator+(Pose2D a, Pose2D b) { return {a.x + b.x, a.y + b.y}; }
inline Pose2D operator-(Pose2D a, Pose2D b) { return {a.x - b.x, a.y - b.y}; }
inline Pose2D operator*(double s, Pose2D p) { return {s * p.x, s * p.y}; }

inline double dot(Pose2D a, Pose2D b) { return a.x * b.x + a.y * b.y; }
inline double norm(Pose2D p) { return std::hypot(p.x, p.y); }
inline double distance(Pose2D a, Pose2D b) { return norm(a - b); }

// Disk obstacle buried in the medium.
struct Disk {
  Pose2D center;
  double radius = 0.0;
};

// Unsigned distance from a point to the disk boundary.
inline double distance_to_boundary(Pose2D p, const Disk& d) {
  return std::abs(distance(p, d.center) - d.radius);
}

// Signed distance to the disk surface: negative inside.
inline double surface_distance(Pose2D p, const Disk& d) {
  return distance(p, d.center) - d.radius;
}

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace grains
