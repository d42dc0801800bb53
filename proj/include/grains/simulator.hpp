#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grains/detector.hpp"
#include "grains/geometry.hpp"
#include "grains/measurement.hpp"
#include "grains/rng.hpp"
#include "grains/trajectory.hpp"

namespace grains::sim {

// Parametric surrogate of the probe-granule interaction: constant drag,
// per-revolution sinusoidal modulation, a decaying breakaway transient at the
// start, a polynomial jamming ramp while an object intersects the failure
// wedge, and additive Gaussian noise.
struct WorldConfig {
  std::vector<Disk> objects;
  double f0 = 12.0;            // baseline drag, N
  double periodic_amp = 1.5;   // per-revolution modulation, N
  double noise_sigma = 0.12;   // N
  double wedge_radius = 0.042;      // failure-wedge reach, m
  double wedge_half_angle = 0.55;   // rad
  double jamming_gain = 10.0;       // N at full wedge penetration
  double jamming_exponent = 2.0;
  double startup_gain = 2.0;   // static-friction breakaway amplitude, N
  double startup_tau = 0.004;  // arc-length decay of the breakaway, m
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct ProbeState {
  Pose2D pos;
  double heading = 0.0;       // rad, instantaneous motion direction
  double arc_position = 0.0;  // m traveled along the path
};

struct WedgeHit {
  bool contains = false;
  double depth = 0.0;  // wedge_radius minus nearest in-sector boundary point
};

// Does the disk intersect the failure-wedge sector ahead of the probe, and
// how deep does it reach into it.
WedgeHit wedge_contains(const ProbeState& probe, const WorldConfig& cfg,
                        const Disk& object);

// Force vector on the probe at the given spiral phase; magnitude per the
// surrogate model, direction opposing the instantaneous heading.
Pose2D force_at(const ProbeState& probe, const WorldConfig& cfg,
                double theta_phase, Rng& rng);

// Steps along a discretized spiral polyline at constant arc speed.
class PathWalker {
 public:
  PathWalker(const trajectory::SpiralParams& spiral, Pose2D start, Pose2D end,
             int n_rev);

  // Probe state after traveling `arc` meters; nullopt past the path end.
  std::optional<ProbeState> at_arc(double arc) const;
  double total_length() const { return cumulative_.back(); }
  double theta_at_arc(double arc) const;

 private:
  std::vector<Pose2D> points_;
  std::vector<double> cumulative_;
  double theta_step_ = 0.0;
};

struct EpisodeResult {
  std::vector<Measurement> stream;
  std::vector<double> d_nearest;  // signed distance to nearest surface, m
  bool collision = false;
  std::int64_t collision_index = -1;
  detector::DetectionOutcome outcome;
  std::vector<detector::TraceRow> trace;
  double zeta = std::numeric_limits<double>::quiet_NaN();
};

// Full GRAINS episode: walk the spiral for n_rev revolutions, sample the
// surrogate forces at f_s, stream them through the detector, halt at the
// trigger or the path end. The collision flag is ground truth, independent
// of the detector.
EpisodeResult run_episode(const trajectory::SpiralParams& spiral, Pose2D start,
                          Pose2D end, const WorldConfig& world,
                          const trajectory::RobotConstants& consts,
                          const detector::DetectorConfig& det_cfg, int n_rev);

// Same kinematics and forces, but the stop rule is a fixed threshold on the
// filtered force magnitude (the pre-defined force-bar baseline).
EpisodeResult run_episode_baseline(const trajectory::SpiralParams& spiral,
                                   Pose2D start, Pose2D end,
                                   const WorldConfig& world,
                                   const trajectory::RobotConstants& consts,
                                   double force_threshold, double filter_cutoff,
                                   int n_rev);

// Object-free measurement stream for calibration sweeps; same kinematics and
// force model, no detector attached.
std::vector<Measurement> explore_stream(const trajectory::SpiralParams& spiral,
                                        Pose2D start, Pose2D end,
                                        const WorldConfig& world,
                                        const trajectory::RobotConstants& consts,
                                        int n_rev);

// Built-in material presets: "sand", "cassia", "cat-litter", "soybean".
// Values are implementer-chosen so the presets differ in wedge reach, noise
// and ramp sharpness; they are not measured properties.
WorldConfig material_preset(std::string_view name);
std::vector<std::string> material_names();

// Episode trace CSV: detector schema plus d_nearest_object and collision.
void write_episode_csv(std::ostream& os, const EpisodeResult& episode);

}  // namespace grains::sim
