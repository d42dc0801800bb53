#include "grains/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace grains::sim {

void WorldConfig::validate() const {
  if (!(f0 > 0.0)) throw std::invalid_argument("WorldConfig: f0 must be > 0");
  if (!(wedge_radius > 0.0))
    throw std::invalid_argument("WorldConfig: wedge_radius must be > 0");
  if (!(wedge_half_angle > 0.0 && wedge_half_angle <= M_PI / 2.0))
    throw std::invalid_argument(
        "WorldConfig: wedge_half_angle must be in (0, pi/2]");
  if (jamming_gain < 0.0)
    throw std::invalid_argument("WorldConfig: jamming_gain must be >= 0");
  if (!(jamming_exponent > 0.0))
    throw std::invalid_argument("WorldConfig: jamming_exponent must be > 0");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("WorldConfig: noise_sigma must be >= 0");
  if (startup_gain < 0.0)
    throw std::invalid_argument("WorldConfig: startup_gain must be >= 0");
  if (!(startup_tau > 0.0))
    throw std::invalid_argument("WorldConfig: startup_tau must be > 0");
  for (const Disk& d : objects)
    if (!(d.radius > 0.0))
      throw std::invalid_argument("WorldConfig: object radii must be > 0");
}

WedgeHit wedge_contains(const ProbeState& probe, const WorldConfig& cfg,
                        const Disk& object) {
  // Work in the probe frame: apex at the origin, heading along +x.
  const double c = std::cos(probe.heading);
  const double s = std::sin(probe.heading);
  const Pose2D rel = object.center - probe.pos;
  const Pose2D p{c * rel.x + s * rel.y, -s * rel.x + c * rel.y};
  const double dist_c = norm(p);
  const double rw = cfg.wedge_radius;
  const double alpha = cfg.wedge_half_angle;
  const double r = object.radius;

  double nearest = std::numeric_limits<double>::infinity();
  if (dist_c <= r) {
    nearest = 0.0;  // apex inside the object
  } else {
    // Boundary point of the disk closest to the apex.
    const double d1 = dist_c - r;
    const Pose2D p1 = (d1 / dist_c) * p;
    if (d1 <= rw && std::abs(std::atan2(p1.y, p1.x)) <= alpha)
      nearest = d1;
    // Disk crossings of the two sector edge rays.
    for (const double sign : {1.0, -1.0}) {
      const Pose2D e{std::cos(sign * alpha), std::sin(sign * alpha)};
      const double b = dot(e, p);
      const double disc = b * b - (dist_c * dist_c - r * r);
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      for (const double t : {b - sq, b + sq})
        if (t >= 0.0 && t <= rw) nearest = std::min(nearest, t);
    }
    // Disk crossings of the outer arc (only relevant when nothing nearer
    // was found: they sit at the wedge reach itself).
    if (nearest > rw && std::abs(dist_c - r) <= rw && rw <= dist_c + r) {
      const double a = (rw * rw - r * r + dist_c * dist_c) / (2.0 * dist_c);
      const double h2 = rw * rw - a * a;
      if (h2 >= 0.0) {
        const double h = std::sqrt(h2);
        const Pose2D base = (a / dist_c) * p;
        const Pose2D perp{-p.y / dist_c, p.x / dist_c};
        for (const double sign : {1.0, -1.0}) {
          const Pose2D q = base + (sign * h) * perp;
          if (std::abs(std::atan2(q.y, q.x)) <= alpha) {
            nearest = rw;
            break;
          }
        }
      }
    }
  }
  if (nearest > rw) return {};
  return {true, std::clamp(rw - nearest, 0.0, rw)};
}

Pose2D force_at(const ProbeState& probe, const WorldConfig& cfg,
                double theta_phase, Rng& rng) {
  double magnitude = cfg.f0 + cfg.periodic_amp * std::sin(theta_phase) +
                     cfg.startup_gain *
                         std::exp(-probe.arc_position / cfg.startup_tau);
  for (const Disk& object : cfg.objects) {
    const WedgeHit hit = wedge_contains(probe, cfg, object);
    if (hit.contains)
      magnitude += cfg.jamming_gain *
                   std::pow(hit.depth / cfg.wedge_radius, cfg.jamming_exponent);
  }
  magnitude += cfg.noise_sigma * rng.gaussian();
  return {-magnitude * std::cos(probe.heading),
          -magnitude * std::sin(probe.heading)};
}

PathWalker::PathWalker(const trajectory::SpiralParams& spiral, Pose2D start,
                       Pose2D end, int n_rev)
    : points_(trajectory::discretize_path(spiral, start, end, n_rev)),
      theta_step_(2.0 * M_PI / spiral.h) {
  cumulative_.resize(points_.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + distance(points_[i - 1], points_[i]);
}

std::optional<ProbeState> PathWalker::at_arc(double arc) const {
  if (arc < 0.0 || arc > cumulative_.back()) return std::nullopt;
  const auto it =
      std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
  std::size_t seg = std::min<std::size_t>(it - cumulative_.begin(),
                                          cumulative_.size() - 1);
  if (seg == 0) seg = 1;
  const std::size_t i = seg - 1;
  const double seg_len = cumulative_[seg] - cumulative_[i];
  const double frac = seg_len > 0.0 ? (arc - cumulative_[i]) / seg_len : 0.0;
  const Pose2D dir = points_[seg] - points_[i];
  ProbeState state;
  state.pos = points_[i] + frac * dir;
  state.heading = std::atan2(dir.y, dir.x);
  state.arc_position = arc;
  return state;
}

double PathWalker::theta_at_arc(double arc) const {
  const auto it =
      std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
  std::size_t seg = std::min<std::size_t>(it - cumulative_.begin(),
                                          cumulative_.size() - 1);
  if (seg == 0) seg = 1;
  const std::size_t i = seg - 1;
  const double seg_len = cumulative_[seg] - cumulative_[i];
  const double frac =
      seg_len > 0.0 ? std::clamp((arc - cumulative_[i]) / seg_len, 0.0, 1.0)
                    : 0.0;
  return (static_cast<double>(i) + frac) * theta_step_;
}

namespace {

double nearest_surface_distance(Pose2D pos,
                                const std::vector<Disk>& objects) {
  double best = std::numeric_limits<double>::infinity();
  for (const Disk& d : objects) best = std::min(best, surface_distance(pos, d));
  return best;
}

// Common episode loop. `stop` is called with the filtered magnitude of the
// measurement just ingested and returns true to halt.
template <typename Ingest>
EpisodeResult run_common(const trajectory::SpiralParams& spiral, Pose2D start,
                         Pose2D end, const WorldConfig& world,
                         const trajectory::RobotConstants& consts, int n_rev,
                         Ingest&& ingest) {
  spiral.validate();
  consts.validate();
  world.validate();
  if (n_rev < 1) throw std::invalid_argument("run_episode: n_rev must be >= 1");

  const PathWalker walker(spiral, start, end, n_rev);
  const double step = consts.v_max * spiral.mv / consts.f_s;
  Rng rng(world.rng_seed);

  EpisodeResult episode;
  for (std::int64_t t = 0;; ++t) {
    const auto state = walker.at_arc(t * step);
    if (!state) break;  // path end
    const double theta = walker.theta_at_arc(t * step);
    const Pose2D f = force_at(*state, world, theta, rng);
    Measurement m{t, state->pos, f.x, f.y};
    episode.stream.push_back(m);
    const double d_surface =
        world.objects.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : nearest_surface_distance(state->pos, world.objects);
    episode.d_nearest.push_back(d_surface);
    if (!episode.collision && d_surface <= 0.0) {
      episode.collision = true;
      episode.collision_index = t;
    }
    if (ingest(m)) break;
  }
  return episode;
}

}  // namespace

EpisodeResult run_episode(const trajectory::SpiralParams& spiral, Pose2D start,
                          Pose2D end, const WorldConfig& world,
                          const trajectory::RobotConstants& consts,
                          const detector::DetectorConfig& det_cfg, int n_rev) {
  detector::Detector det(det_cfg);
  EpisodeResult episode =
      run_common(spiral, start, end, world, consts, n_rev,
                 [&](const Measurement& m) { return det.push(m).has_value(); });
  episode.outcome = det.outcome();
  episode.trace = det.trace();
  if (episode.outcome.triggered && !world.objects.empty())
    episode.zeta = detector::sensing_range(episode.outcome, world.objects);
  return episode;
}

EpisodeResult run_episode_baseline(const trajectory::SpiralParams& spiral,
                                   Pose2D start, Pose2D end,
                                   const WorldConfig& world,
                                   const trajectory::RobotConstants& consts,
                                   double force_threshold, double filter_cutoff,
                                   int n_rev) {
  signal::LowPassFilter fx(filter_cutoff), fy(filter_cutoff);
  std::vector<double> magnitudes;
  EpisodeResult episode = run_common(
      spiral, start, end, world, consts, n_rev, [&](const Measurement& m) {
        magnitudes.push_back(std::hypot(fx.step(m.fx), fy.step(m.fy)));
        return magnitudes.back() >= force_threshold;
      });
  episode.trace.reserve(episode.stream.size());
  for (std::size_t i = 0; i < episode.stream.size(); ++i) {
    const Measurement& m = episode.stream[i];
    detector::TraceRow row;
    row.t = m.t;
    row.x = m.pos.x;
    row.y = m.pos.y;
    row.fx = m.fx;
    row.fy = m.fy;
    row.f_mag_filtered = magnitudes[i];
    row.mu_star = row.sigma_star = row.z =
        std::numeric_limits<double>::quiet_NaN();
    row.triggered = false;
    episode.trace.push_back(row);
  }
  if (!magnitudes.empty() && magnitudes.back() >= force_threshold) {
    const Measurement& last = episode.stream.back();
    episode.trace.back().triggered = true;
    episode.outcome.triggered = true;
    episode.outcome.stop_index = last.t;
    episode.outcome.stop_pos = last.pos;
    episode.outcome.trigger_z = magnitudes.back();  // force, not a z-score
    if (!world.objects.empty())
      episode.zeta = detector::sensing_range(episode.outcome, world.objects);
  }
  return episode;
}

std::vector<Measurement> explore_stream(const trajectory::SpiralParams& spiral,
                                        Pose2D start, Pose2D end,
                                        const WorldConfig& world,
                                        const trajectory::RobotConstants& consts,
                                        int n_rev) {
  return run_common(spiral, start, end, world, consts, n_rev,
                    [](const Measurement&) { return false; })
      .stream;
}

WorldConfig material_preset(std::string_view name) {
  WorldConfig w;
  if (name == "sand") {
    w.wedge_radius = 0.042;
    w.noise_sigma = 0.12;
    w.jamming_gain = 10.0;
    w.jamming_exponent = 2.0;
  } else if (name == "cat-litter") {
    w.wedge_radius = 0.050;
    w.noise_sigma = 0.20;
    w.jamming_gain = 10.0;
    w.jamming_exponent = 2.0;
  } else if (name == "cassia") {
    w.wedge_radius = 0.028;
    w.noise_sigma = 0.12;
    w.jamming_gain = 9.0;
    w.jamming_exponent = 2.5;
  } else if (name == "soybean") {
    w.wedge_radius = 0.015;
    w.noise_sigma = 0.16;
    w.jamming_gain = 8.0;
    w.jamming_exponent = 3.0;
  } else {
    throw std::invalid_argument("material_preset: unknown material '" +
                                std::string(name) + "'");
  }
  return w;
}

std::vector<std::string> material_names() {
  return {"sand", "cassia", "cat-litter", "soybean"};
}

void write_episode_csv(std::ostream& os, const EpisodeResult& episode) {
  os << "t,x,y,fx,fy,f_mag_filtered,mu_star,sigma_star,z,triggered,"
        "d_nearest_object,collision\n";
  char buf[400];
  for (std::size_t i = 0; i < episode.trace.size(); ++i) {
    const auto& r = episode.trace[i];
    const double d = i < episode.d_nearest.size()
                         ? episode.d_nearest[i]
                         : std::numeric_limits<double>::quiet_NaN();
    const bool collided = episode.collision &&
                          static_cast<std::int64_t>(i) >= episode.collision_index;
    std::snprintf(
        buf, sizeof(buf),
        "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%d\n",
        static_cast<long long>(r.t), r.x, r.y, r.fx, r.fy, r.f_mag_filtered,
        r.mu_star, r.sigma_star, r.z, r.triggered ? 1 : 0, d, collided ? 1 : 0);
    os << buf;
  }
}

}  // namespace grains::sim
