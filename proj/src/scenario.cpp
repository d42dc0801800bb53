#include "grains/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace grains::scenario {

namespace {

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& what) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " +
                              what);
}

std::vector<double> parse_numbers(const std::string& value,
                                  const std::string& origin, int line,
                                  const std::string& key) {
  std::istringstream is(value);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  std::string rest;
  if (is.clear(), is >> rest)
    fail(origin, line, "invalid number in value for key '" + key + "'");
  if (out.empty())
    fail(origin, line, "key '" + key + "' has no value");
  return out;
}

double parse_one(const std::string& value, const std::string& origin, int line,
                 const std::string& key) {
  const auto nums = parse_numbers(value, origin, line, key);
  if (nums.size() != 1)
    fail(origin, line, "key '" + key + "' expects a single number");
  return nums[0];
}

Pose2D parse_pose(const std::string& value, const std::string& origin,
                  int line, const std::string& key) {
  const auto nums = parse_numbers(value, origin, line, key);
  if (nums.size() != 2)
    fail(origin, line, "key '" + key + "' expects two numbers (x y)");
  return {nums[0], nums[1]};
}

}  // namespace

int Scenario::episode_revolutions() const {
  return std::max(
      1, static_cast<int>(std::ceil(explore_distance / spiral.av - 1e-9)));
}

Scenario parse_scenario(std::istream& is, const std::string& origin) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    Entry entry{line_no, trim(raw.substr(0, eq)), trim(raw.substr(eq + 1))};
    if (entry.key.empty()) fail(origin, line_no, "empty key");
    entries.push_back(std::move(entry));
  }

  Scenario sc;
  // Preset first, so explicit keys override it wherever they appear.
  for (const Entry& e : entries) {
    if (e.key != "material") continue;
    try {
      sc.world = sim::material_preset(e.value);
    } catch (const std::invalid_argument& ex) {
      fail(origin, e.line, ex.what());
    }
    sc.material = e.value;
  }

  for (const Entry& e : entries) {
    const std::string& k = e.key;
    const std::string& v = e.value;
    if (k == "material") {
      continue;
    } else if (k == "object") {
      const auto nums = parse_numbers(v, origin, e.line, k);
      if (nums.size() != 3)
        fail(origin, e.line, "key 'object' expects three numbers (x y radius)");
      sc.world.objects.push_back({{nums[0], nums[1]}, nums[2]});
    } else if (k == "f0") {
      sc.world.f0 = parse_one(v, origin, e.line, k);
    } else if (k == "periodic_amp") {
      sc.world.periodic_amp = parse_one(v, origin, e.line, k);
    } else if (k == "noise_sigma") {
      sc.world.noise_sigma = parse_one(v, origin, e.line, k);
    } else if (k == "wedge_radius") {
      sc.world.wedge_radius = parse_one(v, origin, e.line, k);
    } else if (k == "wedge_half_angle") {
      sc.world.wedge_half_angle = parse_one(v, origin, e.line, k);
    } else if (k == "jamming_gain") {
      sc.world.jamming_gain = parse_one(v, origin, e.line, k);
    } else if (k == "jamming_exponent") {
      sc.world.jamming_exponent = parse_one(v, origin, e.line, k);
    } else if (k == "startup_gain") {
      sc.world.startup_gain = parse_one(v, origin, e.line, k);
    } else if (k == "startup_tau") {
      sc.world.startup_tau = parse_one(v, origin, e.line, k);
    } else if (k == "seed") {
      sc.world.rng_seed =
          static_cast<std::uint64_t>(parse_one(v, origin, e.line, k));
    } else if (k == "cr") {
      sc.spiral.cr = parse_one(v, origin, e.line, k);
    } else if (k == "av") {
      sc.spiral.av = parse_one(v, origin, e.line, k);
    } else if (k == "mv") {
      sc.spiral.mv = parse_one(v, origin, e.line, k);
    } else if (k == "h") {
      sc.spiral.h = static_cast<int>(parse_one(v, origin, e.line, k));
    } else if (k == "v_max") {
      sc.consts.v_max = parse_one(v, origin, e.line, k);
    } else if (k == "f_s") {
      sc.consts.f_s = parse_one(v, origin, e.line, k);
    } else if (k == "start") {
      sc.start = parse_pose(v, origin, e.line, k);
    } else if (k == "end") {
      sc.end = parse_pose(v, origin, e.line, k);
    } else if (k == "explore_distance") {
      sc.explore_distance = parse_one(v, origin, e.line, k);
    } else if (k == "calibration_explore") {
      sc.calibration_explore = parse_one(v, origin, e.line, k);
    } else if (k == "mv_candidates") {
      sc.mv_candidates = parse_numbers(v, origin, e.line, k);
    } else if (k == "window_m") {
      sc.window_m = static_cast<int>(parse_one(v, origin, e.line, k));
    } else if (k == "horizon_m_star") {
      sc.horizon_m_star = static_cast<int>(parse_one(v, origin, e.line, k));
    } else if (k == "z_threshold") {
      sc.z_threshold = parse_one(v, origin, e.line, k);
    } else if (k == "filter_cutoff") {
      sc.filter_cutoff = parse_one(v, origin, e.line, k);
    } else if (k == "refit_stride") {
      sc.refit_stride = static_cast<int>(parse_one(v, origin, e.line, k));
    } else if (k == "zero_offset_samples") {
      sc.zero_offset_samples = static_cast<int>(parse_one(v, origin, e.line, k));
    } else if (k == "z_margin") {
      sc.z_margin = parse_one(v, origin, e.line, k);
    } else {
      fail(origin, e.line, "unknown key '" + k + "'");
    }
  }

  try {
    sc.world.validate();
    sc.spiral.validate();
    sc.consts.validate();
  } catch (const std::invalid_argument& ex) {
    throw std::invalid_argument(origin + ": " + ex.what());
  }
  if (!(sc.explore_distance > 0.0) || !(sc.calibration_explore > 0.0))
    throw std::invalid_argument(origin + ": exploration distances must be > 0");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::invalid_argument("cannot open scenario file '" + path + "'");
  return parse_scenario(is, path);
}

}  // namespace grains::scenario
