#include <doctest.h>

#include <sstream>

#include "grains/scenario.hpp"

using namespace grains;
using namespace grains::scenario;

TEST_CASE("parse_scenario: full key set round-trips") {
  std::istringstream is(R"(
# test scenario
material = sand
object = 0.14 0.0 0.012
object = 0.3 -0.1 0.02
f0 = 11.5
periodic_amp = 1.25    # trailing comment
noise_sigma = 0.09
wedge_radius = 0.05
wedge_half_angle = 0.5
jamming_gain = 7.5
jamming_exponent = 2.2
startup_gain = 1.5
startup_tau = 0.006
seed = 9
cr = 0.025
av = 0.012
mv = 0.3
h = 500
v_max = 0.1
f_s = 50
start = 0.01 0.02
end = 1.0 0.5
explore_distance = 0.3
calibration_explore = 0.25
mv_candidates = 0.2 0.3 0.4
window_m = 1500
horizon_m_star = 700
z_threshold = 4.2
filter_cutoff = 0.1
refit_stride = 350
zero_offset_samples = 50
z_margin = 1.1
)");
  const Scenario sc = parse_scenario(is, "inline");
  CHECK(sc.material == "sand");
  REQUIRE(sc.world.objects.size() == 2);
  CHECK(sc.world.objects[1].center.y == doctest::Approx(-0.1));
  CHECK(sc.world.f0 == 11.5);
  CHECK(sc.world.periodic_amp == 1.25);
  CHECK(sc.world.noise_sigma == 0.09);
  CHECK(sc.world.wedge_radius == 0.05);  // explicit key beats the preset
  CHECK(sc.world.jamming_gain == 7.5);
  CHECK(sc.world.startup_tau == 0.006);
  CHECK(sc.world.rng_seed == 9);
  CHECK(sc.spiral.cr == 0.025);
  CHECK(sc.spiral.mv == 0.3);
  CHECK(sc.spiral.h == 500);
  CHECK(sc.consts.f_s == 50);
  CHECK(sc.start.y == 0.02);
  CHECK(sc.end.x == 1.0);
  CHECK(sc.explore_distance == 0.3);
  CHECK(sc.calibration_explore == 0.25);
  CHECK(sc.mv_candidates == std::vector<double>{0.2, 0.3, 0.4});
  CHECK(sc.window_m == 1500);
  CHECK(sc.horizon_m_star == 700);
  CHECK(sc.z_threshold == 4.2);
  CHECK(sc.filter_cutoff == 0.1);
  CHECK(sc.refit_stride == 350);
  CHECK(sc.zero_offset_samples == 50);
  CHECK(sc.z_margin == 1.1);
  CHECK(sc.episode_revolutions() == 25);  // 0.3 m at 0.012 m per revolution
}

TEST_CASE("parse_scenario: material preset applies before explicit keys") {
  std::istringstream forward(
      "noise_sigma = 0.4\nmaterial = soybean\n");
  const Scenario a = parse_scenario(forward, "inline");
  // explicit key wins even though the material line comes later
  CHECK(a.world.noise_sigma == 0.4);
  CHECK(a.world.wedge_radius ==
        sim::material_preset("soybean").wedge_radius);
}

TEST_CASE("parse_scenario: unknown key is rejected by name") {
  std::istringstream is("wedge_radiusx = 0.1\n");
  try {
    parse_scenario(is, "inline");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("wedge_radiusx") != std::string::npos);
  }
}

TEST_CASE("parse_scenario: malformed values are rejected") {
  std::istringstream bad_num("f0 = twelve\n");
  CHECK_THROWS_AS(parse_scenario(bad_num, "inline"), std::invalid_argument);
  std::istringstream bad_pose("start = 0.1\n");
  CHECK_THROWS_AS(parse_scenario(bad_pose, "inline"), std::invalid_argument);
  std::istringstream bad_obj("object = 0.1 0.2\n");
  CHECK_THROWS_AS(parse_scenario(bad_obj, "inline"), std::invalid_argument);
  std::istringstream no_eq("f0 12\n");
  CHECK_THROWS_AS(parse_scenario(no_eq, "inline"), std::invalid_argument);
  std::istringstream bad_material("material = granite\n");
  CHECK_THROWS_AS(parse_scenario(bad_material, "inline"),
                  std::invalid_argument);
  std::istringstream invalid_world("f0 = -3\n");
  CHECK_THROWS_AS(parse_scenario(invalid_world, "inline"),
                  std::invalid_argument);
}

TEST_CASE("load_scenario: missing file is rejected") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/path.cfg"),
                  std::invalid_argument);
}
