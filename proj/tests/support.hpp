#pragma once

#include <doctest.h>

#include "seal/candidates.hpp"
#include "seal/criticality.hpp"
#include "seal/geometry.hpp"
#include "seal/rng.hpp"
#include "seal/scenario.hpp"
#include "seal/sim.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <string>

namespace seal::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("seal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Constant-velocity trajectory of `n` points.
inline Trajectory straight(Vec2 start, Vec2 velocity, int n, int start_index = 0) {
  Trajectory t;
  t.start_index = start_index;
  for (int i = 0; i < n; ++i) t.points.push_back(start + velocity * (i * kDt));
  return t;
}

inline Trajectory random_trajectory(CounterRng& rng, int n, int start_index = 0) {
  Trajectory t;
  t.start_index = start_index;
  Vec2 p{rng.uniform(-50, 50), rng.uniform(-50, 50)};
  double h = rng.uniform(-kPi, kPi), v = rng.uniform(0, 20);
  for (int i = 0; i < n; ++i) {
    t.points.push_back(p);
    h += rng.uniform(-0.1, 0.1);
    v = std::max(0.0, v + rng.uniform(-1, 1));
    p += v * kDt * heading_vector(h);
  }
  return t;
}

/// Rotation by `angle` then translation by `shift`.
inline Trajectory rigid(const Trajectory& t, double angle, Vec2 shift) {
  const Eigen::Rotation2Dd r(angle);
  Trajectory out = t;
  for (auto& p : out.points) p = r * p + shift;
  return out;
}

/// Rectangular road from x = -100 to 300, |y| <= half_width, one lane per 3.5 m
/// centred on y = 0, 3.5, ...
inline MapInfo straight_road(double half_width = 7.0, int lanes = 1) {
  MapInfo m;
  for (int i = 0; i < lanes; ++i) {
    const double y = 3.5 * i;
    m.lanes.push_back(Lane{i + 1, 3.5, {{-100.0, y}, {300.0, y}}, {}, {}});
  }
  m.road_edges.push_back({{-100.0, -half_width}, {300.0, -half_width}, {300.0, half_width},
                          {-100.0, half_width}, {-100.0, -half_width}});
  return m;
}

inline Scenario two_agent(Trajectory ego, Trajectory adv, MapInfo map = straight_road()) {
  Scenario s;
  s.id = "fixture";
  s.trajectories[0] = std::move(ego);
  s.trajectories[1] = std::move(adv);
  s.dims[0] = {};
  s.dims[1] = {};
  s.map = std::move(map);
  return s;
}

/// Ego eastbound along y = 0 at 10 m/s, adversary northbound along x = 30 at
/// 10 m/s. The adversary's front bumper first reaches the ego's flank at step 30.
inline Scenario crossing() {
  MapInfo m;
  m.lanes = {Lane{1, 3.5, {{-100.0, 0.0}, {200.0, 0.0}}, {}, {}}, Lane{2, 3.5, {{30.0, -100.0}, {30.0, 100.0}}, {}, {}}};
  m.road_edges = {{{-100.0, -100.0}, {200.0, -100.0}, {200.0, 100.0}, {-100.0, 100.0}, {-100.0, -100.0}}};
  return two_agent(straight({0.0, 0.0}, {10.0, 0.0}, kScenarioSteps), straight({30.0, -32.75}, {0.0, 10.0}, kScenarioSteps),
                   std::move(m));
}

}  // namespace seal::test
