#include "support.hpp"

#include "seal/metrics.hpp"

using namespace seal;

namespace {

Histogram random_histogram(CounterRng& rng, int bins = 21) {
  Histogram h(-1.5, 1.5, bins);
  for (auto& m : h.mass) m = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  if (!h.normalise()) h.mass[0] = 1.0;
  return h;
}

AgentTrace constant_trace(int n, double speed_a, double speed_b) {
  AgentTrace tr;
  double x = 0;
  for (int i = 0; i < n; ++i) {
    tr.trajectory.points.push_back({x, 0.0});
    tr.heading.push_back(0.0);
    tr.speed.push_back(i % 2 ? speed_b : speed_a);
    x += tr.speed.back() * kDt;
  }
  return tr;
}

RolloutRecord replay_of(const Scenario& s) { return run_episode(s, replay_all(s), 0); }

Trajectory swerve(Vec2 start, double speed, double amplitude) {
  Trajectory t;
  for (int i = 0; i < kScenarioSteps; ++i)
    t.points.push_back(start + Vec2(speed * i * kDt, amplitude * std::sin(i * kDt * 2.5)));
  return t;
}

Contact contact(double ego_heading, double other_heading, double closing) {
  Contact c;
  c.other = 1;
  c.normal = {1, 0};
  c.relative_speed = -closing;
  c.ego_heading = ego_heading;
  c.other_heading = other_heading;
  return c;
}

Scenario transformed(const Scenario& s, double angle, Vec2 shift) {
  const Eigen::Rotation2Dd r(angle);
  Scenario out = s;
  for (auto& [id, t] : out.trajectories) t = test::rigid(t, angle, shift);
  for (auto& lane : out.map.lanes)
    for (auto& p : lane.centerline) p = r * p + shift;
  for (auto& edge : out.map.road_edges)
    for (auto& p : edge) p = r * p + shift;
  return out;
}

}  // namespace

TEST_CASE("W1 is a metric on histograms") {
  CounterRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Histogram p = random_histogram(rng), q = random_histogram(rng), r = random_histogram(rng);
    CHECK(wasserstein_1d(p, p) == 0.0);
    CHECK(wasserstein_1d(p, q) >= 0.0);
    CHECK(std::abs(wasserstein_1d(p, q) - wasserstein_1d(q, p)) < 1e-12);
    CHECK(wasserstein_1d(p, r) <= wasserstein_1d(p, q) + wasserstein_1d(q, r) + 1e-12);
  }
}

TEST_CASE("W1 worked values") {
  Histogram a = road_histogram(), b = road_histogram();
  a.add(0.0);
  b.add(1.0);
  a.normalise();
  b.normalise();
  CHECK(wasserstein_1d(a, b) == doctest::Approx(1.0).epsilon(1e-12));

  Histogram uniform(0.0, 1.0, 10), point(0.0, 1.0, 10);
  for (int k = 0; k < 10; ++k) uniform.add(uniform.center(k));
  point.add(0.0);
  uniform.normalise();
  point.normalise();
  // sum of (1 - 0.1 k) over k = 1..9, times the bin width
  CHECK(wasserstein_1d(uniform, point) == doctest::Approx(0.45).epsilon(1e-12));

  CHECK_THROWS_AS(wasserstein_1d(yaw_histogram(), accel_histogram()), ValidationError);
}

TEST_CASE("histograms clamp out-of-range samples") {
  Histogram h = accel_histogram();
  h.add(-100);
  h.add(100);
  h.add(0);
  REQUIRE(h.normalise());
  CHECK(h.mass.front() == doctest::Approx(1.0 / 3));
  CHECK(h.mass.back() == doctest::Approx(1.0 / 3));
  CHECK(h.mass[10] == doctest::Approx(1.0 / 3));
  Histogram e = yaw_histogram();
  CHECK_FALSE(e.normalise());
  CHECK(e.empty());
}

TEST_CASE("profiles of simple traces") {
  const MapInfo road = test::straight_road();
  const AgentTrace steady = constant_trace(40, 8, 8);
  const BehaviorProfile p = build_profile(steady, AgentDims{}, road, 0, 40);
  CHECK(p.yaw.mass[10] == doctest::Approx(1.0));
  CHECK(p.accel.mass[10] == doctest::Approx(1.0));
  CHECK(p.road.mass[0] == doctest::Approx(1.0));

  // speed alternating by 1 m/s each step: +-10 m/s^2, clamped to the end bins
  const AgentTrace jerky = constant_trace(41, 5, 6);
  const BehaviorProfile j = build_profile(jerky, AgentDims{}, road, 0, 41);
  CHECK(j.accel.mass.front() == doctest::Approx(0.5));
  CHECK(j.accel.mass.back() == doctest::Approx(0.5));

  CHECK_THROWS_AS(build_profile(steady, AgentDims{}, road, 5, 6), ValidationError);
}

TEST_CASE("realism: replay is zero, a swerve is not") {
  const Scenario s = test::two_agent(test::straight({0, 0}, {10, 0}, kScenarioSteps),
                                     test::straight({-20, 3.5}, {9, 0}, kScenarioSteps), test::straight_road(7.0, 2));
  const RealismScore r = realism(replay_of(s), s);
  CHECK(r.yaw == 0.0);
  CHECK(r.acc == 0.0);
  CHECK(r.road == 0.0);
  CHECK(r.mean() == 0.0);

  Scenario swerving = s;
  swerving.trajectories[1] = swerve({-20, 3.5}, 9, 2.0);
  RolloutRecord rec = replay_of(swerving);
  const RealismScore w = realism(rec, s);
  CHECK(w.yaw > r.yaw);

  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Scenario g = generate_synthetic(seed, static_cast<Template>(seed % 3), 2);
    CHECK(realism(replay_of(g), g).mean() == 0.0);
  }
}

TEST_CASE("realism is invariant under rigid motion of the whole episode") {
  for (std::uint64_t seed = 0; seed < 9; ++seed) {
    const Scenario base = generate_synthetic(seed, static_cast<Template>(seed % 3), 1);
    Scenario played = base;
    played.trajectories[base.adv_id] = sample_candidates(base, seed).candidates[seed % kNumCandidates];
    played.trajectories[base.adv_id] = splice_candidate(base, played.trajectories[base.adv_id]);
    const RealismScore a = realism(replay_of(played), base);
    for (const auto& [angle, shift] : std::vector<std::pair<double, Vec2>>{{0.0, {250, -80}}, {0.9, {-30, 12}}}) {
      const Scenario mb = transformed(base, angle, shift), mp = transformed(played, angle, shift);
      const RealismScore b = realism(replay_of(mp), mb);
      CHECK(std::abs(a.yaw - b.yaw) < 1e-9);
      CHECK(std::abs(a.acc - b.acc) < 1e-9);
      CHECK(std::abs(a.road - b.road) < 1e-9);
    }
  }
}

TEST_CASE("collision statistics") {
  RolloutRecord none;
  CHECK(collision_stats({none, none}).crashes == 0);
  CHECK(collision_stats({none}).mean_velocity == 0.0);
  CHECK(collision_stats({}).head_on_rate == 0.0);

  RolloutRecord fast;
  fast.outcome = Outcome::Crash;
  fast.contact = contact(0.0, kPi, 6.0);
  const CollisionStats f = collision_stats({fast});
  CHECK(f.crashes == 1);
  CHECK(f.mean_velocity == doctest::Approx(6.0));
  CHECK(f.head_on_rate == 1.0);
  CHECK(f.severe_head_on_rate == 1.0);

  RolloutRecord slow = fast;
  slow.contact = contact(0.0, kPi, 3.0);
  const CollisionStats s = collision_stats({slow});
  CHECK(s.head_on_rate == 1.0);
  CHECK(s.severe_head_on_rate == 0.0);

  // band edges: 135 degrees counts, 134 does not
  CHECK(is_head_on(contact(0.3, 0.3 + kHeadOnMinAngle + 1e-9, 1)));
  CHECK_FALSE(is_head_on(contact(0.3, 0.3 + 134.0 * kPi / 180.0, 1)));
  // differences wrap: 3.5 rad apart is 2.78 rad the short way, 6 rad is 0.28
  CHECK(is_head_on(contact(3.0, -0.5, 1)));
  CHECK_FALSE(is_head_on(contact(3.0, -3.0, 1)));

  RolloutRecord side = fast;
  side.contact = contact(0.0, kPi / 2, 9.0);
  const CollisionStats mixed = collision_stats({fast, side, none, slow});
  CHECK(mixed.crashes == 3);
  CHECK(mixed.mean_velocity == doctest::Approx(6.0));
  CHECK(mixed.head_on_rate == doctest::Approx(0.5));
  CHECK(mixed.severe_head_on_rate == doctest::Approx(0.25));
}

TEST_CASE("aggregate counts outcomes and round-trips") {
  const Scenario s = test::two_agent(test::straight({0, 0}, {10, 0}, kScenarioSteps),
                                     test::straight({-20, 3.5}, {9, 0}, kScenarioSteps), test::straight_road(7.0, 2));
  const RolloutRecord base = replay_of(s);
  std::vector<RolloutRecord> rolls(10, base);
  const std::vector<Scenario> bases(10, s);
  for (auto& r : rolls) r.outcome = Outcome::Success;
  MetricsReport all = aggregate(rolls, bases, "all");
  CHECK(all.rates.success == 1.0);
  CHECK(all.rates.crash + all.rates.offroad + all.rates.timeout == 0.0);

  for (int i = 6; i < 9; ++i) {
    rolls[static_cast<std::size_t>(i)].outcome = Outcome::Crash;
    rolls[static_cast<std::size_t>(i)].contact = contact(0, 1, 2.0);
  }
  rolls[9].outcome = Outcome::OutOfRoad;
  const MetricsReport rep = aggregate(rolls, bases, "mixed");
  CHECK(rep.n_episodes == 10);
  CHECK(rep.rates.success == doctest::Approx(0.6));
  CHECK(rep.rates.crash == doctest::Approx(0.3));
  CHECK(rep.rates.offroad == doctest::Approx(0.1));
  CHECK(rep.rates.success + rep.rates.crash + rep.rates.offroad + rep.rates.timeout == doctest::Approx(1.0));
  CHECK(rep.collision.mean_velocity == doctest::Approx(2.0));
  CHECK(rep.realism_mean == 0.0);

  CHECK(parse_report(report_json(rep)) == rep);
  CHECK_THROWS_AS(parse_report("{\"run_id\": 1}"), ParseError);
  CHECK_THROWS_AS(aggregate(rolls, {s}), ValidationError);

  const std::string csv = episodes_csv(rolls, bases);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}
