#pragma once

#include "seal/scenario.hpp"
#include "seal/sim.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace seal {

/// Fixed-edge histogram over [lo, hi); samples outside clamp to the end bins.
struct Histogram {
  double lo = 0;
  double hi = 1;
  std::vector<double> mass;

  Histogram() = default;
  Histogram(double lo, double hi, int bins) : lo(lo), hi(hi), mass(static_cast<std::size_t>(bins), 0.0) {}

  int bins() const { return static_cast<int>(mass.size()); }
  double width() const { return (hi - lo) / bins(); }
  double center(int k) const { return lo + (k + 0.5) * width(); }
  void add(double x);
  /// Scales to unit mass; returns false (leaving zeros) when there are no samples.
  bool normalise();
  bool empty() const;
};

Histogram yaw_histogram();   ///< 21 bins over [-1.5, 1.5] rad/s
Histogram accel_histogram(); ///< 21 bins over [-8, 8] m/s^2
Histogram road_histogram();  ///< 2 unit bins centred on 0 and 1

/// W1 = sum_k |CDF_p(k) - CDF_q(k)| * bin width.
double wasserstein_1d(const Histogram& p, const Histogram& q);

struct BehaviorProfile {
  Histogram yaw = yaw_histogram();
  Histogram accel = accel_histogram();
  Histogram road = road_histogram();
};

/// Profile of one agent trace over steps [from, to) of its coverage.
BehaviorProfile build_profile(const AgentTrace& trace, const AgentDims& dims, const MapInfo& map, int from, int to);
BehaviorProfile build_profile(const RolloutRecord& rollout, AgentId agent, const Scenario& base);

struct RealismScore {
  double yaw = 0;
  double acc = 0;
  double road = 0;
  double mean() const { return (yaw + acc + road) / 3.0; }
};

/// Adversary profile of the roll-out against the recorded adversary over the
/// steps both cover.
RealismScore realism(const RolloutRecord& rollout, const Scenario& base);

struct CollisionStats {
  int crashes = 0;
  double mean_velocity = 0;
  double head_on_rate = 0;
  double severe_head_on_rate = 0;
};

inline constexpr double kHeadOnMinAngle = 135.0 * kPi / 180.0;
inline constexpr double kSevereSpeed = 5.0;

bool is_head_on(const Contact& c);
CollisionStats collision_stats(const std::vector<RolloutRecord>& rollouts);

struct OutcomeRates {
  double success = 0, crash = 0, offroad = 0, timeout = 0;
};

struct MetricsReport {
  std::string run_id;
  int n_episodes = 0;
  OutcomeRates rates;
  RealismScore realism;
  double realism_mean = 0;
  CollisionStats collision;

  bool operator==(const MetricsReport&) const;
};

/// `bases[i]` is the base scenario of `rollouts[i]`.
MetricsReport aggregate(const std::vector<RolloutRecord>& rollouts, const std::vector<Scenario>& bases,
                        std::string run_id = "");

std::string report_json(const MetricsReport& r);
MetricsReport parse_report(std::string_view json_text);

/// One CSV row per episode, with a header line.
std::string episodes_csv(const std::vector<RolloutRecord>& rollouts, const std::vector<Scenario>& bases);

}  // namespace seal
