#pragma once

#include "seal/criticality.hpp"
#include "seal/rng.hpp"
#include "seal/sim.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <vector>

namespace seal {

inline constexpr int kSkillHorizon = 10;
inline constexpr int kDefaultClusters = 32;
inline constexpr int kDefaultSwitchOffset = 10;
/// Switch step meaning "replay the candidate for the whole episode".
inline constexpr int kSwitchNever = std::numeric_limits<int>::max();

/// speed, heading error to subgoal, subgoal distance, nearest agent relative
/// x / y / vx / vy (own frame), lateral lane offset, road-edge distance.
inline constexpr int kObsDim = 9;
using ObsFeature = Eigen::Matrix<double, kObsDim, 1>;

/// Divisors applied before nearest-member distances.
inline constexpr std::array<double, kObsDim> kObsScale = {10.0, 1.0, 10.0, 20.0, 5.0, 5.0, 5.0, 2.0, 5.0};
/// Two cutpoints per dimension give three prior cells per dimension.
inline constexpr std::array<std::array<double, 2>, kObsDim> kObsCuts = {{
    {5.0, 12.0},
    {-0.15, 0.15},
    {4.0, 10.0},
    {-10.0, 10.0},
    {-2.0, 2.0},
    {-2.0, 2.0},
    {-1.0, 1.0},
    {-0.5, 0.5},
    {1.5, 4.0},
}};
inline constexpr double kNoNeighbourRange = 50.0;
inline constexpr double kMaxEdgeDistance = 10.0;

ObsFeature observe(const Scenario& s, const std::map<AgentId, AgentState>& states,
                   const std::map<AgentId, bool>& active, AgentId self, const Vec2& subgoal);
ObsFeature normalise(const ObsFeature& obs);
std::uint32_t quantise(const ObsFeature& obs);

/// Subgoal tracker along a reference path: the first checkpoint more than
/// 1 m ahead of the projected position, else the last one.
class SubgoalCursor {
 public:
  SubgoalCursor() = default;
  explicit SubgoalCursor(const Trajectory& reference);
  Vec2 next(const Vec2& position);

 private:
  Polyline path_;
  Polyline subgoals_;
  std::vector<double> subgoal_s_;
  std::size_t index_ = 0;
};

struct DemoCorpus {
  std::vector<Scenario> scenarios;
  std::vector<RolloutRecord> rollouts;  ///< rollouts[i] is a run of scenarios[i]
};

/// Every agent follows IDM with a per-agent jittered desired speed; episodes
/// run to the step budget regardless of ego events.
DemoCorpus collect_demonstrations(const std::vector<Scenario>& scenarios, std::uint64_t seed);

enum class SkillLabel { Benign, Adversarial, Excluded };
std::string_view to_string(SkillLabel l);

struct SegmentSource {
  std::string scenario_id;
  AgentId agent = 0;
  int start_step = 0;
  bool operator==(const SegmentSource&) const = default;
};

struct SkillSegment {
  ObsFeature obs_start = ObsFeature::Zero();
  std::vector<Action> actions;
  SkillLabel label = SkillLabel::Benign;
  SegmentSource source;
};

/// Window-rule label for a segment starting at `start`: exclusion within 2H
/// before an off-road event wins over adversarial within 2H before a collision.
SkillLabel label_window(int start, int horizon, std::optional<int> collision_step, std::optional<int> offroad_step);

/// Windows of H actions at stride H/2 over every controlled agent trace.
std::vector<SkillSegment> segment_and_label(const DemoCorpus& corpus, int horizon = kSkillHorizon);

/// P(cluster | observation cell) with +1 smoothing; cells without data use
/// the smoothed marginal.
class SkillPrior {
 public:
  SkillPrior() = default;
  explicit SkillPrior(int clusters) : marginal_(static_cast<std::size_t>(clusters), 0.0) {}

  void add(std::uint32_t cell, int cluster);
  std::vector<double> conditional(std::uint32_t cell) const;
  bool occupied(std::uint32_t cell) const { return cells_.contains(cell); }
  int clusters() const { return static_cast<int>(marginal_.size()); }
  const std::map<std::uint32_t, std::vector<double>>& cells() const { return cells_; }
  const std::vector<double>& marginal() const { return marginal_; }

  static SkillPrior from_counts(std::vector<double> marginal, std::map<std::uint32_t, std::vector<double>> cells);

 private:
  std::vector<double> marginal_;
  std::map<std::uint32_t, std::vector<double>> cells_;
};

enum class PriorMode { Benign, Adversarial };

struct SkillLibrary {
  int horizon = kSkillHorizon;
  Eigen::MatrixXd codebook;  ///< C x 2H centroids, rows are (steer, accel) interleaved
  std::vector<SkillSegment> members;
  std::vector<int> assignment;  ///< cluster of each member
  std::vector<std::vector<int>> cluster_members;
  SkillPrior benign_prior;
  SkillPrior adversarial_prior;

  int clusters() const { return static_cast<int>(codebook.rows()); }
  const SkillPrior& prior(PriorMode m) const { return m == PriorMode::Benign ? benign_prior : adversarial_prior; }
};

Eigen::VectorXd flatten_actions(const std::vector<Action>& actions);

/// Seeded k-means (k-means++ init, at most `max_iter` Lloyd steps). Ties go
/// to the lowest cluster index.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, Eigen::MatrixXd& centroids,
                        int max_iter = 100);

SkillLibrary build_library(const std::vector<SkillSegment>& segments, int clusters, std::uint64_t seed);

int select_skill(const SkillLibrary& lib, const ObsFeature& obs, PriorMode mode, CounterRng& rng, bool greedy = false);
int select_skill(const SkillLibrary& lib, const ObsFeature& obs, PriorMode mode, std::uint64_t seed,
                 bool greedy = false);

/// Action sequence of the member nearest to `obs` in normalised feature space;
/// the centroid sequence for an empty cluster.
std::vector<Action> execute_skill(const SkillLibrary& lib, int cluster, const ObsFeature& obs);

/// max(0, argmin_t mean_history |candidate_t - ego_t| - offset); ties to the earliest t.
int compute_switch_step(const Trajectory& candidate, const EgoHistory& history, int offset = kDefaultSwitchOffset);

struct SkillAdversaryConfig {
  PriorMode mode = PriorMode::Adversarial;
  bool greedy = false;
};

/// Reactive adversary: tracks the spliced candidate until `switch_step`, then
/// selects a skill every H steps from the chosen prior and decodes it in
/// closed loop (nearest member re-evaluated each step).
class SkillAdversaryFactory : public ControllerFactory {
 public:
  SkillAdversaryFactory(std::shared_ptr<const SkillLibrary> lib, Trajectory candidate, int switch_step,
                        SkillAdversaryConfig config = {});
  std::unique_ptr<AgentController> create(const Scenario& s, AgentId self, std::uint64_t seed) const override;

  int switch_step() const { return switch_step_; }
  const Trajectory& candidate() const { return candidate_; }

 private:
  std::shared_ptr<const SkillLibrary> lib_;
  Trajectory candidate_;
  int switch_step_;
  SkillAdversaryConfig config_;
};

/// Tracks a time-indexed reference: pure pursuit towards the reference point
/// a few steps ahead, speed and along-track position feedback longitudinally.
class ReferenceTracker {
 public:
  ReferenceTracker() = default;
  explicit ReferenceTracker(const Trajectory& reference);
  Action act(const AgentState& state, int step) const;

 private:
  static constexpr int kLookaheadSteps = 2;
  Vec2 point(int step) const;
  Trajectory ref_;
};

void save_library(const SkillLibrary& lib, const std::filesystem::path& path);
SkillLibrary load_library(const std::filesystem::path& path);

}  // namespace seal
