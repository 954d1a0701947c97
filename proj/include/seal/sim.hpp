#pragma once

#include "seal/geometry.hpp"
#include "seal/scenario.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace seal {

inline constexpr double kMaxAccel = 4.0;   ///< m/s^2 at accel = +1
inline constexpr double kMaxBrake = 6.0;   ///< m/s^2 at accel = -1
inline constexpr double kMaxSteer = 0.5;   ///< front-wheel angle (rad) at steer = +-1
inline constexpr double kWheelbaseRatio = 0.6;
inline constexpr double kSuccessRadius = 2.0;

struct AgentState {
  Vec2 position = Vec2::Zero();
  double heading = 0;
  double speed = 0;
  AgentDims footprint;

  Vec2 velocity() const { return speed * heading_vector(heading); }
  Box box() const { return Box{position, heading, footprint.length, footprint.width}; }
  double wheelbase() const { return kWheelbaseRatio * footprint.length; }
};

/// Normalised controls; both components are clamped to [-1, 1] on construction.
struct Action {
  double steer = 0;
  double accel = 0;

  Action() = default;
  Action(double s, double a) : steer(std::clamp(s, -1.0, 1.0)), accel(std::clamp(a, -1.0, 1.0)) {}

  bool operator==(const Action&) const = default;
};

/// Physical acceleration for a normalised command: [-1, 0] -> [-6, 0], [0, 1] -> [0, 4].
double accel_from_command(double command);
double command_from_accel(double accel);
/// Normalised steer for a front-wheel angle, clamped.
double command_from_steer_angle(double angle);

/// Kinematic bicycle over one step, integrated exactly along the arc.
AgentState step_kinematics(const AgentState& state, const Action& action, double dt = kDt);

struct IdmParams {
  double desired_speed = 10.0;
  double min_gap = 2.0;
  double time_headway = 1.5;
  double max_accel = 2.0;
  double comfortable_decel = 4.0;
  double exponent = 4.0;
};

struct Leader {
  double gap;    ///< bumper to bumper, m
  double speed;  ///< m/s
};

/// Intelligent driver model acceleration, clamped to [-6, 4] m/s^2.
double idm_accel(const AgentState& follower, std::optional<Leader> leader, const IdmParams& params);

struct ContactInfo {
  Vec2 normal;            ///< unit, from the first box towards the second
  double relative_speed;  ///< (v_b - v_a) . normal
  double penetration;
};

std::optional<ContactInfo> detect_collision(const AgentState& a, const AgentState& b);

/// True iff any footprint corner lies outside the drivable region.
bool detect_offroad(const AgentState& state, const MapInfo& map);

// ---------------------------------------------------------------------------
// Episodes

/// What every controller sees: all agent states as of the previous step.
struct WorldView {
  const Scenario& scenario;
  int step;  ///< the step about to be produced
  const std::map<AgentId, AgentState>& states;
  const std::map<AgentId, bool>& active;
};

/// Per-episode mutable policy state.
class AgentController {
 public:
  virtual ~AgentController() = default;
  virtual Action act(const WorldView& world, AgentId self) = 0;
};

/// Immutable, shareable recipe for fresh controllers.
class ControllerFactory {
 public:
  virtual ~ControllerFactory() = default;
  virtual std::unique_ptr<AgentController> create(const Scenario& s, AgentId self, std::uint64_t seed) const = 0;
};

struct ReplayPolicy {
  Trajectory trajectory;
};

struct IdmPolicy {
  IdmParams params;
  /// Route followed laterally; empty means the agent's recorded path.
  Polyline route;
};

struct SkillAdversaryPolicy {
  std::shared_ptr<const ControllerFactory> factory;
};

struct TrainableEgoPolicy {
  std::shared_ptr<const ControllerFactory> factory;
};

using AgentPolicy = std::variant<ReplayPolicy, IdmPolicy, SkillAdversaryPolicy, TrainableEgoPolicy>;
using PolicyBinding = std::map<AgentId, AgentPolicy>;

/// Every agent replays its recorded trajectory.
PolicyBinding replay_all(const Scenario& s);
/// Default IDM parameters for an agent: desired speed = peak recorded speed.
IdmParams default_idm(const Scenario& s, AgentId id);

enum class Outcome { Success, Crash, OutOfRoad, Timeout };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view name);

struct AgentTrace {
  Trajectory trajectory;  ///< realised positions
  std::vector<double> heading;
  std::vector<double> speed;
  std::vector<Action> actions;  ///< actions[i] moves the agent from point i to i+1; empty for replay
  std::optional<int> collision_step;
  std::optional<AgentId> collision_with;
  std::optional<int> offroad_step;

  bool operator==(const AgentTrace&) const = default;
};

struct Contact {
  AgentId other = -1;
  Vec2 normal = Vec2::Zero();  ///< from ego towards the other agent
  double relative_speed = 0;
  double ego_heading = 0;
  double other_heading = 0;
  bool operator==(const Contact&) const = default;
};

struct RolloutRecord {
  std::string scenario_id;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  int term_step = 0;
  std::map<AgentId, AgentTrace> agents;
  std::optional<Contact> contact;

  const AgentTrace& trace(AgentId id) const;
  bool operator==(const RolloutRecord&) const = default;
};

struct EpisodeOptions {
  /// Stop at the first ego crash / off-road / goal arrival. Demonstration
  /// collection disables this and runs every agent to the end.
  bool stop_on_ego_event = true;
  /// Defaults to 1.5x the scenario horizon.
  std::optional<int> max_steps;
};

/// The trace a replayed trajectory produces: derived headings and
/// forward-difference speeds.
AgentTrace trace_from_trajectory(const Trajectory& t, const AgentDims& dims);

/// Fixed-step closed-loop simulation. Agents are updated in ascending id and
/// all observe the previous step's states. Bit-deterministic in its inputs.
RolloutRecord run_episode(const Scenario& s, const PolicyBinding& bindings, std::uint64_t seed,
                          const EpisodeOptions& options = {});

/// Pure-pursuit + speed tracking of a time-indexed trajectory; shared by IDM
/// lateral control and the adversary's candidate replay.
Action track_reference(const AgentState& state, std::span<const Vec2> path, std::span<const double> cumulative,
                       double target_speed, double lookahead_scale = 1.0);

/// Nearest active agent ahead along `route` inside a corridor of +-`half_width`.
std::optional<Leader> find_leader(const WorldView& world, AgentId self, std::span<const Vec2> route,
                                  std::span<const double> cumulative, double half_width, double lookahead = 60.0);

/// Lane width of the lane nearest to `p` (3.5 m when the map has no lanes).
double lane_width_near(const MapInfo& map, const Vec2& p);

/// Initial state of an agent at its first recorded step.
AgentState initial_state(const Scenario& s, AgentId id);

}  // namespace seal
