#include "seal/sim.hpp"

#include "seal/rng.hpp"

#include <algorithm>
#include <limits>

namespace seal {

double accel_from_command(double command) {
  command = std::clamp(command, -1.0, 1.0);
  return command >= 0 ? kMaxAccel * command : kMaxBrake * command;
}

double command_from_accel(double accel) {
  return accel >= 0 ? std::min(accel / kMaxAccel, 1.0) : std::max(accel / kMaxBrake, -1.0);
}

double command_from_steer_angle(double angle) { return std::clamp(angle / kMaxSteer, -1.0, 1.0); }

AgentState step_kinematics(const AgentState& state, const Action& action, double dt) {
  const double a = accel_from_command(action.accel);
  const double delta = kMaxSteer * std::clamp(action.steer, -1.0, 1.0);
  const double v = state.speed;

  double ds;
  double v_next = v + a * dt;
  if (v_next < 0) {
    // stops within the step
    ds = a < 0 ? v * (v / -a) / 2 : 0.0;
    v_next = 0;
  } else {
    ds = v * dt + 0.5 * a * dt * dt;
  }

  AgentState next = state;
  next.speed = v_next;
  if (ds <= 0) return next;

  const double curvature = std::tan(delta) / state.wheelbase();
  const double dtheta = curvature * ds;
  const double theta = state.heading;
  if (std::abs(dtheta) < 1e-12) {
    next.position += ds * heading_vector(theta);
  } else {
    next.position += Vec2(std::sin(theta + dtheta) - std::sin(theta), std::cos(theta) - std::cos(theta + dtheta)) /
                     curvature;
  }
  next.heading = wrap_angle(theta + dtheta);
  return next;
}

double idm_accel(const AgentState& follower, std::optional<Leader> leader, const IdmParams& p) {
  const double v = follower.speed;
  double a = p.max_accel * (1 - std::pow(v / p.desired_speed, p.exponent));
  if (leader) {
    if (leader->gap <= 0) return -kMaxBrake;
    const double dv = v - leader->speed;
    const double s_star =
        p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2 * std::sqrt(p.max_accel * p.comfortable_decel)));
    a -= p.max_accel * (s_star / leader->gap) * (s_star / leader->gap);
  }
  return std::clamp(a, -kMaxBrake, kMaxAccel);
}

std::optional<ContactInfo> detect_collision(const AgentState& a, const AgentState& b) {
  const auto hit = sat_overlap(a.box(), b.box());
  if (!hit) return std::nullopt;
  return ContactInfo{hit->normal, (b.velocity() - a.velocity()).dot(hit->normal), hit->penetration};
}

bool detect_offroad(const AgentState& state, const MapInfo& map) {
  if (map.road_edges.empty()) return false;
  return !box_in_region(state.box(), map.road_edges);
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "Success";
    case Outcome::Crash: return "Crash";
    case Outcome::OutOfRoad: return "OutOfRoad";
    case Outcome::Timeout: return "Timeout";
  }
  return "?";
}

Outcome outcome_from_string(std::string_view name) {
  if (name == "Success") return Outcome::Success;
  if (name == "Crash") return Outcome::Crash;
  if (name == "OutOfRoad") return Outcome::OutOfRoad;
  if (name == "Timeout") return Outcome::Timeout;
  throw ParseError("unknown outcome '" + std::string(name) + "'");
}

const AgentTrace& RolloutRecord::trace(AgentId id) const {
  auto it = agents.find(id);
  if (it == agents.end()) throw ValidationError("roll-out has no agent " + std::to_string(id));
  return it->second;
}

PolicyBinding replay_all(const Scenario& s) {
  PolicyBinding b;
  for (const auto& [id, t] : s.trajectories) b[id] = ReplayPolicy{t};
  return b;
}

IdmParams default_idm(const Scenario& s, AgentId id) {
  IdmParams p;
  const auto& pts = s.trajectory(id).points;
  double peak = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) peak = std::max(peak, (pts[i] - pts[i - 1]).norm() / kDt);
  p.desired_speed = peak > 0.5 ? peak : 10.0;
  return p;
}

double lane_width_near(const MapInfo& map, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  double width = 3.5;
  for (const auto& lane : map.lanes) {
    const double d = distance_to_polyline(p, lane.centerline);
    if (d < best) {
      best = d;
      width = lane.width;
    }
  }
  return width;
}

namespace {

AgentState state_from_points(std::span<const Vec2> pts, std::span<const double> headings, std::size_t i,
                             const AgentDims& dims) {
  AgentState st;
  st.position = pts[i];
  st.heading = headings[i];
  const std::size_t j = i + 1 < pts.size() ? i : i - 1;
  st.speed = (pts[j + 1] - pts[j]).norm() / kDt;
  st.footprint = dims;
  return st;
}

}  // namespace

AgentTrace trace_from_trajectory(const Trajectory& t, const AgentDims& dims) {
  AgentTrace tr;
  tr.trajectory = t;
  if (t.size() < 2) throw ValidationError("trace_from_trajectory: need at least two points");
  const auto headings = derive_headings(t.points);
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const AgentState st = state_from_points(t.points, headings, i, dims);
    tr.heading.push_back(st.heading);
    tr.speed.push_back(st.speed);
  }
  return tr;
}

AgentState initial_state(const Scenario& s, AgentId id) {
  const auto& t = s.trajectory(id);
  const auto headings = derive_headings(t.points);
  return state_from_points(t.points, headings, 0, s.dims_of(id));
}

Action track_reference(const AgentState& state, std::span<const Vec2> path, std::span<const double> cumulative,
                       double target_speed, double lookahead_scale) {
  const auto proj = project_onto_polyline(state.position, path);
  const double lookahead = lookahead_scale * std::max(3.0, 0.5 * state.speed);
  const Vec2 target = point_at_arc_length(path, cumulative, proj.arc_length + lookahead);
  const Vec2 rel = target - state.position;
  const double alpha = wrap_angle(std::atan2(rel.y(), rel.x()) - state.heading);
  const double dist = std::max(rel.norm(), 1e-6);
  const double delta = std::atan(2.0 * state.wheelbase() * std::sin(alpha) / dist);
  const double accel = std::clamp(1.5 * (target_speed - state.speed), -kMaxBrake, kMaxAccel);
  return Action(command_from_steer_angle(delta), command_from_accel(accel));
}

std::optional<Leader> find_leader(const WorldView& world, AgentId self, std::span<const Vec2> route,
                                  std::span<const double> cumulative, double half_width, double lookahead) {
  const AgentState& me = world.states.at(self);
  const auto mine = project_onto_polyline(me.position, route);
  const double route_len = cumulative.back();
  std::optional<Leader> best;
  double best_ds = std::numeric_limits<double>::infinity();
  for (const auto& [id, other] : world.states) {
    if (id == self || !world.active.at(id)) continue;
    if ((other.position - me.position).norm() > lookahead + 10) continue;
    const auto proj = project_onto_polyline(other.position, route);
    if (proj.distance > half_width) continue;
    if (proj.arc_length >= route_len && proj.distance > 1e-9) continue;
    const double ds = proj.arc_length - mine.arc_length;
    if (ds <= 0 || ds > lookahead || ds >= best_ds) continue;
    best_ds = ds;
    const double along = std::max(0.0, other.velocity().dot(heading_vector(proj.tangent_heading)));
    best = Leader{ds - 0.5 * (me.footprint.length + other.footprint.length), along};
  }
  return best;
}

namespace {

struct ReplayCache {
  const Trajectory* trajectory;
  std::vector<double> headings;
};

struct IdmCache {
  IdmParams params;
  Polyline route;
  std::vector<double> cumulative;
};

}  // namespace

RolloutRecord run_episode(const Scenario& s, const PolicyBinding& bindings, std::uint64_t seed,
                          const EpisodeOptions& options) {
  for (const auto& [id, t] : s.trajectories)
    if (!bindings.contains(id)) throw ConfigError("agent " + std::to_string(id) + " has no policy binding");

  const int horizon = s.horizon();
  const int max_steps = options.max_steps.value_or((3 * (horizon - 1)) / 2);

  std::map<AgentId, ReplayCache> replay;
  std::map<AgentId, IdmCache> idm;
  std::map<AgentId, std::unique_ptr<AgentController>> controllers;
  for (const auto& [id, policy] : bindings) {
    if (!s.trajectories.contains(id)) throw ConfigError("binding for unknown agent " + std::to_string(id));
    if (const auto* r = std::get_if<ReplayPolicy>(&policy)) {
      replay[id] = ReplayCache{&r->trajectory, derive_headings(r->trajectory.points)};
    } else if (const auto* p = std::get_if<IdmPolicy>(&policy)) {
      IdmCache c{p->params, p->route.empty() ? s.trajectory(id).points : p->route, {}};
      c.cumulative = cumulative_arc_length(c.route);
      idm[id] = std::move(c);
    } else if (const auto* a = std::get_if<SkillAdversaryPolicy>(&policy)) {
      controllers[id] = a->factory->create(s, id, mix_seed({seed, static_cast<std::uint64_t>(id)}));
    } else if (const auto* e = std::get_if<TrainableEgoPolicy>(&policy)) {
      controllers[id] = e->factory->create(s, id, mix_seed({seed, static_cast<std::uint64_t>(id)}));
    }
  }

  RolloutRecord rec;
  rec.scenario_id = s.id;
  rec.seed = seed;

  std::map<AgentId, AgentState> states;
  std::map<AgentId, bool> active;
  std::map<AgentId, bool> retired;

  auto spawn_state = [&](AgentId id) {
    if (auto it = replay.find(id); it != replay.end()) {
      const Trajectory& t = *it->second.trajectory;
      return state_from_points(t.points, it->second.headings, 0, s.dims_of(id));
    }
    return initial_state(s, id);
  };
  auto start_of = [&](AgentId id) {
    if (auto it = replay.find(id); it != replay.end()) return it->second.trajectory->start_index;
    return s.trajectory(id).start_index;
  };
  auto record = [&](AgentId id, int step) {
    AgentTrace& tr = rec.agents[id];
    if (tr.trajectory.points.empty()) tr.trajectory.start_index = step;
    const AgentState& st = states.at(id);
    tr.trajectory.points.push_back(st.position);
    tr.heading.push_back(st.heading);
    tr.speed.push_back(st.speed);
  };

  for (const auto& [id, t] : s.trajectories) {
    states[id] = AgentState{};
    states[id].footprint = s.dims_of(id);
    active[id] = false;
    retired[id] = false;
    if (start_of(id) == 0) {
      states[id] = spawn_state(id);
      active[id] = true;
      record(id, 0);
    }
  }

  const Vec2 goal = s.trajectory(s.ego_id).points.back();
  bool finished = false;
  rec.outcome = Outcome::Timeout;
  rec.term_step = max_steps;

  for (int step = 1; step <= max_steps && !finished; ++step) {
    const WorldView view{s, step, states, active};
    std::map<AgentId, AgentState> next = states;
    std::map<AgentId, bool> next_active = active;

    for (const auto& [id, _] : s.trajectories) {
      if (retired[id]) continue;
      if (!active[id]) {
        if (start_of(id) == step) {
          next[id] = spawn_state(id);
          next_active[id] = true;
        }
        continue;
      }
      if (auto it = replay.find(id); it != replay.end()) {
        const Trajectory& t = *it->second.trajectory;
        if (t.covers(step)) {
          next[id] = state_from_points(t.points, it->second.headings, static_cast<std::size_t>(step - t.start_index),
                                       s.dims_of(id));
        } else if (id == s.ego_id) {
          next[id].speed = 0;  // holds at its final point
        } else {
          next_active[id] = false;
          retired[id] = true;
        }
        continue;
      }
      Action action;
      if (auto it = idm.find(id); it != idm.end()) {
        const IdmCache& c = it->second;
        const double half_width = 0.75 * lane_width_near(s.map, states[id].position);
        const auto leader = find_leader(view, id, c.route, c.cumulative, half_width);
        const double a = idm_accel(states[id], leader, c.params);
        action = track_reference(states[id], c.route, c.cumulative, 0.0);
        action.accel = command_from_accel(a);
      } else {
        action = controllers.at(id)->act(view, id);
      }
      rec.agents[id].actions.push_back(action);
      next[id] = step_kinematics(states[id], action);
      if (auto it = idm.find(id); it != idm.end() && id != s.ego_id) {
        const auto proj = project_onto_polyline(next[id].position, it->second.route);
        if (proj.arc_length >= it->second.cumulative.back() - 0.5) {
          next_active[id] = false;
          retired[id] = true;
        }
      }
    }

    states = std::move(next);
    active = std::move(next_active);
    for (const auto& [id, on] : active)
      if (on) record(id, step);

    // pairwise contacts, ascending ids
    std::vector<AgentId> ids;
    for (const auto& [id, on] : active)
      if (on) ids.push_back(id);
    std::vector<AgentId> crashed;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const AgentId a = ids[i], b = ids[j];
        if (!sat_overlap(states[a].box(), states[b].box())) continue;
        for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
          AgentTrace& tr = rec.agents[x];
          if (!tr.collision_step) {
            tr.collision_step = step;
            tr.collision_with = y;
          }
        }
        crashed.push_back(a);
        crashed.push_back(b);
      }
    }
    for (AgentId id : ids) {
      if (!rec.agents[id].offroad_step && detect_offroad(states[id], s.map)) rec.agents[id].offroad_step = step;
    }

    if (rec.outcome == Outcome::Timeout && active[s.ego_id]) {
      const AgentTrace& ego = rec.agents[s.ego_id];
      if (ego.collision_step == step) {
        // lowest-id partner defines the contact
        AgentId other = -1;
        for (AgentId id : ids) {
          if (id != s.ego_id && sat_overlap(states[s.ego_id].box(), states[id].box())) {
            other = id;
            break;
          }
        }
        const auto c = detect_collision(states[s.ego_id], states[other]);
        rec.contact = Contact{other, c->normal, c->relative_speed, states[s.ego_id].heading, states[other].heading};
        rec.outcome = Outcome::Crash;
        rec.term_step = step;
      } else if (ego.offroad_step == step) {
        rec.outcome = Outcome::OutOfRoad;
        rec.term_step = step;
      } else if ((states[s.ego_id].position - goal).norm() <= kSuccessRadius) {
        rec.outcome = Outcome::Success;
        rec.term_step = step;
      }
      if (rec.outcome != Outcome::Timeout && options.stop_on_ego_event) finished = true;
    }

    // collided agents leave the road
    if (!finished) {
      for (AgentId id : crashed) {
        active[id] = false;
        retired[id] = true;
      }
    }
  }
  return rec;
}

}  // namespace seal
