#include "seal/candidates.hpp"

#include "seal/geometry.hpp"
#include "seal/rng.hpp"
#include "seal/sim.hpp"

#include <algorithm>
#include <limits>

namespace seal {

std::vector<int> lanes_at(const MapInfo& map, const Vec2& p, double heading) {
  std::vector<std::pair<double, int>> hits;
  for (const auto& lane : map.lanes) {
    const auto proj = project_onto_polyline(p, lane.centerline);
    if (proj.distance > 0.5 * lane.width + 0.3) continue;
    if (std::abs(wrap_angle(heading - proj.tangent_heading)) > kPi / 4) continue;
    hits.emplace_back(proj.distance, lane.id);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<int> out;
  for (const auto& [d, id] : hits) out.push_back(id);
  return out;
}

Trajectory splice_candidate(const Scenario& s, const Trajectory& candidate) {
  const Trajectory& adv = s.trajectory(s.adv_id);
  Trajectory out;
  out.start_index = adv.start_index;
  for (int k = adv.start_index; k < candidate.start_index && adv.covers(k); ++k) out.points.push_back(adv.at_step(k));
  out.points.insert(out.points.end(), candidate.points.begin(), candidate.points.end());
  return out;
}

Polyline extract_subgoals(const Trajectory& trajectory, double spacing) {
  const auto& pts = trajectory.points;
  Polyline out;
  if (pts.empty()) return out;
  const auto cum = cumulative_arc_length(pts);
  const double total = cum.back();
  for (double s = spacing; s <= total + 1e-9; s += spacing) out.push_back(point_at_arc_length(pts, cum, std::min(s, total)));
  if (out.empty() || (out.back() - pts.back()).norm() > 1e-6) out.push_back(pts.back());
  return out;
}

double max_implied_speed(const Polyline& points) {
  double v = 0;
  for (std::size_t i = 1; i < points.size(); ++i) v = std::max(v, (points[i] - points[i - 1]).norm() / kDt);
  return v;
}

double max_implied_accel(const Polyline& points, double initial_speed) {
  double a = 0;
  double prev = initial_speed;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double v = (points[i] - points[i - 1]).norm() / kDt;
    a = std::max(a, std::abs(v - prev) / kDt);
    prev = v;
  }
  return a;
}

double max_implied_curvature(const Polyline& points, double min_step) {
  double k_max = 0;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const Vec2 a = points[i] - points[i - 1];
    const Vec2 b = points[i + 1] - points[i];
    const double la = a.norm(), lb = b.norm();
    if (la < min_step || lb < min_step) continue;
    const double chord = (points[i + 1] - points[i - 1]).norm();
    if (chord < min_step) continue;
    const double cross = std::abs(a.x() * b.y() - a.y() * b.x());
    // Menger curvature: 4 * area / (|a| |b| |a + b|)
    k_max = std::max(k_max, 2.0 * cross / (la * lb * chord));
  }
  return k_max;
}

namespace {

struct Route {
  std::vector<int> lanes;
  SmoothPath path;
};

struct AdversaryPose {
  Vec2 position;
  double heading;
  double speed;
  double max_curvature;
};

constexpr double kReach = 280.0;

Polyline concat_lanes(const MapInfo& map, const std::vector<int>& ids) {
  Polyline out;
  for (int id : ids) {
    const Lane* lane = map.find_lane(id);
    for (const auto& p : lane->centerline)
      if (out.empty() || (out.back() - p).norm() > 1e-6) out.push_back(p);
  }
  return out;
}

void extend_sequences(const MapInfo& map, std::vector<int> seq, double length, std::vector<std::vector<int>>& out) {
  const Lane* lane = map.find_lane(seq.back());
  if (length >= kReach || lane->successors.empty() || seq.size() > 12 || out.size() >= 8) {
    out.push_back(std::move(seq));
    return;
  }
  for (int succ : lane->successors) {
    if (!map.find_lane(succ) || std::find(seq.begin(), seq.end(), succ) != seq.end()) continue;
    auto next = seq;
    next.push_back(succ);
    extend_sequences(map, std::move(next), length + polyline_length(map.find_lane(succ)->centerline), out);
  }
}

// Route starting at the projection of `p` (with a little context behind it).
std::optional<Route> make_route(const MapInfo& map, const std::vector<int>& lanes, const Vec2& p) {
  Polyline line = concat_lanes(map, lanes);
  if (line.size() < 2) return std::nullopt;
  const auto proj = project_onto_polyline(p, line);
  const auto cum = cumulative_arc_length(line);
  Polyline trimmed;
  const double start = proj.arc_length - 3.0;
  if (start < 0) trimmed.push_back(point_at_arc_length(line, cum, start));
  for (std::size_t i = 0; i < line.size(); ++i)
    if (cum[i] >= start) trimmed.push_back(line[i]);
  if (trimmed.size() < 2) return std::nullopt;
  return Route{lanes, SmoothPath(std::move(trimmed))};
}

std::vector<Route> lane_routes(const Scenario& s, const AdversaryPose& pose) {
  std::vector<Route> routes;
  const auto here = lanes_at(s.map, pose.position, pose.heading);
  if (here.empty()) return routes;
  const Lane* current = s.map.find_lane(here.front());

  std::vector<int> starts = {current->id};
  // adjacent lanes reachable by a lane change
  for (const auto& lane : s.map.lanes) {
    if (lane.id == current->id) continue;
    const auto proj = project_onto_polyline(pose.position, lane.centerline);
    if (proj.distance < 0.5 * current->width || proj.distance > 1.7 * std::max(lane.width, current->width)) continue;
    if (std::abs(wrap_angle(pose.heading - proj.tangent_heading)) > kPi / 6) continue;
    if (proj.arc_length >= polyline_length(lane.centerline) - 1.0) continue;
    starts.push_back(lane.id);
  }
  // the ego's lane whenever it lies within lane-change reach
  const Trajectory& ego = s.trajectory(s.ego_id);
  if (ego.covers(kCurrentStep)) {
    const auto ego_headings = derive_headings(ego.points);
    const auto ego_lanes = lanes_at(s.map, ego.at_step(kCurrentStep),
                                    ego_headings[static_cast<std::size_t>(kCurrentStep - ego.start_index)]);
    for (int id : ego_lanes) {
      if (std::find(starts.begin(), starts.end(), id) != starts.end()) continue;
      const auto proj = project_onto_polyline(pose.position, s.map.find_lane(id)->centerline);
      if (proj.distance <= 2.5 * s.map.find_lane(id)->width &&
          std::abs(wrap_angle(pose.heading - proj.tangent_heading)) <= kPi / 4 &&
          proj.arc_length < polyline_length(s.map.find_lane(id)->centerline) - 1.0)
        starts.push_back(id);
    }
  }

  for (int start : starts) {
    std::vector<std::vector<int>> seqs;
    const Lane* lane = s.map.find_lane(start);
    const auto proj = project_onto_polyline(pose.position, lane->centerline);
    extend_sequences(s.map, {start}, polyline_length(lane->centerline) - proj.arc_length, seqs);
    for (const auto& seq : seqs)
      if (auto r = make_route(s.map, seq, pose.position)) routes.push_back(std::move(*r));
  }
  return routes;
}

// Constant-curvature arcs from the current pose, for adversaries off the lane graph.
std::vector<Route> heading_routes(const AdversaryPose& pose) {
  std::vector<Route> routes;
  for (double k : {0.0, 0.01, -0.01, 0.03, -0.03}) {
    Polyline line;
    double h = pose.heading;
    Vec2 p = pose.position - 3.0 * heading_vector(h);
    for (double s = -3.0; s <= kReach; s += 1.0) {
      line.push_back(p);
      if (s >= 0) h += k;
      p += heading_vector(h);
    }
    routes.push_back(Route{{}, SmoothPath(std::move(line))});
  }
  return routes;
}

struct Variant {
  std::size_t route;
  double accel;
  double blend_scale = 1.0;
  double end_offset = 0.0;
};

Trajectory build_candidate(const Route& route, const AdversaryPose& pose, const Variant& v, double blend_seconds) {
  const SmoothPath& R = route.path;
  // project onto a fine sampling of the route
  Polyline fine;
  for (double s = 0; s <= std::min(R.length(), 60.0); s += 0.25) fine.push_back(R.at(s));
  const auto proj = project_onto_polyline(pose.position, fine);
  const double s0 = proj.arc_length;
  const Vec2 base = R.at(s0);
  const double h0 = R.heading(s0);
  const Vec2 n0(-std::sin(h0), std::cos(h0));
  const double d0 = (pose.position - base).dot(n0);
  const double e0 = std::clamp(wrap_angle(pose.heading - h0), -0.6, 0.6);
  const double D = v.blend_scale * std::max(15.0, blend_seconds * std::max(pose.speed, 5.0));

  const double reach = pose.speed * 8.0 + 0.5 * 2.0 * 64.0 + 20.0;
  Polyline control;
  for (double u = 0; u <= reach; u += 0.5) {
    const double x = std::min(u / D, 1.0);
    const double h00 = 2 * x * x * x - 3 * x * x + 1;
    const double h10 = x * x * x - 2 * x * x + x;
    const double h01 = -2 * x * x * x + 3 * x * x;
    const double d = h00 * d0 + h10 * D * std::tan(e0) + h01 * v.end_offset;
    const double h = R.heading(s0 + u);
    control.push_back(R.at(s0 + u) + d * Vec2(-std::sin(h), std::cos(h)));
  }
  const SmoothPath path(std::move(control));

  Trajectory t;
  t.start_index = kCurrentStep;
  t.points.push_back(pose.position);
  double s = 0;
  double speed = pose.speed;
  for (int k = 1; k <= kFutureSteps; ++k) {
    const double next = std::clamp(speed + v.accel * kDt, 0.0, kMaxCandidateSpeed);
    s += 0.5 * (speed + next) * kDt;
    speed = next;
    t.points.push_back(path.at(s));
  }
  return t;
}

bool distinct(const Trajectory& t, const std::vector<Trajectory>& accepted) {
  for (const auto& other : accepted) {
    double diff = 0;
    for (std::size_t i = 0; i < t.points.size(); ++i) diff = std::max(diff, (t.points[i] - other.points[i]).norm());
    if (diff < 0.25) return false;
  }
  return true;
}

}  // namespace

CandidateSet sample_candidates(const Scenario& s, std::uint64_t seed, const SamplerOptions& options) {
  const Trajectory& adv = s.trajectory(s.adv_id);
  if (!adv.covers(kCurrentStep) || !adv.covers(0))
    throw ValidationError("adversary history must cover the first " + std::to_string(kCurrentStep) + " steps");

  const auto headings = derive_headings(adv.points);
  const auto idx = static_cast<std::size_t>(kCurrentStep - adv.start_index);
  AdversaryPose pose;
  pose.position = adv.points[idx];
  pose.heading = headings[idx];
  pose.speed = (adv.points[idx] - adv.points[idx - 1]).norm() / kDt;
  const AgentDims dims = s.dims_of(s.adv_id);
  pose.max_curvature = std::tan(kMaxSteer) / (kWheelbaseRatio * dims.length);

  std::vector<Route> routes = lane_routes(s, pose);
  if (routes.empty()) routes = heading_routes(pose);

  CandidateSet out;
  out.scenario_id = s.id;
  out.seed = seed;

  auto feasible = [&](const Trajectory& t) {
    return max_implied_speed(t.points) <= kMaxCandidateSpeed + 1e-9 &&
           max_implied_accel(t.points, pose.speed) <= kMaxBrake + 0.5 &&
           max_implied_curvature(t.points) <= pose.max_curvature;
  };
  auto try_add = [&](const Route& r, const Variant& v) {
    if (static_cast<int>(out.candidates.size()) >= options.count) return;
    Trajectory t = build_candidate(r, pose, v, options.blend_seconds);
    if (feasible(t) && distinct(t, out.candidates)) out.candidates.push_back(std::move(t));
  };

  // hold, +1, hard brake, -2, +2 m/s^2
  const double profiles[] = {0.0, 1.0, -5.0, -2.0, 2.0};
  for (double a : profiles)
    for (std::size_t r = 0; r < routes.size(); ++r) try_add(routes[r], Variant{r, a});

  CounterRng rng(mix_seed({seed, fnv1a(s.id)}));
  for (int tries = 0; static_cast<int>(out.candidates.size()) < options.count; ++tries) {
    if (tries == 4000) {
      // the lane graph cannot supply enough distinct shapes; widen with free arcs
      auto extra = heading_routes(pose);
      routes.insert(routes.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
    }
    if (tries > 12000) throw Error("candidate sampler could not produce " + std::to_string(options.count) + " candidates");
    Variant v;
    v.route = static_cast<std::size_t>(rng.below(routes.size()));
    v.accel = std::clamp(profiles[rng.below(5)] + 0.5 * rng.normal(), -5.5, 2.5);
    v.blend_scale = rng.uniform(0.7, 1.5);
    v.end_offset = rng.uniform(-0.4, 0.4);
    try_add(routes[v.route], v);
  }
  return out;
}

}  // namespace seal
