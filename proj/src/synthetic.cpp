#include "seal/geometry.hpp"
#include "seal/rng.hpp"
#include "seal/scenario.hpp"

#include <algorithm>
#include <cstdio>

namespace seal {

std::string_view to_string(Template t) {
  switch (t) {
    case Template::StraightMerge: return "straight-merge";
    case Template::TJunction: return "t-junction";
    case Template::CurveFollow: return "curve-follow";
  }
  return "?";
}

Template template_from_string(std::string_view name) {
  if (name == "straight-merge") return Template::StraightMerge;
  if (name == "t-junction") return Template::TJunction;
  if (name == "curve-follow") return Template::CurveFollow;
  throw ConfigError("unknown scenario template '" + std::string(name) + "'");
}

namespace {

constexpr double kSpacing = 1.0;
constexpr double kLaneWidth = 3.6;
constexpr double kShoulder = 0.8;

Polyline straight(const Vec2& a, const Vec2& b) {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / kSpacing)));
  Polyline out;
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return out;
}

Polyline arc(const Vec2& center, double radius, double a0, double a1) {
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) * radius / kSpacing)));
  Polyline out;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / n;
    out.push_back(center + radius * Vec2(std::cos(a), std::sin(a)));
  }
  return out;
}

Polyline concat(std::initializer_list<Polyline> parts) {
  Polyline out;
  for (const auto& p : parts) {
    for (const auto& q : p) {
      if (!out.empty() && (out.back() - q).norm() < 1e-9) continue;
      out.push_back(q);
    }
  }
  return out;
}

// Offsets a reference polyline sideways; offset(s) is evaluated at each vertex's arc length.
template <typename OffsetFn>
Polyline offset_path(const Polyline& ref, OffsetFn offset) {
  const auto s = cumulative_arc_length(ref);
  const auto heading = derive_headings(ref);
  Polyline out;
  out.reserve(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Vec2 normal(-std::sin(heading[i]), std::cos(heading[i]));
    out.push_back(ref[i] + offset(s[i]) * normal);
  }
  return out;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3 - 2 * u);
}

Polyline quantized(Polyline p) {
  for (auto& q : p) q = Vec2(quantize6(q.x()), quantize6(q.y()));
  return p;
}

struct Motion {
  Polyline path;
  double s0 = 0;
  double speed = 10;
  double accel = 0;
};

Trajectory sample_motion(const Motion& m) {
  const auto cum = cumulative_arc_length(m.path);
  Trajectory t;
  double s = m.s0;
  double v = m.speed;
  for (int k = 0; k < kScenarioSteps; ++k) {
    t.points.push_back(point_at_arc_length(m.path, cum, s));
    const double v_next = std::max(0.5, v + m.accel * kDt);
    s += 0.5 * (v + v_next) * kDt;
    v = v_next;
  }
  t.points = quantized(std::move(t.points));
  return t;
}

// Arc length along `path` of the first vertex within `tol` of `other`.
std::optional<double> first_conflict(const Polyline& path, const Polyline& other, double tol) {
  const auto cum = cumulative_arc_length(path);
  for (std::size_t i = 0; i < path.size(); ++i)
    if (distance_to_polyline(path[i], other) < tol) return cum[i];
  return std::nullopt;
}

std::vector<Box> footprints(const Trajectory& t, const AgentDims& d) {
  const auto heading = derive_headings(t.points);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < t.points.size(); ++i) boxes.push_back(Box{t.points[i], heading[i], d.length, d.width});
  return boxes;
}

// Ground truth must be collision-free, on-road and actually moving for ego/adversary.
bool plausible(const Scenario& s) {
  std::map<AgentId, std::vector<Box>> boxes;
  for (const auto& [id, t] : s.trajectories) {
    boxes[id] = footprints(t, s.dims_of(id));
    for (const auto& b : boxes[id])
      if (!box_in_region(b, s.map.road_edges)) return false;
  }
  // a small clearance keeps replayed ground truth away from touching contacts
  for (auto a = boxes.begin(); a != boxes.end(); ++a) {
    for (auto b = std::next(a); b != boxes.end(); ++b) {
      for (int k = 0; k < kScenarioSteps; ++k) {
        Box ba = a->second[static_cast<std::size_t>(k)];
        Box bb = b->second[static_cast<std::size_t>(k)];
        ba.length += 0.6;
        ba.width += 0.4;
        if (sat_overlap(ba, bb)) return false;
      }
    }
  }
  return true;
}

struct Layout {
  MapInfo map;
  Polyline ego_path;
  Polyline adv_path;
  // paths available to background agents, with the arc-length window they may start in
  struct Slot {
    Polyline path;
    double s_lo, s_hi;
  };
  std::vector<Slot> background;
};

Polyline closed(Polyline p) {
  p.push_back(p.front());
  return p;
}

Layout straight_merge_layout() {
  const double w = kLaneWidth;
  Layout L;
  auto ramp = concat({straight({-100, -8}, {-20, -8}), [] {
                        Polyline p;
                        for (int i = 0; i <= 60; ++i) {
                          const double x = -20 + i;
                          p.emplace_back(x, -8 + 8 * smoothstep((x + 20) / 60));
                        }
                        return p;
                      }()});
  const Polyline main_right_in = straight({-100, 0}, {40, 0});
  const Polyline main_right_out = straight({40, 0}, {300, 0});
  const Polyline main_left = straight({-100, w}, {300, w});
  L.map.lanes = {
      Lane{1, w, main_right_in, {4}, {}},
      Lane{2, w, main_left, {}, {}},
      Lane{3, w, ramp, {4}, {}},
      Lane{4, w, main_right_out, {}, {}},
  };
  const double lo = -w / 2 - kShoulder;
  const double hi = w + w / 2 + kShoulder;
  L.map.road_edges = {closed({{-110, -10.6}, {-15, -10.6}, {45, lo}, {310, lo}, {310, hi}, {-110, hi}})};
  L.ego_path = concat({main_right_in, main_right_out});
  L.adv_path = concat({ramp, main_right_out});
  L.background = {{main_left, 10, 250}};
  return L;
}

Layout t_junction_layout() {
  const double w = kLaneWidth;
  const double h = w / 2;
  const double J = 2 * w;
  const double far = 250;
  Layout L;
  const Polyline e1 = straight({-far, -h}, {-J, -h});
  const Polyline e2 = straight({-J, -h}, {J, -h});
  const Polyline e3 = straight({J, -h}, {far, -h});
  const Polyline w1 = straight({far, h}, {J, h});
  const Polyline w2 = straight({J, h}, {-J, h});
  const Polyline w3 = straight({-J, h}, {-far, h});
  const Polyline n1 = straight({h, -far}, {h, -J});
  const Polyline nl = arc({-J, -J}, J + h, 0.0, kPi / 2);
  const Polyline nr = arc({J, -J}, J - h, kPi, kPi / 2);
  const Polyline s1 = straight({-h, -J}, {-h, -far});
  L.map.lanes = {
      Lane{1, w, e1, {2}, {}},  Lane{2, w, e2, {3}, {}},      Lane{3, w, e3, {}, {}},
      Lane{4, w, w1, {5}, {}},  Lane{5, w, w2, {6}, {}},      Lane{6, w, w3, {}, {}},
      Lane{7, w, n1, {8, 9}, {}}, Lane{8, w, nl, {6}, {}},    Lane{9, w, nr, {3}, {}},
      Lane{10, w, s1, {}, {}},
  };
  const double e = w + kShoulder;
  L.map.road_edges = {closed({{-far - 10, -e}, {-e, -e}, {-e, -far - 10}, {e, -far - 10}, {e, -e}, {far + 10, -e},
                              {far + 10, e}, {-far - 10, e}})};
  L.ego_path = concat({e1, e2, e3});
  // the recorded adversary turns left across the ego's lane; the right turn stays
  // in the map as an alternative route for candidate sampling
  L.adv_path = concat({n1, nl, w3});
  // background stays clear of the junction for the whole horizon
  L.background = {{s1, 20, 110}, {w1, 10, 90}};
  return L;
}

Layout curve_follow_layout(CounterRng& rng, double& radius) {
  const double w = kLaneWidth;
  const double h = w / 2;
  radius = rng.uniform(50, 100);
  const double sweep = std::min(260.0 / radius, 1.5 * kPi);
  const Polyline ref = concat({straight({-80, 0}, {0, 0}), arc({0, radius}, radius, -kPi / 2, -kPi / 2 + sweep)});
  Layout L;
  const Polyline outer = offset_path(ref, [&](double) { return -h; });
  const Polyline inner = offset_path(ref, [&](double) { return h; });
  L.map.lanes = {Lane{1, w, outer, {}, {}}, Lane{2, w, inner, {}, {}}};
  const double e = w + kShoulder;
  Polyline left = offset_path(ref, [&](double) { return e; });
  Polyline right = offset_path(ref, [&](double) { return -e; });
  Polyline edge = right;
  edge.insert(edge.end(), left.rbegin(), left.rend());
  L.map.road_edges = {closed(edge)};
  L.ego_path = outer;
  // cut-in from the inner lane onto the ego's lane
  const double lc_start = rng.uniform(70, 110);
  L.adv_path = offset_path(ref, [&](double s) { return h - 2 * h * smoothstep((s - lc_start) / 40.0); });
  L.background = {{inner, 0, 40}};
  return L;
}

}  // namespace

Scenario generate_synthetic(std::uint64_t seed, Template tmpl, int n_background) {
  if (n_background < 0) throw ValidationError("n_background must be non-negative");
  CounterRng rng(mix_seed({seed, static_cast<std::uint64_t>(tmpl), static_cast<std::uint64_t>(n_background)}));

  for (int attempt = 0; attempt < 500; ++attempt) {
    double radius = 0;
    Layout L;
    switch (tmpl) {
      case Template::StraightMerge: L = straight_merge_layout(); break;
      case Template::TJunction: L = t_junction_layout(); break;
      case Template::CurveFollow: L = curve_follow_layout(rng, radius); break;
    }
    for (auto& lane : L.map.lanes) lane.centerline = quantized(std::move(lane.centerline));
    for (auto& edge : L.map.road_edges) edge = quantized(std::move(edge));
    link_predecessors(L.map);

    // Ego reaches the first conflict point mid-horizon; the adversary clears it `gap` seconds earlier.
    const auto conflict_adv = first_conflict(L.adv_path, L.ego_path, 1.0);
    const auto conflict_ego = first_conflict(L.ego_path, L.adv_path, 1.0);
    if (!conflict_adv || !conflict_ego) throw Error("synthetic template has no interacting paths");

    Motion ego{L.ego_path, 0, 0, 0};
    Motion adv{L.adv_path, 0, 0, 0};
    double t_ego = 0, gap = 0;
    switch (tmpl) {
      case Template::StraightMerge:
        ego.speed = rng.uniform(10, 13);
        adv.speed = ego.speed + rng.uniform(0.0, 1.5);
        t_ego = rng.uniform(4.5, 6.5);
        gap = rng.uniform(1.6, 2.6);
        break;
      case Template::TJunction:
        ego.speed = rng.uniform(9, 12);
        adv.speed = rng.uniform(5, 7.5);
        t_ego = rng.uniform(3.5, 5.5);
        gap = rng.uniform(1.6, 2.6);
        break;
      case Template::CurveFollow:
        ego.speed = rng.uniform(10, 14);
        adv.speed = ego.speed + rng.uniform(0.3, 1.5);
        t_ego = rng.uniform(3.5, 6.0);
        gap = rng.uniform(1.4, 2.4);
        break;
    }
    ego.s0 = *conflict_ego - ego.speed * t_ego;
    adv.s0 = *conflict_adv - adv.speed * (t_ego - gap);
    if (ego.s0 < 2 || adv.s0 < 2) continue;

    Scenario s;
    s.id = "synthetic-" + std::string(to_string(tmpl)) + "-" + std::to_string(seed) + "-" + std::to_string(n_background);
    s.map = L.map;
    s.ego_id = 0;
    s.adv_id = 1;
    s.trajectories[0] = sample_motion(ego);
    s.trajectories[1] = sample_motion(adv);
    s.dims[0] = AgentDims{};
    s.dims[1] = AgentDims{};

    bool placed_all = true;
    for (int b = 0; b < n_background; ++b) {
      bool placed = false;
      for (int tries = 0; tries < 60 && !placed; ++tries) {
        const auto& slot = L.background[rng.below(L.background.size())];
        Motion m{slot.path, rng.uniform(slot.s_lo, slot.s_hi), rng.uniform(7, 11), rng.uniform(-0.3, 0.3)};
        const AgentId id = 2 + b;
        s.trajectories[id] = sample_motion(m);
        s.dims[id] = AgentDims{rng.uniform(4.0, 5.0), rng.uniform(1.8, 2.1)};
        s.dims[id] = AgentDims{quantize6(s.dims[id].length), quantize6(s.dims[id].width)};
        if (plausible(s)) {
          placed = true;
        } else {
          s.trajectories.erase(id);
          s.dims.erase(id);
        }
      }
      if (!placed) {
        placed_all = false;
        break;
      }
    }
    if (!placed_all || !plausible(s)) continue;

    validate(s);
    return s;
  }
  throw Error("could not place a plausible synthetic scenario");
}

std::string suite_scenario_name(int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "scenario_%04d", index);
  return name;
}

std::vector<Scenario> synthetic_suite(std::uint64_t seed, int count, int n_background) {
  static constexpr Template kCycle[] = {Template::StraightMerge, Template::TJunction, Template::CurveFollow};
  std::vector<Scenario> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(generate_synthetic(mix_seed({seed, static_cast<std::uint64_t>(i)}), kCycle[i % 3], n_background));
    out.back().id = suite_scenario_name(i);
  }
  return out;
}

}  // namespace seal
