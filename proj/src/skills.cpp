#include "seal/skills.hpp"

#include "seal/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace seal {

using nlohmann::json;

ObsFeature observe(const Scenario& s, const std::map<AgentId, AgentState>& states,
                   const std::map<AgentId, bool>& active, AgentId self, const Vec2& subgoal) {
  const AgentState& me = states.at(self);
  ObsFeature f = ObsFeature::Zero();
  f(0) = me.speed;
  const Vec2 to_goal = subgoal - me.position;
  f(2) = to_goal.norm();
  f(1) = f(2) > 0.5 ? wrap_angle(std::atan2(to_goal.y(), to_goal.x()) - me.heading) : 0.0;

  const double c = std::cos(me.heading), sn = std::sin(me.heading);
  const auto local = [&](const Vec2& v) { return Vec2(c * v.x() + sn * v.y(), -sn * v.x() + c * v.y()); };
  f(3) = kNoNeighbourRange;
  double best = kNoNeighbourRange;
  for (const auto& [id, st] : states) {
    if (id == self || !active.at(id)) continue;
    const double d = (st.position - me.position).norm();
    if (d >= best) continue;
    best = d;
    const Vec2 rp = local(st.position - me.position);
    const Vec2 rv = local(st.velocity() - me.velocity());
    f(3) = rp.x();
    f(4) = rp.y();
    f(5) = rv.x();
    f(6) = rv.y();
  }

  double lane_best = std::numeric_limits<double>::infinity();
  for (const Lane& lane : s.map.lanes) {
    const auto proj = project_onto_polyline(me.position, lane.centerline);
    if (std::abs(wrap_angle(proj.tangent_heading - me.heading)) > kPi / 2) continue;
    if (proj.distance < lane_best) {
      lane_best = proj.distance;
      f(7) = proj.lateral;
    }
  }

  f(8) = kMaxEdgeDistance;
  for (const Polyline& edge : s.map.road_edges) f(8) = std::min(f(8), distance_to_polyline(me.position, edge));
  return f;
}

ObsFeature normalise(const ObsFeature& obs) {
  ObsFeature out;
  for (int k = 0; k < kObsDim; ++k) out(k) = obs(k) / kObsScale[static_cast<std::size_t>(k)];
  return out;
}

std::uint32_t quantise(const ObsFeature& obs) {
  std::uint32_t cell = 0;
  for (int k = 0; k < kObsDim; ++k) {
    const auto& cut = kObsCuts[static_cast<std::size_t>(k)];
    const std::uint32_t bin = obs(k) < cut[0] ? 0 : (obs(k) < cut[1] ? 1 : 2);
    cell = cell * 3 + bin;
  }
  return cell;
}

SubgoalCursor::SubgoalCursor(const Trajectory& reference) {
  for (const Vec2& p : reference.points)
    if (path_.empty() || (p - path_.back()).norm() > 1e-6) path_.push_back(p);
  subgoals_ = extract_subgoals(reference);
  for (const Vec2& g : subgoals_) subgoal_s_.push_back(project_onto_polyline(g, path_).arc_length);
}

Vec2 SubgoalCursor::next(const Vec2& position) {
  if (subgoals_.empty()) return position;
  const double s = project_onto_polyline(position, path_).arc_length;
  while (index_ + 1 < subgoals_.size() && subgoal_s_[index_] <= s + 1.0) ++index_;
  return subgoals_[index_];
}

DemoCorpus collect_demonstrations(const std::vector<Scenario>& scenarios, std::uint64_t seed) {
  if (scenarios.empty()) throw ValidationError("collect_demonstrations: no scenarios");
  DemoCorpus corpus;
  for (const Scenario& s : scenarios) {
    PolicyBinding b;
    for (const auto& [id, t] : s.trajectories) {
      CounterRng rng(mix_seed({seed, fnv1a(s.id), static_cast<std::uint64_t>(id)}));
      IdmParams p = default_idm(s, id);
      p.desired_speed *= rng.uniform(0.7, 1.6);
      p.min_gap = rng.uniform(0.5, 2.5);
      p.time_headway = rng.uniform(0.3, 1.8);
      b[id] = IdmPolicy{p, {}};
    }
    EpisodeOptions opt;
    opt.stop_on_ego_event = false;
    corpus.rollouts.push_back(run_episode(s, b, mix_seed({seed, fnv1a(s.id)}), opt));
    corpus.scenarios.push_back(s);
  }
  return corpus;
}

std::string_view to_string(SkillLabel l) {
  switch (l) {
    case SkillLabel::Benign: return "benign";
    case SkillLabel::Adversarial: return "adversarial";
    case SkillLabel::Excluded: return "excluded";
  }
  return "?";
}

SkillLabel label_window(int start, int horizon, std::optional<int> collision_step, std::optional<int> offroad_step) {
  const auto within = [&](std::optional<int> event) {
    return event && start >= *event - 2 * horizon && start <= *event - 1;
  };
  if (within(offroad_step)) return SkillLabel::Excluded;
  if (within(collision_step)) return SkillLabel::Adversarial;
  return SkillLabel::Benign;
}

namespace {

/// Agent states at `step` reconstructed from a roll-out's traces.
void states_at(const Scenario& s, const RolloutRecord& r, int step, std::map<AgentId, AgentState>& states,
               std::map<AgentId, bool>& active) {
  states.clear();
  active.clear();
  for (const auto& [id, tr] : r.agents) {
    AgentState st;
    st.footprint = s.dims_of(id);
    const bool on = tr.trajectory.covers(step);
    if (on) {
      const auto i = static_cast<std::size_t>(step - tr.trajectory.start_index);
      st.position = tr.trajectory.points[i];
      st.heading = tr.heading[i];
      st.speed = tr.speed[i];
    }
    states[id] = st;
    active[id] = on;
  }
}

}  // namespace

std::vector<SkillSegment> segment_and_label(const DemoCorpus& corpus, int horizon) {
  if (horizon < 1) throw ConfigError("skill horizon must be at least 1");
  if (corpus.scenarios.size() != corpus.rollouts.size())
    throw ValidationError("segment_and_label: scenarios and roll-outs differ in count");
  const int stride = std::max(1, horizon / 2);
  std::vector<SkillSegment> out;
  std::map<AgentId, AgentState> states;
  std::map<AgentId, bool> active;
  for (std::size_t e = 0; e < corpus.rollouts.size(); ++e) {
    const Scenario& s = corpus.scenarios[e];
    const RolloutRecord& r = corpus.rollouts[e];
    for (const auto& [id, tr] : r.agents) {
      const int n = static_cast<int>(tr.actions.size());
      if (n < horizon) continue;
      SubgoalCursor cursor(tr.trajectory);
      for (int i = 0; i + horizon <= n; i += stride) {
        const int start = tr.trajectory.start_index + i;
        SkillSegment seg;
        seg.source = {s.id, id, start};
        seg.label = label_window(start, horizon, tr.collision_step, tr.offroad_step);
        seg.actions.assign(tr.actions.begin() + i, tr.actions.begin() + i + horizon);
        states_at(s, r, start, states, active);
        seg.obs_start = observe(s, states, active, id, cursor.next(states.at(id).position));
        out.push_back(std::move(seg));
      }
    }
  }
  return out;
}

void SkillPrior::add(std::uint32_t cell, int cluster) {
  auto [it, inserted] = cells_.try_emplace(cell, marginal_.size(), 0.0);
  it->second[static_cast<std::size_t>(cluster)] += 1.0;
  marginal_[static_cast<std::size_t>(cluster)] += 1.0;
}

std::vector<double> SkillPrior::conditional(std::uint32_t cell) const {
  const auto it = cells_.find(cell);
  const std::vector<double>& counts = it == cells_.end() ? marginal_ : it->second;
  double total = 0;
  for (double c : counts) total += c + 1.0;
  std::vector<double> p(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = (counts[k] + 1.0) / total;
  return p;
}

SkillPrior SkillPrior::from_counts(std::vector<double> marginal, std::map<std::uint32_t, std::vector<double>> cells) {
  SkillPrior p;
  for (const auto& [cell, counts] : cells)
    if (counts.size() != marginal.size()) throw ParseError("skill prior: inconsistent cluster count");
  p.marginal_ = std::move(marginal);
  p.cells_ = std::move(cells);
  return p;
}

Eigen::VectorXd flatten_actions(const std::vector<Action>& actions) {
  Eigen::VectorXd v(2 * static_cast<Eigen::Index>(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    v(2 * static_cast<Eigen::Index>(i)) = actions[i].steer;
    v(2 * static_cast<Eigen::Index>(i) + 1) = actions[i].accel;
  }
  return v;
}

namespace {

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double d = (centroids.row(k).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, Eigen::MatrixXd& centroids,
                        int max_iter) {
  const Eigen::Index n = points.rows();
  if (k < 1 || n < k) throw ValidationError("kmeans: need at least k points");
  CounterRng rng(mix_seed({seed, 0x6b6d}));
  centroids.resize(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2(pick);
        if (u < 0) break;
      }
      while (d2(pick) <= 0 && pick > 0) --pick;
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centroids.row(c)).squaredNorm());
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_centroid(centroids, points.row(i).transpose());
      if (c != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      count(assign[static_cast<std::size_t>(i)]) += 1;
    }
    for (int c = 0; c < k; ++c)
      if (count(c) > 0) centroids.row(c) = sum.row(c) / count(c);
  }
  return assign;
}

SkillLibrary build_library(const std::vector<SkillSegment>& segments, int clusters, std::uint64_t seed) {
  if (clusters < 1) throw ConfigError("cluster count must be positive");
  SkillLibrary lib;
  for (const auto& seg : segments)
    if (seg.label != SkillLabel::Excluded) lib.members.push_back(seg);
  if (static_cast<int>(lib.members.size()) < clusters)
    throw ValidationError("build_library: " + std::to_string(lib.members.size()) +
                          " usable segments, fewer than the cluster count " + std::to_string(clusters));
  lib.horizon = static_cast<int>(lib.members.front().actions.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(lib.members.size()), 2 * lib.horizon);
  for (std::size_t i = 0; i < lib.members.size(); ++i) {
    if (static_cast<int>(lib.members[i].actions.size()) != lib.horizon)
      throw ValidationError("build_library: segments differ in horizon");
    x.row(static_cast<Eigen::Index>(i)) = flatten_actions(lib.members[i].actions).transpose();
  }
  lib.assignment = kmeans(x, clusters, seed, lib.codebook);
  lib.cluster_members.assign(static_cast<std::size_t>(clusters), {});
  lib.benign_prior = SkillPrior(clusters);
  lib.adversarial_prior = SkillPrior(clusters);
  for (std::size_t i = 0; i < lib.members.size(); ++i) {
    const int c = lib.assignment[i];
    lib.cluster_members[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    const auto cell = quantise(lib.members[i].obs_start);
    (lib.members[i].label == SkillLabel::Adversarial ? lib.adversarial_prior : lib.benign_prior).add(cell, c);
  }
  return lib;
}

int select_skill(const SkillLibrary& lib, const ObsFeature& obs, PriorMode mode, CounterRng& rng, bool greedy) {
  const auto p = lib.prior(mode).conditional(quantise(obs));
  if (greedy) return argmax_lowest(p);
  double u = rng.uniform();
  for (std::size_t k = 0; k < p.size(); ++k) {
    u -= p[k];
    if (u < 0) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

int select_skill(const SkillLibrary& lib, const ObsFeature& obs, PriorMode mode, std::uint64_t seed, bool greedy) {
  CounterRng rng(seed);
  return select_skill(lib, obs, mode, rng, greedy);
}

std::vector<Action> execute_skill(const SkillLibrary& lib, int cluster, const ObsFeature& obs) {
  if (cluster < 0 || cluster >= lib.clusters()) throw ValidationError("execute_skill: cluster out of range");
  const auto& members = lib.cluster_members[static_cast<std::size_t>(cluster)];
  if (members.empty()) {
    std::vector<Action> out;
    for (int j = 0; j < lib.horizon; ++j) out.emplace_back(lib.codebook(cluster, 2 * j), lib.codebook(cluster, 2 * j + 1));
    return out;
  }
  const ObsFeature q = normalise(obs);
  int best = members.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (int m : members) {
    const double d = (normalise(lib.members[static_cast<std::size_t>(m)].obs_start) - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return lib.members[static_cast<std::size_t>(best)].actions;
}

int compute_switch_step(const Trajectory& candidate, const EgoHistory& history, int offset) {
  if (history.empty()) throw ValidationError("compute_switch_step: ego history is empty");
  int best_t = candidate.start_index;
  double best = std::numeric_limits<double>::infinity();
  for (int t = candidate.start_index; t < candidate.end_index(); ++t) {
    double total = 0;
    for (const Trajectory& ego : history.entries())
      total += (candidate.at_step(t) - ego.at_step(std::clamp(t, ego.start_index, ego.end_index() - 1))).norm();
    const double mean = total / history.size();
    if (mean < best) {
      best = mean;
      best_t = t;
    }
  }
  return std::max(0, best_t - offset);
}

ReferenceTracker::ReferenceTracker(const Trajectory& reference) : ref_(reference) {
  if (reference.size() < 1) throw ValidationError("reference trajectory is empty");
}

Vec2 ReferenceTracker::point(int step) const {
  const int last = ref_.end_index() - 1;
  if (step <= last) return ref_.at_step(std::max(step, ref_.start_index));
  // constant-velocity extrapolation past the end
  const Vec2 v = ref_.size() >= 2 ? Vec2(ref_.points.back() - ref_.points[ref_.points.size() - 2]) : Vec2::Zero();
  return ref_.points.back() + static_cast<double>(step - last) * v;
}

Action ReferenceTracker::act(const AgentState& state, int step) const {
  const Vec2 target = point(step + kLookaheadSteps);
  const Vec2 rel = target - state.position;
  const double dist = rel.norm();
  double delta = 0;
  if (dist > 0.05) {
    const double alpha = wrap_angle(std::atan2(rel.y(), rel.x()) - state.heading);
    delta = std::atan(2.0 * state.wheelbase() * std::sin(alpha) / dist);
  }
  // reference speed at the current step (central difference) and the
  // acceleration that carries it exactly onto the next reference point
  const Vec2 p0 = point(step - 2), p1 = point(step - 1), p2 = point(step);
  const double d_prev = (p1 - p0).norm(), d_next = (p2 - p1).norm();
  const double v_ref = 0.5 * (d_prev + d_next) / kDt;
  const double a_ff = (d_next - d_prev) / (kDt * kDt);
  const Vec2 dir = d_next > 1e-9 ? Vec2((p2 - p1) / d_next) : heading_vector(state.heading);
  const double along = (p1 - state.position).dot(dir);
  const double accel = a_ff + 3.0 * (v_ref - state.speed) + 4.0 * along;
  return Action(command_from_steer_angle(delta), command_from_accel(std::clamp(accel, -kMaxBrake, kMaxAccel)));
}

namespace {

class SkillAdversary : public AgentController {
 public:
  SkillAdversary(const Scenario& s, std::shared_ptr<const SkillLibrary> lib, const Trajectory& candidate,
                 int switch_step, SkillAdversaryConfig config, std::uint64_t seed)
      : lib_(std::move(lib)),
        tracker_(splice_candidate(s, candidate)),
        cursor_(candidate),
        switch_step_(switch_step),
        config_(config),
        rng_(seed) {}

  Action act(const WorldView& world, AgentId self) override {
    const AgentState& me = world.states.at(self);
    const Vec2 subgoal = cursor_.next(me.position);
    if (world.step <= switch_step_ || switch_step_ == kSwitchNever) return tracker_.act(me, world.step);
    const int j = (world.step - switch_step_ - 1) % lib_->horizon;
    const ObsFeature obs = observe(world.scenario, world.states, world.active, self, subgoal);
    if (j == 0) cluster_ = select_skill(*lib_, obs, config_.mode, rng_, config_.greedy);
    return execute_skill(*lib_, cluster_, obs)[static_cast<std::size_t>(j)];
  }

 private:
  std::shared_ptr<const SkillLibrary> lib_;
  ReferenceTracker tracker_;
  SubgoalCursor cursor_;
  int switch_step_;
  SkillAdversaryConfig config_;
  CounterRng rng_;
  int cluster_ = 0;
};

}  // namespace

SkillAdversaryFactory::SkillAdversaryFactory(std::shared_ptr<const SkillLibrary> lib, Trajectory candidate,
                                             int switch_step, SkillAdversaryConfig config)
    : lib_(std::move(lib)), candidate_(std::move(candidate)), switch_step_(switch_step), config_(config) {
  if (!lib_) throw ConfigError("skill adversary requires a skill library");
}

std::unique_ptr<AgentController> SkillAdversaryFactory::create(const Scenario& s, AgentId, std::uint64_t seed) const {
  return std::make_unique<SkillAdversary>(s, lib_, candidate_, switch_step_, config_, seed);
}

namespace {

json obs_json(const ObsFeature& o) { return std::vector<double>(o.data(), o.data() + kObsDim); }

ObsFeature obs_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != kObsDim) throw ParseError("skill library: observation has wrong dimension");
  ObsFeature o;
  for (int k = 0; k < kObsDim; ++k) o(k) = v[static_cast<std::size_t>(k)];
  return o;
}

json prior_json(const SkillPrior& p) {
  json cells = json::array();
  for (const auto& [cell, counts] : p.cells()) cells.push_back({{"cell", cell}, {"counts", counts}});
  return {{"marginal", p.marginal()}, {"cells", cells}};
}

SkillPrior prior_from_json(const json& j) {
  std::map<std::uint32_t, std::vector<double>> cells;
  for (const auto& c : j.at("cells")) cells[c.at("cell").get<std::uint32_t>()] = c.at("counts").get<std::vector<double>>();
  return SkillPrior::from_counts(j.at("marginal").get<std::vector<double>>(), std::move(cells));
}

SkillLabel label_from_string(std::string_view s) {
  if (s == "benign") return SkillLabel::Benign;
  if (s == "adversarial") return SkillLabel::Adversarial;
  if (s == "excluded") return SkillLabel::Excluded;
  throw ParseError("skill library: unknown label '" + std::string(s) + "'");
}

}  // namespace

void save_library(const SkillLibrary& lib, const std::filesystem::path& path) {
  json j;
  j["format"] = "seal-skills";
  j["version"] = 1;
  j["horizon"] = lib.horizon;
  j["clusters"] = lib.clusters();
  json codebook = json::array();
  for (Eigen::Index r = 0; r < lib.codebook.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(lib.codebook.cols()));
    for (Eigen::Index c = 0; c < lib.codebook.cols(); ++c) row[static_cast<std::size_t>(c)] = lib.codebook(r, c);
    codebook.push_back(row);
  }
  j["codebook"] = codebook;
  json members = json::array();
  for (std::size_t i = 0; i < lib.members.size(); ++i) {
    const SkillSegment& m = lib.members[i];
    std::vector<double> acts;
    for (const Action& a : m.actions) {
      acts.push_back(a.steer);
      acts.push_back(a.accel);
    }
    members.push_back({{"scenario_id", m.source.scenario_id},
                       {"agent", m.source.agent},
                       {"start_step", m.source.start_step},
                       {"label", to_string(m.label)},
                       {"cluster", lib.assignment[i]},
                       {"obs", obs_json(m.obs_start)},
                       {"actions", acts}});
  }
  j["members"] = members;
  j["benign_prior"] = prior_json(lib.benign_prior);
  j["adversarial_prior"] = prior_json(lib.adversarial_prior);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

SkillLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  SkillLibrary lib;
  try {
    const json j = json::parse(in);
    if (j.at("version").get<int>() != 1) throw ParseError(path.string() + ": unsupported skill library version");
    lib.horizon = j.at("horizon").get<int>();
    const int clusters = j.at("clusters").get<int>();
    lib.codebook.resize(clusters, 2 * lib.horizon);
    const auto& cb = j.at("codebook");
    if (static_cast<int>(cb.size()) != clusters) throw ParseError(path.string() + ": codebook size mismatch");
    for (int r = 0; r < clusters; ++r) {
      const auto row = cb[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != 2 * lib.horizon) throw ParseError(path.string() + ": codebook row size");
      for (int c = 0; c < 2 * lib.horizon; ++c) lib.codebook(r, c) = row[static_cast<std::size_t>(c)];
    }
    lib.cluster_members.assign(static_cast<std::size_t>(clusters), {});
    for (const auto& m : j.at("members")) {
      SkillSegment seg;
      seg.source = {m.at("scenario_id").get<std::string>(), m.at("agent").get<int>(), m.at("start_step").get<int>()};
      seg.label = label_from_string(m.at("label").get<std::string>());
      seg.obs_start = obs_from_json(m.at("obs"));
      const auto acts = m.at("actions").get<std::vector<double>>();
      if (static_cast<int>(acts.size()) != 2 * lib.horizon) throw ParseError(path.string() + ": member action count");
      for (std::size_t k = 0; k < acts.size(); k += 2) seg.actions.emplace_back(acts[k], acts[k + 1]);
      const int c = m.at("cluster").get<int>();
      if (c < 0 || c >= clusters) throw ParseError(path.string() + ": member cluster out of range");
      lib.cluster_members[static_cast<std::size_t>(c)].push_back(static_cast<int>(lib.members.size()));
      lib.assignment.push_back(c);
      lib.members.push_back(std::move(seg));
    }
    lib.benign_prior = prior_from_json(j.at("benign_prior"));
    lib.adversarial_prior = prior_from_json(j.at("adversarial_prior"));
    if (lib.benign_prior.clusters() != clusters || lib.adversarial_prior.clusters() != clusters)
      throw ParseError(path.string() + ": prior cluster count mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return lib;
}

}  // namespace seal
