#include "seal/harness.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace seal {

using nlohmann::json;

std::string_view to_string(GeneratorMode m) {
  switch (m) {
    case GeneratorMode::NoAdv: return "no-adv";
    case GeneratorMode::Seal: return "seal";
    case GeneratorMode::CatHeuristic: return "cat-heuristic";
  }
  return "?";
}

GeneratorMode generator_from_string(std::string_view name) {
  if (name == "no-adv") return GeneratorMode::NoAdv;
  if (name == "seal") return GeneratorMode::Seal;
  if (name == "cat-heuristic" || name == "cat") return GeneratorMode::CatHeuristic;
  throw ConfigError("unknown generator '" + std::string(name) + "' (expected no-adv, seal or cat-heuristic)");
}

std::vector<std::string> ablation_names() {
  return {"full",         "learned-obj",  "heuristic-obj", "adv-skill-prior", "benign-skill-prior",
          "trajpred-adv", "no-curriculum", "no-nonreactive-start"};
}

Ablation ablation_from_string(std::string_view name) {
  Ablation a;
  if (name == "full" || name == "adv-skill-prior") return a;
  if (name == "learned-obj") {
    a.adversary = AdversaryKind::Replay;
  } else if (name == "heuristic-obj") {
    a.objective = Objective::Heuristic;
    a.adversary = AdversaryKind::Replay;
  } else if (name == "benign-skill-prior") {
    a.prior = PriorMode::Benign;
  } else if (name == "trajpred-adv") {
    a.switch_rule = SwitchRule::Never;
  } else if (name == "no-curriculum") {
    a.curriculum = false;
  } else if (name == "no-nonreactive-start") {
    a.switch_rule = SwitchRule::Zero;
  } else if (name == "oracle-obj") {
    a.objective = Objective::Oracle;
  } else {
    throw ConfigError("unknown ablation '" + std::string(name) + "'");
  }
  return a;
}

std::string_view to_string(EgoKind k) {
  switch (k) {
    case EgoKind::Replay: return "replay";
    case EgoKind::Idm: return "idm";
    case EgoKind::Trained: return "trained";
  }
  return "?";
}

EgoKind ego_from_string(std::string_view name) {
  if (name == "replay") return EgoKind::Replay;
  if (name == "idm") return EgoKind::Idm;
  if (name == "trained") return EgoKind::Trained;
  throw ConfigError("unknown ego '" + std::string(name) + "' (expected replay, idm or trained)");
}

// ---------------------------------------------------------------------------
// Trainable ego

TrainableEgoParams TrainableEgoParams::clamped() const {
  TrainableEgoParams p = *this;
  const auto lo = lower(), hi = upper();
  for (int k = 0; k < kDim; ++k)
    p.values[static_cast<std::size_t>(k)] =
        std::clamp(p.values[static_cast<std::size_t>(k)], lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)]);
  return p;
}

namespace {

constexpr double kThreatHorizon = 3.0;  // s

class TrainableEgo : public AgentController {
 public:
  TrainableEgo(const Scenario& s, AgentId self, const TrainableEgoParams& p) : p_(p.clamped()) {
    const Trajectory& t = s.trajectory(self);
    for (const Vec2& q : t.points)
      if (route_.empty() || (q - route_.back()).norm() > 1e-6) route_.push_back(q);
    if (route_.size() < 2) route_.push_back(route_.back() + Vec2(1e-3, 0));
    cumulative_ = cumulative_arc_length(route_);
    double peak = 0;
    for (std::size_t i = 1; i < t.points.size(); ++i) peak = std::max(peak, (t.points[i] - t.points[i - 1]).norm() / kDt);
    desired_speed_ = std::max(2.0, p_.values[2] * peak);
  }

  Action act(const WorldView& world, AgentId self) override {
    const auto& v = p_.values;
    const AgentState& me = world.states.at(self);
    const auto proj = project_onto_polyline(me.position, route_);
    const double lookahead = std::max(4.0, 0.8 * me.speed);
    const Vec2 target = point_at_arc_length(route_, cumulative_, proj.arc_length + lookahead);
    const Vec2 rel = target - me.position;
    double steer = v[1] * wrap_angle(std::atan2(rel.y(), rel.x()) - me.heading) - v[0] * 0.15 * proj.lateral;

    double accel = 1.0 * (desired_speed_ - me.speed);
    const double half_width = 0.75 * lane_width_near(world.scenario.map, me.position);
    if (const auto leader = find_leader(world, self, route_, cumulative_, half_width); leader && leader->gap < v[3]) {
      accel = std::min(accel, -v[4] * kMaxBrake * (1.0 - leader->gap / v[3]) + 0.5 * (leader->speed - me.speed));
    }

    // earliest predicted footprint conflict under constant velocities
    const double c = std::cos(me.heading), sn = std::sin(me.heading);
    std::optional<double> tau;
    double threat_side = 0;
    for (const auto& [id, other] : world.states) {
      if (id == self || !world.active.at(id)) continue;
      const Vec2 d = other.position - me.position;
      if (d.norm() > 60.0 || c * d.x() + sn * d.y() < -2.0) continue;
      for (double t = 0.25; t <= kThreatHorizon + 1e-9; t += 0.25) {
        if (tau && t >= *tau) break;
        const Box a{me.position + t * me.velocity(), me.heading, me.footprint.length + 1.0, me.footprint.width + 0.5};
        const Vec2 op = other.position + t * other.velocity();
        const Box b{op, other.heading, other.footprint.length, other.footprint.width};
        if (sat_overlap(a, b)) {
          tau = t;
          const Vec2 r = op - a.center;
          threat_side = -sn * r.x() + c * r.y();
          break;
        }
      }
    }
    if (tau) {
      const double urgency = 1.0 - *tau / (kThreatHorizon + 0.25);
      accel = std::min(accel, -v[4] * kMaxBrake * urgency);
      steer += (threat_side > 0 ? -1.0 : 1.0) * v[5] * 0.3 * urgency;
    }
    return Action(command_from_steer_angle(steer), command_from_accel(std::clamp(accel, -kMaxBrake, kMaxAccel)));
  }

 private:
  TrainableEgoParams p_;
  Polyline route_;
  std::vector<double> cumulative_;
  double desired_speed_ = 10;
};

}  // namespace

std::unique_ptr<AgentController> TrainableEgoFactory::create(const Scenario& s, AgentId self, std::uint64_t) const {
  return std::make_unique<TrainableEgo>(s, self, params_);
}

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  if (K < 1) throw ConfigError("K must be at least 1");
  if (!(b > 0)) throw ConfigError("b must be positive");
  if (H < 1) throw ConfigError("H must be at least 1");
  if (offset < 0) throw ConfigError("offset must be non-negative");
  if (p_max < 0 || p_max > 1) throw ConfigError("p_max must lie in [0, 1]");
  if (generations < 1 || population < 2 || elite < 1 || elite > population || batch < 1)
    throw ConfigError("CEM sizes must satisfy generations >= 1, population >= 2, 1 <= elite <= population, batch >= 1");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  ablation_from_string(ablation);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size())
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  return out;
}

std::string fmt_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  const auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "scenarios") c.scenarios = path(value);
    else if (key == "out") c.out_dir = path(value);
    else if (key == "scorer") c.scorer_path = path(value);
    else if (key == "skills") c.skills_path = path(value);
    else if (key == "ego_params") c.ego_params_path = path(value);
    else if (key == "generator") c.generator = generator_from_string(value);
    else if (key == "ablation") c.ablation = value;
    else if (key == "ego") c.ego = ego_from_string(value);
    else if (key == "K") c.K = parse_number<int>(key, value);
    else if (key == "b") c.b = parse_number<double>(key, value);
    else if (key == "H") c.H = parse_number<int>(key, value);
    else if (key == "offset") c.offset = parse_number<int>(key, value);
    else if (key == "p_max") c.p_max = parse_number<double>(key, value);
    else if (key == "generations") c.generations = parse_number<int>(key, value);
    else if (key == "population") c.population = parse_number<int>(key, value);
    else if (key == "elite") c.elite = parse_number<int>(key, value);
    else if (key == "batch") c.batch = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") c.threads = parse_number<int>(key, value);
    else if (key == "fitness_weights") {
      std::istringstream parts(value);
      std::string item;
      int k = 0;
      while (std::getline(parts, item, ',')) {
        if (k >= 3) throw ConfigError("config: fitness_weights expects three values");
        c.fitness_weights[static_cast<std::size_t>(k++)] = parse_number<double>(key, trim(item));
      }
      if (k != 3) throw ConfigError("config: fitness_weights expects three values");
    } else {
      throw ConfigError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_text(const RunConfig& c, const std::filesystem::path& relative_to) {
  std::ostringstream o;
  const auto opt_path = [&](const char* key, const std::filesystem::path& p) {
    if (p.empty()) return;
    const auto shown = relative_to.empty() ? p : std::filesystem::proximate(p, relative_to);
    o << key << " = " << shown.generic_string() << '\n';
  };
  opt_path("scenarios", c.scenarios);
  opt_path("out", c.out_dir);
  opt_path("scorer", c.scorer_path);
  opt_path("skills", c.skills_path);
  opt_path("ego_params", c.ego_params_path);
  o << "generator = " << to_string(c.generator) << '\n'
    << "ablation = " << c.ablation << '\n'
    << "ego = " << to_string(c.ego) << '\n'
    << "K = " << c.K << '\n'
    << "b = " << fmt_double(c.b) << '\n'
    << "H = " << c.H << '\n'
    << "offset = " << c.offset << '\n'
    << "p_max = " << fmt_double(c.p_max) << '\n'
    << "generations = " << c.generations << '\n'
    << "population = " << c.population << '\n'
    << "elite = " << c.elite << '\n'
    << "batch = " << c.batch << '\n'
    << "fitness_weights = " << fmt_double(c.fitness_weights[0]) << ", " << fmt_double(c.fitness_weights[1]) << ", "
    << fmt_double(c.fitness_weights[2]) << '\n'
    << "seed = " << c.seed << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Perturbation and evaluation

namespace {

Ranking rank_oracle(const Scenario& s, const CandidateSet& set, const EgoHistory& history) {
  Ranking r;
  for (const auto& c : set.candidates) {
    const RolloutRecord roll = oracle_rollout(s, c);
    const Trajectory& ego = roll.trace(s.ego_id).trajectory;
    const double coll = f_coll(ego, roll.trace(s.adv_id).trajectory);
    double total = 0;
    for (const auto& prev : history.entries()) total += coll + f_diff(prev, ego);
    r.scores.push_back(total / history.size());
  }
  r.best = argmax_lowest(r.scores);
  return r;
}

}  // namespace

Perturbation perturb_scenario(const Scenario& s, const EgoHistory& history, GeneratorMode mode,
                              const Ablation& ablation, const Models& models, std::uint64_t seed, int offset) {
  if (mode == GeneratorMode::NoAdv) return {ReplayPolicy{s.trajectory(s.adv_id)}, std::nullopt, std::nullopt};
  if (history.empty()) throw ValidationError("perturb_scenario: ego history is empty");

  const Objective objective = mode == GeneratorMode::CatHeuristic ? Objective::Heuristic : ablation.objective;
  const AdversaryKind kind = mode == GeneratorMode::CatHeuristic ? AdversaryKind::Replay : ablation.adversary;
  if (objective == Objective::Learned && !models.scorer) throw ConfigError("learned objective requires a scorer model");
  if (kind == AdversaryKind::Skill && !models.skills) throw ConfigError("skill adversary requires a skill library");

  const CandidateSet set = sample_candidates(s, seed);
  int best = 0;
  switch (objective) {
    case Objective::Learned: best = rank_learned(*models.scorer, set, history).best; break;
    case Objective::Heuristic:
      best = rank_heuristic_cat(set, history, s.dims_of(s.adv_id), s.dims_of(s.ego_id));
      break;
    case Objective::Oracle: best = rank_oracle(s, set, history).best; break;
  }
  const Trajectory& chosen = set.candidates[static_cast<std::size_t>(best)];
  if (kind == AdversaryKind::Replay) return {ReplayPolicy{splice_candidate(s, chosen)}, best, std::nullopt};

  int switch_step = 0;
  switch (ablation.switch_rule) {
    case SwitchRule::RiskOffset: switch_step = compute_switch_step(chosen, history, offset); break;
    case SwitchRule::Zero: switch_step = 0; break;
    case SwitchRule::Never: switch_step = kSwitchNever; break;
  }
  SkillAdversaryConfig cfg;
  cfg.mode = ablation.prior;
  return {SkillAdversaryPolicy{std::make_shared<SkillAdversaryFactory>(models.skills, chosen, switch_step, cfg)}, best,
          switch_step};
}

AgentPolicy ego_policy(const Scenario& s, const EgoBinding& ego) {
  switch (ego.kind) {
    case EgoKind::Replay: return ReplayPolicy{s.trajectory(s.ego_id)};
    case EgoKind::Idm: return IdmPolicy{default_idm(s, s.ego_id), {}};
    case EgoKind::Trained: return TrainableEgoPolicy{std::make_shared<TrainableEgoFactory>(ego.params)};
  }
  return ReplayPolicy{s.trajectory(s.ego_id)};
}

PolicyBinding bind(const Scenario& s, const EgoBinding& ego, const AgentPolicy& adversary) {
  PolicyBinding b = replay_all(s);
  b[s.ego_id] = ego_policy(s, ego);
  b[s.adv_id] = adversary;
  return b;
}

EvaluationTrace evaluate_scenario(const Scenario& s, const EgoBinding& ego, GeneratorMode mode,
                                  const Ablation& ablation, const Models& models, int K, std::uint64_t seed,
                                  int offset) {
  if (K < 1) throw ConfigError("K must be at least 1");
  const std::uint64_t key = mix_seed({seed, fnv1a(s.id)});
  EgoHistory history(K);
  const RolloutRecord first = run_episode(s, seal::bind(s, ego, ReplayPolicy{s.trajectory(s.adv_id)}), key);
  history.push(first.trace(s.ego_id).trajectory);
  EvaluationTrace out;
  for (int k = 0; k < K; ++k) {
    out.history_sizes.push_back(history.size());
    const Perturbation p =
        perturb_scenario(s, history, mode, ablation, models, mix_seed({key, static_cast<std::uint64_t>(k), 1}), offset);
    RolloutRecord r = run_episode(s, seal::bind(s, ego, p.adversary), mix_seed({key, static_cast<std::uint64_t>(k)}));
    history.push(r.trace(s.ego_id).trajectory);
    out.iterations.push_back(std::move(r));
  }
  return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

EvaluationResult evaluate(const std::vector<Scenario>& scenarios, const EgoBinding& ego, GeneratorMode mode,
                          const Ablation& ablation, const Models& models, int K, std::uint64_t seed, int threads,
                          int offset, std::string run_id) {
  EvaluationResult out;
  out.final_rollouts.resize(scenarios.size());
  parallel_for(static_cast<int>(scenarios.size()), threads, [&](int i) {
    const auto& s = scenarios[static_cast<std::size_t>(i)];
    out.final_rollouts[static_cast<std::size_t>(i)] =
        evaluate_scenario(s, ego, mode, ablation, models, K, seed, offset).iterations.back();
  });
  out.report = aggregate(out.final_rollouts, scenarios, std::move(run_id));
  return out;
}

// ---------------------------------------------------------------------------
// Curriculum training

double perturb_probability(int generation, int generations, double p_max, bool curriculum) {
  if (!curriculum) return p_max;
  if (generations <= 1) return p_max;
  return p_max * static_cast<double>(generation) / static_cast<double>(generations - 1);
}

TrainResult train_ego(const std::vector<Scenario>& train, const RunConfig& config, const Models& models) {
  config.validate();
  if (train.empty()) throw ValidationError("train_ego: no training scenarios");
  const Ablation ablation = ablation_from_string(config.ablation);
  if (config.generator == GeneratorMode::Seal) {
    if ((ablation.objective == Objective::Learned) && !models.scorer)
      throw ConfigError("train_ego: seal mode requires a scorer model");
    if (ablation.adversary == AdversaryKind::Skill && !models.skills)
      throw ConfigError("train_ego: seal mode requires a skill library");
  }
  constexpr int D = TrainableEgoParams::kDim;
  const auto lo = TrainableEgoParams::lower(), hi = TrainableEgoParams::upper();
  const auto to_params = [&](const std::array<double, D>& unit) {
    TrainableEgoParams p;
    for (int k = 0; k < D; ++k) {
      const auto i = static_cast<std::size_t>(k);
      p.values[i] = lo[i] + std::clamp(unit[i], 0.0, 1.0) * (hi[i] - lo[i]);
    }
    return p;
  };

  CounterRng rng(mix_seed({config.seed, 0xce3}));
  std::array<double, D> mean{}, sd{};
  const TrainableEgoParams start;
  for (int k = 0; k < D; ++k) {
    const auto i = static_cast<std::size_t>(k);
    mean[i] = (start.values[i] - lo[i]) / (hi[i] - lo[i]);
    sd[i] = 0.3;
  }
  std::vector<EgoHistory> histories(train.size(), EgoHistory(config.K));

  TrainResult result;
  std::optional<std::array<double, D>> best_unit;
  double best_fitness = 0;
  const int n = static_cast<int>(train.size());
  const int batch = std::min(config.batch, n);

  for (int g = 0; g < config.generations; ++g) {
    const double p = perturb_probability(g, config.generations, config.p_max, ablation.curriculum);
    // batch without replacement
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n; i > 1; --i) std::swap(order[static_cast<std::size_t>(i - 1)], order[rng.below(static_cast<std::uint64_t>(i))]);
    order.resize(static_cast<std::size_t>(batch));
    std::vector<bool> perturbed;
    for (int j = 0; j < batch; ++j) perturbed.push_back(rng.uniform() < p);

    std::vector<std::array<double, D>> samples;
    if (best_unit) samples.push_back(*best_unit);
    while (static_cast<int>(samples.size()) < config.population) {
      std::array<double, D> u{};
      for (int k = 0; k < D; ++k) {
        const auto i = static_cast<std::size_t>(k);
        u[i] = std::clamp(mean[i] + sd[i] * rng.normal(), 0.0, 1.0);
      }
      samples.push_back(u);
    }

    // one adversary per batch scenario, shared by every sample this generation
    std::vector<AgentPolicy> adversaries(static_cast<std::size_t>(batch));
    parallel_for(batch, config.threads, [&](int j) {
      const Scenario& s = train[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      EgoHistory& h = histories[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      const std::uint64_t key = mix_seed({config.seed, fnv1a(s.id), static_cast<std::uint64_t>(g)});
      if (h.empty()) {
        const EgoBinding ego{EgoKind::Trained, to_params(mean)};
        h.push(run_episode(s, seal::bind(s, ego, ReplayPolicy{s.trajectory(s.adv_id)}), key).trace(s.ego_id).trajectory);
      }
      adversaries[static_cast<std::size_t>(j)] =
          perturbed[static_cast<std::size_t>(j)]
              ? perturb_scenario(s, h, config.generator, ablation, models, mix_seed({key, 1}), config.offset).adversary
              : AgentPolicy{ReplayPolicy{s.trajectory(s.adv_id)}};
    });

    const int m = static_cast<int>(samples.size());
    std::vector<double> fitness(static_cast<std::size_t>(m));
    std::vector<std::vector<Trajectory>> ego_rollouts(static_cast<std::size_t>(m));
    parallel_for(m, config.threads, [&](int i) {
      const EgoBinding ego{EgoKind::Trained, to_params(samples[static_cast<std::size_t>(i)])};
      double success = 0, crash = 0, offroad = 0;
      for (int j = 0; j < batch; ++j) {
        const Scenario& s = train[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
        const RolloutRecord r = run_episode(s, seal::bind(s, ego, adversaries[static_cast<std::size_t>(j)]),
                                            mix_seed({config.seed, fnv1a(s.id), static_cast<std::uint64_t>(g), 2}));
        success += r.outcome == Outcome::Success;
        crash += r.outcome == Outcome::Crash;
        offroad += r.outcome == Outcome::OutOfRoad;
        ego_rollouts[static_cast<std::size_t>(i)].push_back(r.trace(s.ego_id).trajectory);
      }
      const auto& w = config.fitness_weights;
      fitness[static_cast<std::size_t>(i)] = (w[0] * success + w[1] * crash + w[2] * offroad) / batch;
    });

    std::vector<int> rank(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) rank[static_cast<std::size_t>(i)] = i;
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
      return fitness[static_cast<std::size_t>(a)] > fitness[static_cast<std::size_t>(b)];
    });
    const int elite = std::min(config.elite, m);
    for (int k = 0; k < D; ++k) {
      const auto i = static_cast<std::size_t>(k);
      double mu = 0, var = 0;
      for (int e = 0; e < elite; ++e) mu += samples[static_cast<std::size_t>(rank[static_cast<std::size_t>(e)])][i];
      mu /= elite;
      for (int e = 0; e < elite; ++e) {
        const double d = samples[static_cast<std::size_t>(rank[static_cast<std::size_t>(e)])][i] - mu;
        var += d * d;
      }
      mean[i] = mu;
      sd[i] = std::sqrt(var / elite) + 0.02;
    }
    // newest history entry = best sample's roll-out
    for (int j = 0; j < batch; ++j) {
      EgoHistory& h = histories[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      for (int e = std::min(elite, config.K) - 1; e >= 0; --e)
        h.push(ego_rollouts[static_cast<std::size_t>(rank[static_cast<std::size_t>(e)])][static_cast<std::size_t>(j)]);
    }

    const double gen_best = fitness[static_cast<std::size_t>(rank[0])];
    best_unit = samples[static_cast<std::size_t>(rank[0])];
    best_fitness = gen_best;
    double mean_fit = 0;
    for (double f : fitness) mean_fit += f / m;
    result.log.push_back({g, p, gen_best, mean_fit});
  }
  result.params = to_params(*best_unit);
  result.fitness = best_fitness;
  return result;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

json xy_json(const Polyline& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

Polyline xy_from(const json& j) {
  Polyline out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

}  // namespace

std::string rollout_line(const RolloutRecord& r) {
  json j;
  j["scenario_id"] = r.scenario_id;
  j["seed"] = r.seed;
  j["outcome"] = to_string(r.outcome);
  j["term_step"] = r.term_step;
  json agents = json::object();
  for (const auto& [id, tr] : r.agents) {
    json a;
    a["start"] = tr.trajectory.start_index;
    a["xy"] = xy_json(tr.trajectory.points);
    a["heading"] = tr.heading;
    a["speed"] = tr.speed;
    json acts = json::array();
    for (const auto& act : tr.actions) acts.push_back({act.steer, act.accel});
    a["actions"] = acts;
    if (tr.collision_step) a["collision_step"] = *tr.collision_step;
    if (tr.collision_with) a["collision_with"] = *tr.collision_with;
    if (tr.offroad_step) a["offroad_step"] = *tr.offroad_step;
    agents[std::to_string(id)] = a;
  }
  j["agents"] = agents;
  if (r.contact) {
    j["contact"] = {{"other", r.contact->other},
                    {"normal", {r.contact->normal.x(), r.contact->normal.y()}},
                    {"rel_speed", r.contact->relative_speed},
                    {"ego_heading", r.contact->ego_heading},
                    {"other_heading", r.contact->other_heading}};
  } else {
    j["contact"] = nullptr;
  }
  return j.dump();
}

RolloutRecord parse_rollout_line(std::string_view line) {
  RolloutRecord r;
  try {
    const json j = json::parse(line);
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.term_step = j.at("term_step").get<int>();
    for (const auto& [key, a] : j.at("agents").items()) {
      AgentId id = 0;
      const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
      if (ec != std::errc() || end != key.data() + key.size()) throw ParseError("roll-out: bad agent id '" + key + "'");
      AgentTrace tr;
      tr.trajectory.start_index = a.value("start", 0);
      tr.trajectory.points = xy_from(a.at("xy"));
      tr.heading = a.at("heading").get<std::vector<double>>();
      tr.speed = a.at("speed").get<std::vector<double>>();
      if (a.contains("actions"))
        for (const auto& act : a.at("actions")) tr.actions.emplace_back(act.at(0).get<double>(), act.at(1).get<double>());
      if (a.contains("collision_step")) tr.collision_step = a.at("collision_step").get<int>();
      if (a.contains("collision_with")) tr.collision_with = a.at("collision_with").get<int>();
      if (a.contains("offroad_step")) tr.offroad_step = a.at("offroad_step").get<int>();
      if (tr.heading.size() != tr.trajectory.points.size() || tr.speed.size() != tr.trajectory.points.size())
        throw ParseError("roll-out: agent " + key + " has inconsistent trace lengths");
      r.agents[id] = std::move(tr);
    }
    const json& c = j.at("contact");
    if (!c.is_null()) {
      Contact ct;
      ct.other = c.value("other", -1);
      ct.normal = Vec2(c.at("normal").at(0).get<double>(), c.at("normal").at(1).get<double>());
      ct.relative_speed = c.at("rel_speed").get<double>();
      ct.ego_heading = c.value("ego_heading", 0.0);
      ct.other_heading = c.value("other_heading", 0.0);
      r.contact = ct;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("roll-out: ") + e.what());
  }
  return r;
}

namespace {
constexpr std::array<const char*, TrainableEgoParams::kDim> kParamNames = {
    "lane_gain", "heading_gain", "speed_scale", "headway", "brake_gain", "swerve_gain"};
}

std::string params_json(const TrainableEgoParams& p) {
  json j;
  j["format"] = "seal-ego";
  j["version"] = 1;
  for (int k = 0; k < TrainableEgoParams::kDim; ++k)
    j["params"][kParamNames[static_cast<std::size_t>(k)]] = p.values[static_cast<std::size_t>(k)];
  return j.dump(2);
}

TrainableEgoParams parse_params(std::string_view text) {
  TrainableEgoParams p;
  try {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw ParseError("ego params: unsupported version");
    for (int k = 0; k < TrainableEgoParams::kDim; ++k)
      p.values[static_cast<std::size_t>(k)] = j.at("params").at(kParamNames[static_cast<std::size_t>(k)]).get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("ego params: ") + e.what());
  }
  return p;
}

namespace {

std::string digest_hex(const unsigned char* md, unsigned int len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_text(std::string_view text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr)) throw Error("SHA-256 failed");
  return digest_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_text(ss.str());
}

void write_run_manifest(const RunManifest& m, const std::filesystem::path& out_dir) {
  json j;
  j["tool"] = "seal";
  j["format_version"] = 1;
  j["subcommand"] = m.subcommand;
  j["arguments"] = m.arguments;
  const auto files = [](const std::vector<std::filesystem::path>& paths, const std::filesystem::path& base) {
    json a = json::array();
    for (const auto& p : paths) {
      const auto shown = std::filesystem::proximate(p, base);
      a.push_back({{"path", shown.generic_string()}, {"sha256", sha256_file(p)}});
    }
    return a;
  };
  // paths relative to the run directory, so a re-run elsewhere is byte-identical
  j["inputs"] = files(m.inputs, out_dir);
  j["outputs"] = files(m.outputs, out_dir);
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace seal
