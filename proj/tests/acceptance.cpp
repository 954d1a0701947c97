// Acceptance run: in-process property suites plus two full pipeline runs
// (serial and four threads). Prints one PASS/FAIL line per criterion and
// always exits 0 once every criterion has been evaluated.

#include "seal/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Geometry>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace seal;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Tolerances and thresholds.
constexpr int kPairs = 1000;
constexpr double kScoreTol = 1e-12;
constexpr double kInvarianceTol = 1e-9;
constexpr double kScoreSuiteSeconds = 5.0;
constexpr double kAxiomTol = 1e-12;
constexpr int kObbPairs = 10000;
constexpr int kOracleSamples = 10000;
constexpr double kObbAgreement = 0.999;
constexpr double kObbPenetration = 1e-3;
constexpr double kMinSpearman = 0.8;
constexpr double kMinTop1 = 0.6;
constexpr int kMinCorpusScenarios = 200;
constexpr double kGradTol = 1e-4;
constexpr double kScorerSeconds = 300.0;
constexpr int kLabelCorpora = 100;
constexpr double kEfficacyRatio = 0.5;
constexpr double kEvaluateSeconds = 180.0;
constexpr double kEgoTrainingSeconds = 900.0;
constexpr int kProtocolK = 5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

void print(int n, Verdict& v) {
  std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail.str() << std::endl;
}

template <typename F>
void run_criterion(int n, F&& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [error: " << e.what() << "]";
  }
  print(n, v);
}

Trajectory random_trajectory(CounterRng& rng, int n, int start_index) {
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

Trajectory rigid(const Trajectory& t, double angle, Vec2 shift) {
  const Eigen::Rotation2Dd r(angle);
  Trajectory out = t;
  for (auto& p : out.points) p = r * p + shift;
  return out;
}

Trajectory straight(Vec2 start, Vec2 velocity, int n) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.points.push_back(start + velocity * (i * kDt));
  return t;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, double> read_timings(const fs::path& csv) {
  std::map<std::string, double> out;
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos) out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return out;
}

MetricsReport read_report(const fs::path& run, const std::string& name) {
  return parse_report(read_file(run / "eval" / name / "report.json"));
}

// 1 -------------------------------------------------------------------------

void analytic_scores(Verdict& v) {
  const auto t0 = Clock::now();
  CounterRng rng(1001);
  bool in_range = true;
  double worst_invariance = 0;
  for (int i = 0; i < kPairs; ++i) {
    const Trajectory a = random_trajectory(rng, kScenarioSteps, 0);
    const Trajectory b = random_trajectory(rng, kFutureSteps + 1, kCurrentStep);
    const double c = f_coll(a, b), d = f_diff(a, b);
    in_range = in_range && c >= 0 && c <= 1 && d >= 0 && d <= 1;
    const double angle = rng.uniform(-kPi, kPi);
    const Vec2 shift{rng.uniform(-500, 500), rng.uniform(-500, 500)};
    const Trajectory ra = rigid(a, angle, shift), rb = rigid(b, angle, shift);
    worst_invariance = std::max({worst_invariance, std::abs(f_coll(ra, rb) - c), std::abs(f_diff(ra, rb) - d)});
  }
  const Trajectory ego = straight({0, 0}, {10, 0}, kScenarioSteps);
  const Trajectory parallel = straight({0, 8}, {10, 0}, kScenarioSteps);
  const double at_b = f_coll(ego, parallel);
  const double self = f_diff(ego, ego);
  const double elapsed = seconds_since(t0);
  v.detail << "pairs " << kPairs << ", f_coll(8 m) - 1/e = " << at_b - std::exp(-1.0) << ", f_diff(same) = " << self
           << ", invariance " << worst_invariance << ", " << elapsed << " s";
  v.require(in_range, "scores in [0,1]");
  v.require(std::abs(at_b - std::exp(-1.0)) <= kScoreTol, "f_coll at b");
  v.require(self == 0.0, "f_diff identity");
  v.require(worst_invariance <= kInvarianceTol, "rigid invariance");
  v.require(elapsed < kScoreSuiteSeconds, "runtime");
}

// 2 -------------------------------------------------------------------------

Histogram random_histogram(CounterRng& rng) {
  Histogram h = yaw_histogram();
  for (auto& m : h.mass) m = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  if (!h.normalise()) h.mass[0] = 1.0;
  return h;
}

void metric_axioms(Verdict& v) {
  CounterRng rng(2002);
  double identity = 0, asymmetry = 0, triangle = 0;
  for (int i = 0; i < kPairs; ++i) {
    const Histogram p = random_histogram(rng), q = random_histogram(rng), r = random_histogram(rng);
    identity = std::max(identity, wasserstein_1d(p, p));
    asymmetry = std::max(asymmetry, std::abs(wasserstein_1d(p, q) - wasserstein_1d(q, p)));
    triangle = std::max(triangle, wasserstein_1d(p, r) - wasserstein_1d(p, q) - wasserstein_1d(q, r));
  }
  double replay = 0;
  for (const Scenario& s : synthetic_suite(2003, 30, 3))
    replay = std::max(replay, realism(run_episode(s, replay_all(s), 0), s).mean());
  v.detail << "triples " << kPairs << ", max identity " << identity << ", max asymmetry " << asymmetry
           << ", max triangle excess " << triangle << ", replay realism " << replay;
  v.require(identity <= kAxiomTol, "identity");
  v.require(asymmetry <= kAxiomTol, "symmetry");
  v.require(triangle <= kAxiomTol, "triangle");
  v.require(replay == 0.0, "replay realism");
}

// 3 -------------------------------------------------------------------------

// Containment oracle over 10^4 sample points: a 100 x 50 lattice spanning each
// box, edges and corners included, tested against the other box. Uniform
// random points miss the thin corner slivers a lattice through the corners
// catches.
bool lattice_overlap(const Box& a, const Box& b) {
  constexpr int nu = 100, nw = kOracleSamples / 2 / nu;
  for (const auto& [src, dst] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nw; ++j) {
        const double u = (i / double(nu - 1) - 0.5) * src->length, w = (j / double(nw - 1) - 0.5) * src->width;
        if (dst->contains(src->center + u * src->axis_long() + w * src->axis_lat())) return true;
      }
    }
  }
  return false;
}

void obb_oracle(Verdict& v) {
  CounterRng rng(3003);
  int agree = 0;
  double worst = 0;
  bool missed_overlap = false;
  for (int i = 0; i < kObbPairs; ++i) {
    const Box a{{0, 0}, rng.uniform(-kPi, kPi), rng.uniform(1, 6), rng.uniform(0.8, 3)};
    const Box b{{rng.uniform(-6, 6), rng.uniform(-6, 6)}, rng.uniform(-kPi, kPi), rng.uniform(1, 6), rng.uniform(0.8, 3)};
    const bool hit = lattice_overlap(a, b);
    const auto sat = sat_overlap(a, b);
    if (sat.has_value() == hit) {
      ++agree;
    } else if (sat) {
      worst = std::max(worst, sat->penetration);
    } else {
      missed_overlap = true;
    }
  }
  const double rate = agree / static_cast<double>(kObbPairs);
  v.detail << "pairs " << kObbPairs << ", agreement " << rate << ", worst disagreeing penetration " << worst << " m";
  v.require(rate >= kObbAgreement, "agreement");
  v.require(worst < kObbPenetration, "disagreements shallow");
  v.require(!missed_overlap, "oracle overlap missed by SAT");
}

// 4 -------------------------------------------------------------------------

double gradient_check() {
  CounterRng rng(4004);
  const ScorerModel model = ScorerModel::initialised(4);
  const ScorerInput input = encode_pair(random_trajectory(rng, 60, 0), random_trajectory(rng, kFutureSteps + 1, kCurrentStep));
  const CritScore target{0.4, 0.6};
  ScorerModel::Gradient grad(model);
  grad.zero();
  model.loss_and_gradient(input, target, false, &grad);
  const Eigen::VectorXd g = grad.flat(), theta = model.parameters();
  ScorerModel probe = model;
  const double h = 1e-6;
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
    Eigen::VectorXd t = theta;
    t[i] += h;
    probe.set_parameters(t);
    const double up = probe.loss_and_gradient(input, target, false, nullptr);
    t[i] -= 2 * h;
    probe.set_parameters(t);
    const double down = probe.loss_and_gradient(input, target, false, nullptr);
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-7, std::abs(fd) + std::abs(g[i])));
  }
  return worst;
}

void scorer_fidelity_check(Verdict& v, const fs::path& run, const std::map<std::string, double>& timings) {
  const json j = json::parse(read_file(run / "scorer" / "training.json"));
  const double rho = j.at("fidelity").at("spearman").get<double>();
  const double top1 = j.at("fidelity").at("top1").get<double>();
  const std::size_t train_scenarios = read_manifest(run / "scenarios" / "train.txt").size();
  const double grad = gradient_check();
  const double t = timings.at("train-scorer");
  v.detail << "corpus scenarios " << train_scenarios << ", held-out spearman " << rho << ", top-1 " << top1
           << ", gradient rel. error " << grad << ", train-scorer " << t << " s";
  v.require(static_cast<int>(train_scenarios) >= kMinCorpusScenarios, "corpus size");
  v.require(rho >= kMinSpearman, "spearman");
  v.require(top1 >= kMinTop1, "top-1");
  v.require(grad < kGradTol, "gradient check");
  v.require(t < kScorerSeconds, "runtime");
}

// 5 -------------------------------------------------------------------------

void label_oracle(Verdict& v) {
  CounterRng rng(5005);
  const Scenario base = generate_synthetic(0, Template::TJunction, 2);
  const int h = kSkillHorizon;
  int matched = 0;
  std::size_t windows = 0;
  for (int c = 0; c < kLabelCorpora; ++c) {
    DemoCorpus corpus;
    const int episodes = 1 + static_cast<int>(rng.below(3));
    for (int e = 0; e < episodes; ++e) {
      RolloutRecord r;
      r.scenario_id = base.id;
      for (const auto& [id, gt] : base.trajectories) {
        AgentTrace tr;
        const int start = static_cast<int>(rng.below(6));
        const int n = static_cast<int>(rng.below(80));
        tr.trajectory = random_trajectory(rng, n + 1, start);
        tr.heading = derive_headings(tr.trajectory.points);
        for (int i = 0; i <= n; ++i) tr.speed.push_back(rng.uniform(0, 15));
        for (int i = 0; i < n; ++i) tr.actions.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (rng.uniform() < 0.5) tr.collision_step = start + static_cast<int>(rng.below(static_cast<std::uint64_t>(n + 1)));
        if (rng.uniform() < 0.3) tr.offroad_step = start + static_cast<int>(rng.below(static_cast<std::uint64_t>(n + 1)));
        r.agents[id] = std::move(tr);
      }
      corpus.scenarios.push_back(base);
      corpus.rollouts.push_back(std::move(r));
    }

    std::vector<std::tuple<AgentId, int, SkillLabel>> expect;
    for (const auto& r : corpus.rollouts) {
      for (const auto& [id, tr] : r.agents) {
        std::set<int> adversarial, excluded;
        for (int k = 1; k <= 2 * h; ++k) {
          if (tr.collision_step) adversarial.insert(*tr.collision_step - k);
          if (tr.offroad_step) excluded.insert(*tr.offroad_step - k);
        }
        for (int i = 0; i + h <= static_cast<int>(tr.actions.size()); i += h / 2) {
          const int start = tr.trajectory.start_index + i;
          SkillLabel l = SkillLabel::Benign;
          if (adversarial.contains(start)) l = SkillLabel::Adversarial;
          if (excluded.contains(start)) l = SkillLabel::Excluded;
          expect.emplace_back(id, start, l);
        }
      }
    }
    const auto segs = segment_and_label(corpus, h);
    bool same = segs.size() == expect.size();
    for (std::size_t i = 0; same && i < segs.size(); ++i)
      same = segs[i].source.agent == std::get<0>(expect[i]) && segs[i].source.start_step == std::get<1>(expect[i]) &&
             segs[i].label == std::get<2>(expect[i]);
    matched += same;
    windows += expect.size();
  }
  v.detail << "corpora matched " << matched << "/" << kLabelCorpora << ", windows " << windows;
  v.require(matched == kLabelCorpora, "exact match");
}

// 6-8 -----------------------------------------------------------------------

void efficacy(Verdict& v, const fs::path& run, const std::map<std::string, double>& timings) {
  const MetricsReport clean = read_report(run, "no-adv-replay"), seal = read_report(run, "seal-replay");
  const double t = timings.at("eval-seal-replay");
  v.detail << "replay ego success: no-adv " << clean.rates.success << ", seal " << seal.rates.success << " (target <= "
           << kEfficacyRatio * clean.rates.success << "), evaluate " << t << " s";
  v.require(seal.rates.success <= kEfficacyRatio * clean.rates.success, "success ratio");
  v.require(t < kEvaluateSeconds, "runtime");
}

// Realism is averaged over the two egos. Collision velocity is pooled over
// crash episodes, since a run without crashes has no collision velocity.
struct PooledMetrics {
  double realism = 0;
  double collision_velocity = 0;
  int crashes = 0;
};

PooledMetrics pooled(const fs::path& run, const std::string& generator) {
  PooledMetrics out;
  double weighted = 0;
  for (const char* ego : {"replay", "idm"}) {
    const MetricsReport r = read_report(run, generator + "-" + ego);
    out.realism += r.realism_mean / 2;
    const int crashes = static_cast<int>(std::lround(r.rates.crash * r.n_episodes));
    weighted += r.collision.mean_velocity * crashes;
    out.crashes += crashes;
  }
  out.collision_velocity = out.crashes ? weighted / out.crashes : 0.0;
  return out;
}

void realism_ordering(Verdict& v, const fs::path& run) {
  const PooledMetrics seal = pooled(run, "seal"), cat = pooled(run, "cat-heuristic");
  v.detail << "realism WD seal " << seal.realism << " vs cat " << cat.realism << "; collision velocity seal "
           << seal.collision_velocity << " m/s (" << seal.crashes << " crashes) vs cat " << cat.collision_velocity
           << " m/s (" << cat.crashes << " crashes)";
  v.require(seal.realism < cat.realism, "realism ordering");
  v.require(seal.collision_velocity < cat.collision_velocity, "collision velocity ordering");
}

void closed_loop(Verdict& v, const fs::path& run, const std::map<std::string, double>& timings) {
  const MetricsReport plain = read_report(run, "seal-trained-no-adv"), curriculum = read_report(run, "seal-trained-seal");
  const double t = timings.at("train-ego-no-adv") + timings.at("train-ego-seal");
  v.detail << "success on seal-perturbed suite: seal-trained " << curriculum.rates.success << ", no-adv-trained "
           << plain.rates.success << ", training " << t << " s";
  v.require(curriculum.rates.success >= plain.rates.success, "success ordering");
  v.require(t < kEgoTrainingSeconds, "runtime");
}

// 9 -------------------------------------------------------------------------

void protocol(Verdict& v, const fs::path& run) {
  const RunConfig config = load_config(fs::path(SEAL_SOURCE_DIR) / "configs" / "shipped.conf");
  Models models;
  models.scorer = std::make_shared<const ScorerModel>(load_model(run / "scorer" / "model.json"));
  models.skills = std::make_shared<const SkillLibrary>(load_library(run / "skills" / "library.json"));
  std::vector<Scenario> suite;
  for (const auto& p : read_manifest(run / "scenarios" / "eval.txt")) suite.push_back(load_scenario(p));

  std::vector<std::string> cli_lines;
  {
    std::istringstream in(read_file(run / "eval" / "seal-replay" / "rollouts.jsonl"));
    for (std::string line; std::getline(in, line);) cli_lines.push_back(line);
  }

  const std::vector<int> expect_sizes{1, 2, 3, 4, 5};
  int conforming = 0, matches_cli = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const EvaluationTrace t = evaluate_scenario(suite[i], {EgoKind::Replay, {}}, GeneratorMode::Seal, {}, models,
                                                config.K, config.seed, config.offset);
    conforming += static_cast<int>(t.iterations.size()) == kProtocolK && t.history_sizes == expect_sizes;
    matches_cli += i < cli_lines.size() && rollout_line(t.iterations.back()) == cli_lines[i];
  }

  EgoHistory queue(kProtocolK);
  std::size_t longest = 0;
  CounterRng rng(9009);
  for (int i = 0; i < 3 * kProtocolK; ++i) {
    queue.push(random_trajectory(rng, kScenarioSteps, 0));
    longest = std::max(longest, static_cast<std::size_t>(queue.size()));
  }
  const int n = static_cast<int>(suite.size());
  v.detail << "scenarios with 5 iterations and history sizes 1..5: " << conforming << "/" << n
           << ", final roll-out equals reported roll-out: " << matches_cli << "/" << n << ", max queue length " << longest;
  v.require(config.K == kProtocolK, "shipped K");
  v.require(conforming == n, "iteration count");
  v.require(matches_cli == n, "reported roll-out is the K-th");
  v.require(longest == kProtocolK, "queue bound");
}

// 10 ------------------------------------------------------------------------

void determinism(Verdict& v, const fs::path& a, const fs::path& b) {
  std::set<fs::path> files_a, files_b;
  for (const auto& [root, out] : {std::pair{a, &files_a}, std::pair{b, &files_b}})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() != "timings.csv") out->insert(fs::relative(e.path(), root));
  int differing = 0, manifests = 0;
  std::string first_difference;
  for (const auto& rel : files_a) {
    if (rel.filename() == "manifest.json") ++manifests;
    if (!files_b.contains(rel) || read_file(a / rel) != read_file(b / rel)) {
      if (first_difference.empty()) first_difference = rel.string();
      ++differing;
    }
  }
  for (const auto& rel : files_b)
    if (!files_a.contains(rel)) ++differing;
  v.detail << "files compared " << files_a.size() << " (" << manifests << " manifests), threads 1 vs 4, differing "
           << differing;
  if (!first_difference.empty()) v.detail << ", first " << first_difference;
  v.require(differing == 0, "byte-identical artifacts");
  v.require(manifests >= 15, "every stage wrote a manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string seal_bin, pipeline, work;
  bool reuse = false;
  app.add_option("--seal", seal_bin, "seal binary")->required();
  app.add_option("--pipeline", pipeline, "pipeline script")->required();
  app.add_option("--work", work, "scratch directory")->required();
  app.add_flag("--reuse", reuse, "keep existing pipeline runs");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(work), run_a = root / "a", run_b = root / "b";
  bool pipelines_ok = true;
  for (const auto& [dir, threads] : {std::pair{run_a, 1}, std::pair{run_b, 4}}) {
    if (reuse && fs::exists(dir / "summary" / "summary.csv")) continue;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cmd = "sh '" + pipeline + "' '" + seal_bin + "' '" + dir.string() + "' " + std::to_string(threads) +
                            " > '" + (root / (dir.filename().string() + ".log")).string() + "' 2>&1";
    std::cout << "running pipeline into " << dir << " with " << threads << " thread(s)" << std::endl;
    if (std::system(cmd.c_str()) != 0) {
      std::cout << "pipeline failed; see " << (root / (dir.filename().string() + ".log")) << std::endl;
      pipelines_ok = false;
    }
  }

  std::map<std::string, double> timings;
  try {
    timings = read_timings(run_a / "timings.csv");
  } catch (const std::exception& e) {
    std::cout << "no timings: " << e.what() << std::endl;
  }

  run_criterion(1, analytic_scores);
  run_criterion(2, metric_axioms);
  run_criterion(3, obb_oracle);
  run_criterion(4, [&](Verdict& v) { scorer_fidelity_check(v, run_a, timings); });
  run_criterion(5, label_oracle);
  run_criterion(6, [&](Verdict& v) { efficacy(v, run_a, timings); });
  run_criterion(7, [&](Verdict& v) { realism_ordering(v, run_a); });
  run_criterion(8, [&](Verdict& v) { closed_loop(v, run_a, timings); });
  run_criterion(9, [&](Verdict& v) { protocol(v, run_a); });
  run_criterion(10, [&](Verdict& v) {
    v.require(pipelines_ok, "both pipeline runs completed");
    determinism(v, run_a, run_b);
  });
  return 0;
}
