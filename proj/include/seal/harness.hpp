#pragma once

#include "seal/metrics.hpp"
#include "seal/scorer.hpp"
#include "seal/skills.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace seal {

enum class GeneratorMode { NoAdv, Seal, CatHeuristic };
std::string_view to_string(GeneratorMode m);
GeneratorMode generator_from_string(std::string_view name);

enum class Objective { Learned, Heuristic, Oracle };
enum class AdversaryKind { Skill, Replay };
enum class SwitchRule { RiskOffset, Zero, Never };

/// Component choices for the seal generator; the named variants below are
/// the ablation configurations.
struct Ablation {
  Objective objective = Objective::Learned;
  AdversaryKind adversary = AdversaryKind::Skill;
  PriorMode prior = PriorMode::Adversarial;
  SwitchRule switch_rule = SwitchRule::RiskOffset;
  bool curriculum = true;

  bool operator==(const Ablation&) const = default;
};

/// full, learned-obj, heuristic-obj, adv-skill-prior, benign-skill-prior,
/// trajpred-adv, no-curriculum, no-nonreactive-start.
Ablation ablation_from_string(std::string_view name);
std::vector<std::string> ablation_names();

enum class EgoKind { Replay, Idm, Trained };
std::string_view to_string(EgoKind k);
EgoKind ego_from_string(std::string_view name);

/// Lane-keeping gain, heading gain, desired-speed scale, headway (m), brake
/// gain, swerve gain.
struct TrainableEgoParams {
  static constexpr int kDim = 6;
  std::array<double, kDim> values = {0.5, 1.0, 1.0, 10.0, 0.8, 0.3};

  static std::array<double, kDim> lower() { return {0.0, 0.2, 0.6, 2.0, 0.0, 0.0}; }
  static std::array<double, kDim> upper() { return {1.5, 2.5, 1.3, 25.0, 1.5, 1.0}; }
  TrainableEgoParams clamped() const;
  bool operator==(const TrainableEgoParams&) const = default;
};

class TrainableEgoFactory : public ControllerFactory {
 public:
  explicit TrainableEgoFactory(TrainableEgoParams p) : params_(p) {}
  std::unique_ptr<AgentController> create(const Scenario& s, AgentId self, std::uint64_t seed) const override;
  const TrainableEgoParams& params() const { return params_; }

 private:
  TrainableEgoParams params_;
};

struct RunConfig {
  std::filesystem::path scenarios;  ///< scenario manifest
  std::filesystem::path out_dir;
  std::filesystem::path scorer_path;
  std::filesystem::path skills_path;
  std::filesystem::path ego_params_path;
  GeneratorMode generator = GeneratorMode::Seal;
  std::string ablation = "full";
  EgoKind ego = EgoKind::Replay;
  int K = kDefaultHistory;
  double b = kDefaultSensitivity;
  int H = kSkillHorizon;
  int offset = kDefaultSwitchOffset;
  double p_max = 0.9;
  int generations = 20;
  int population = 32;
  int elite = 8;
  int batch = 16;
  std::array<double, 3> fitness_weights = {1.0, -0.5, -0.5};
  std::uint64_t seed = 0;
  int threads = 0;  ///< 0 = hardware concurrency

  void validate() const;
};

/// `key = value` lines; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Paths are written relative to `relative_to` when given. The thread count is
/// left out since results do not depend on it.
std::string config_text(const RunConfig& c, const std::filesystem::path& relative_to = {});

struct Models {
  std::shared_ptr<const ScorerModel> scorer;
  std::shared_ptr<const SkillLibrary> skills;
};

struct Perturbation {
  AgentPolicy adversary;
  std::optional<int> candidate_index;
  std::optional<int> switch_step;
};

/// Adversary policy for one perturbation step. The history must be non-empty.
Perturbation perturb_scenario(const Scenario& s, const EgoHistory& history, GeneratorMode mode,
                              const Ablation& ablation, const Models& models, std::uint64_t seed,
                              int offset = kDefaultSwitchOffset);

struct EgoBinding {
  EgoKind kind = EgoKind::Replay;
  TrainableEgoParams params;
};

AgentPolicy ego_policy(const Scenario& s, const EgoBinding& ego);
PolicyBinding bind(const Scenario& s, const EgoBinding& ego, const AgentPolicy& adversary);

struct EvaluationTrace {
  std::vector<RolloutRecord> iterations;  ///< all K roll-outs, in order
  std::vector<int> history_sizes;         ///< queue length seen by each perturbation
};

/// K sequential perturb -> simulate -> push iterations on one scenario.
EvaluationTrace evaluate_scenario(const Scenario& s, const EgoBinding& ego, GeneratorMode mode,
                                  const Ablation& ablation, const Models& models, int K, std::uint64_t seed,
                                  int offset = kDefaultSwitchOffset);

struct EvaluationResult {
  std::vector<RolloutRecord> final_rollouts;  ///< one per scenario, input order
  MetricsReport report;
};

EvaluationResult evaluate(const std::vector<Scenario>& scenarios, const EgoBinding& ego, GeneratorMode mode,
                          const Ablation& ablation, const Models& models, int K, std::uint64_t seed,
                          int threads = 0, int offset = kDefaultSwitchOffset, std::string run_id = "");

struct GenerationLog {
  int generation = 0;
  double perturb_probability = 0;
  double best_fitness = 0;
  double mean_fitness = 0;
};

struct TrainResult {
  TrainableEgoParams params;
  double fitness = 0;
  std::vector<GenerationLog> log;
};

/// Linear 0 -> p_max across generations (constant p_max without curriculum).
double perturb_probability(int generation, int generations, double p_max, bool curriculum);

/// Cross-entropy search over the ego parameter box with a perturbation curriculum.
TrainResult train_ego(const std::vector<Scenario>& train, const RunConfig& config, const Models& models);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

std::string rollout_line(const RolloutRecord& r);
RolloutRecord parse_rollout_line(std::string_view line);

std::string params_json(const TrainableEgoParams& p);
TrainableEgoParams parse_params(std::string_view text);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(std::string_view text);

/// Deterministic run manifest: tool version, subcommand, arguments, seeds and
/// SHA-256 of every input and output file.
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> arguments;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
};
void write_run_manifest(const RunManifest& m, const std::filesystem::path& out_dir);

}  // namespace seal
