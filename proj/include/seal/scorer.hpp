#pragma once

#include "seal/criticality.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace seal {

/// Per-segment polyline features, one column per segment:
/// midpoint (2), unit direction (2), length, role (+1 ego / -1 adversary),
/// time since the current step (fraction of the future horizon) and the gap to
/// the other agent over the same steps. Expressed in the frame centred on the
/// candidate's first point and aligned with its initial heading.
struct ScorerInput {
  static constexpr int kFeatureDim = 8;
  Eigen::Matrix<double, kFeatureDim, Eigen::Dynamic> ego;
  Eigen::Matrix<double, kFeatureDim, Eigen::Dynamic> adv;
};

ScorerInput encode_pair(const Trajectory& ego_prev, const Trajectory& candidate, int segment_stride = 2);

/// VectorNet-style scorer: shared per-segment linear layer (8 -> 64, ReLU),
/// max-pool per polyline, concat (128), MLP 128 -> 64 (ReLU) -> 2, sigmoid heads
/// for f_coll and f_diff.
class ScorerModel {
 public:
  static constexpr int kFeatureDim = ScorerInput::kFeatureDim;
  static constexpr int kEncoderDim = 64;
  static constexpr int kHiddenDim = 64;
  static constexpr int kOutputs = 2;

  ScorerModel();
  /// He-initialised weights from a counter-based stream.
  static ScorerModel initialised(std::uint64_t seed);

  CritScore predict(const ScorerInput& input) const;

  struct Gradient;
  /// Loss for one sample and (optionally) its gradient, accumulated into `grad`.
  double loss_and_gradient(const ScorerInput& input, const CritScore& target, bool per_head, Gradient* grad) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  static int parameter_count();

  std::string architecture_hash() const;

  Eigen::MatrixXd w_enc, w_hidden, w_out;
  Eigen::VectorXd b_enc, b_hidden, b_out;
  Eigen::Matrix<double, kFeatureDim, 1> feature_mean = Eigen::Matrix<double, kFeatureDim, 1>::Zero();
  Eigen::Matrix<double, kFeatureDim, 1> feature_scale = Eigen::Matrix<double, kFeatureDim, 1>::Ones();
  int segment_stride = 2;
  std::uint64_t training_seed = 0;
};

struct ScorerModel::Gradient {
  Eigen::MatrixXd w_enc, w_hidden, w_out;
  Eigen::VectorXd b_enc, b_hidden, b_out;
  explicit Gradient(const ScorerModel& m);
  void zero();
  Eigen::VectorXd flat() const;
};

CritScore predict_score(const ScorerModel& model, const Trajectory& ego_prev, const Trajectory& candidate);

struct CorpusEntry {
  std::string scenario_id;
  int candidate_index = 0;
  Trajectory ego_prev;
  Trajectory candidate;
  CritScore score;
};

struct ScorerTrainingOptions {
  int epochs = 150;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double validation_fraction = 0.2;
  int segment_stride = 2;
  /// Off: the loss is on the summed prediction only.
  bool per_head_loss = false;
  std::size_t min_corpus = 500;
};

struct ScorerTrainingResult {
  ScorerModel model;
  double train_loss = 0;
  double validation_loss = 0;
  std::vector<std::string> validation_scenarios;
};

/// Mini-batch Adam on (predicted f_coll + f_diff - true sum)^2. Validation is
/// split off by scenario id. Deterministic per seed.
ScorerTrainingResult train_scorer(const std::vector<CorpusEntry>& corpus, std::uint64_t seed,
                                  const ScorerTrainingOptions& options = {});

/// Per-candidate predicted sum averaged over the history; argmax with lowest-index ties.
Ranking rank_learned(const ScorerModel& model, const CandidateSet& candidates, const EgoHistory& history);

void save_model(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_model(const std::filesystem::path& path);

std::string corpus_line(const CorpusEntry& e);
CorpusEntry parse_corpus_line(std::string_view line);
void save_corpus(const std::vector<CorpusEntry>& corpus, const std::filesystem::path& path);
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ScorerFidelity {
  double spearman = 0;
  double top1 = 0;  ///< fraction of scenarios whose predicted argmax attains the oracle max
  double mae = 0;
  int scenarios = 0;
};

/// Held-out fidelity over the corpus entries of the listed scenarios.
ScorerFidelity scorer_fidelity(const ScorerModel& model, const std::vector<CorpusEntry>& corpus,
                               const std::vector<std::string>& scenario_ids);

}  // namespace seal

namespace seal {

/// Baseline IDM-ego roll-out against the recorded adversary; the first
/// history entry of a base scenario.
Trajectory baseline_ego_rollout(const Scenario& s);

/// Oracle-scored triples for every candidate of `s` against its baseline ego roll-out.
std::vector<CorpusEntry> oracle_corpus(const Scenario& s, std::uint64_t seed);

}  // namespace seal
