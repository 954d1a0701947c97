#pragma once

#include "seal/candidates.hpp"
#include "seal/scenario.hpp"
#include "seal/sim.hpp"

#include <deque>
#include <vector>

namespace seal {

inline constexpr double kDefaultSensitivity = 8.0;  ///< b, metres
inline constexpr int kDefaultHistory = 5;           ///< K

struct CritScore {
  double f_coll = 0;
  double f_diff = 0;
  double sum() const { return f_coll + f_diff; }
};

/// Collision closeness, exp(-min_t |ego_t - adv_t| / b), over the steps both trajectories cover.
template <typename Scalar = double>
Scalar f_coll(const Trajectory& ego, const Trajectory& adv, Scalar b = Scalar(kDefaultSensitivity)) {
  const int lo = std::max(ego.start_index, adv.start_index);
  const int hi = std::min(ego.end_index(), adv.end_index());
  if (lo >= hi) throw ValidationError("f_coll: trajectories share no time step");
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int t = lo; t < hi; ++t) best = std::min<Scalar>(best, (ego.at_step(t) - adv.at_step(t)).norm());
  return std::exp(-best / b);
}

/// Induced behaviour change, 1 - exp(-sum_t |prev_t - curr_t| / b), over the
/// common steps (the longer episode is truncated to the shorter).
template <typename Scalar = double>
Scalar f_diff(const Trajectory& ego_prev, const Trajectory& ego_curr, Scalar b = Scalar(kDefaultSensitivity)) {
  const int lo = std::max(ego_prev.start_index, ego_curr.start_index);
  const int hi = std::min(ego_prev.end_index(), ego_curr.end_index());
  if (lo >= hi) throw ValidationError("f_diff: trajectories share no time step");
  Scalar total = 0;
  for (int t = lo; t < hi; ++t) total += (ego_prev.at_step(t) - ego_curr.at_step(t)).norm();
  return Scalar(1) - std::exp(-total / b);
}

/// Bounded queue of the most recent ego roll-outs for one base scenario; newest last.
class EgoHistory {
 public:
  explicit EgoHistory(int capacity = kDefaultHistory);

  void push(Trajectory ego_rollout);
  const std::deque<Trajectory>& entries() const { return entries_; }
  const Trajectory& latest() const;
  bool empty() const { return entries_.empty(); }
  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::deque<Trajectory> entries_;
};

/// Simulated ground truth: the adversary replays the candidate while the ego
/// follows IDM; f_coll on that roll-out and f_diff against the latest history entry.
CritScore oracle_score(const Scenario& s, const Trajectory& candidate, const EgoHistory& history,
                       double b = kDefaultSensitivity);

/// Realised ego trajectory of an IDM ego against an adversary replaying `candidate`.
RolloutRecord oracle_rollout(const Scenario& s, const Trajectory& candidate);

struct Ranking {
  int best = 0;
  std::vector<double> scores;
};

/// Argmax of per-candidate scores; ties go to the lowest index.
int argmax_lowest(const std::vector<double>& scores);

/// CAT-style heuristic: most history roll-outs overlapped, then earliest
/// overlap step, then (with no overlap anywhere) smallest point-wise distance.
int rank_heuristic_cat(const CandidateSet& candidates, const EgoHistory& history, const AgentDims& adv_dims,
                       const AgentDims& ego_dims);

struct CatKey {
  int overlaps = 0;
  int earliest = std::numeric_limits<int>::max();
  double min_distance = std::numeric_limits<double>::infinity();
};

CatKey cat_key(const Trajectory& candidate, const EgoHistory& history, const AgentDims& adv_dims,
               const AgentDims& ego_dims);

}  // namespace seal
