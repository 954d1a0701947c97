#include "seal/criticality.hpp"

#include "seal/geometry.hpp"

#include <algorithm>

namespace seal {

EgoHistory::EgoHistory(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("history capacity K must be at least 1");
}

void EgoHistory::push(Trajectory ego_rollout) {
  entries_.push_back(std::move(ego_rollout));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

const Trajectory& EgoHistory::latest() const {
  if (entries_.empty()) throw ValidationError("ego history is empty");
  return entries_.back();
}

RolloutRecord oracle_rollout(const Scenario& s, const Trajectory& candidate) {
  PolicyBinding bindings = replay_all(s);
  bindings[s.ego_id] = IdmPolicy{default_idm(s, s.ego_id), {}};
  bindings[s.adv_id] = ReplayPolicy{splice_candidate(s, candidate)};
  return run_episode(s, bindings, 0);
}

CritScore oracle_score(const Scenario& s, const Trajectory& candidate, const EgoHistory& history, double b) {
  if (history.empty()) throw ValidationError("oracle_score: ego history is empty");
  const RolloutRecord r = oracle_rollout(s, candidate);
  const Trajectory& ego = r.trace(s.ego_id).trajectory;
  const Trajectory& adv = r.trace(s.adv_id).trajectory;
  return CritScore{f_coll(ego, adv, b), f_diff(history.latest(), ego, b)};
}

int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  return best;
}

CatKey cat_key(const Trajectory& candidate, const EgoHistory& history, const AgentDims& adv_dims,
               const AgentDims& ego_dims) {
  CatKey key;
  const auto adv_heading = derive_headings(candidate.points);
  for (const Trajectory& ego : history.entries()) {
    const auto ego_heading = derive_headings(ego.points);
    const int lo = std::max(ego.start_index, candidate.start_index);
    const int hi = std::min(ego.end_index(), candidate.end_index());
    for (int t = lo; t < hi; ++t) {
      const Box a{candidate.at_step(t), adv_heading[static_cast<std::size_t>(t - candidate.start_index)],
                  adv_dims.length, adv_dims.width};
      const Box e{ego.at_step(t), ego_heading[static_cast<std::size_t>(t - ego.start_index)], ego_dims.length,
                  ego_dims.width};
      key.min_distance = std::min(key.min_distance, (a.center - e.center).norm());
      if (sat_overlap(a, e)) {
        ++key.overlaps;
        key.earliest = std::min(key.earliest, t);
        break;
      }
    }
  }
  return key;
}

int rank_heuristic_cat(const CandidateSet& candidates, const EgoHistory& history, const AgentDims& adv_dims,
                       const AgentDims& ego_dims) {
  if (history.empty()) throw ValidationError("rank_heuristic_cat: ego history is empty");
  std::vector<CatKey> keys;
  for (const auto& c : candidates.candidates) keys.push_back(cat_key(c, history, adv_dims, ego_dims));
  const bool any_overlap = std::any_of(keys.begin(), keys.end(), [](const CatKey& k) { return k.overlaps > 0; });
  int best = 0;
  for (int i = 1; i < static_cast<int>(keys.size()); ++i) {
    const CatKey& k = keys[static_cast<std::size_t>(i)];
    const CatKey& b = keys[static_cast<std::size_t>(best)];
    const bool better = any_overlap ? (k.overlaps > b.overlaps || (k.overlaps == b.overlaps && k.earliest < b.earliest))
                                    : k.min_distance < b.min_distance;
    if (better) best = i;
  }
  return best;
}

}  // namespace seal
