#pragma once

#include "seal/scenario.hpp"

#include <string>
#include <vector>

namespace seal {

inline constexpr int kNumCandidates = 32;
inline constexpr double kSubgoalSpacing = 8.0;
inline constexpr double kMaxCandidateSpeed = 30.0;

/// Adversary futures: each candidate starts at the adversary's position at
/// kCurrentStep and holds kFutureSteps further points (81 points total).
struct CandidateSet {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::vector<Trajectory> candidates;
};

struct SamplerOptions {
  int count = kNumCandidates;
  double blend_seconds = 3.0;
};

/// Lattice sampler: reachable lane sequences (successors and adjacent-lane
/// changes) crossed with braking/holding/accelerating speed profiles, plus
/// seeded jittered variants until `count` distinct feasible candidates exist.
CandidateSet sample_candidates(const Scenario& s, std::uint64_t seed, const SamplerOptions& options = {});

/// Full-horizon adversary trajectory: recorded history followed by the candidate.
Trajectory splice_candidate(const Scenario& s, const Trajectory& candidate);

/// Checkpoints every 8 m of arc length, plus the final point.
Polyline extract_subgoals(const Trajectory& trajectory, double spacing = kSubgoalSpacing);

/// Largest finite-difference curvature (Menger curvature of consecutive
/// triples); steps shorter than `min_step` are ignored.
double max_implied_curvature(const Polyline& points, double min_step = 1e-3);
double max_implied_speed(const Polyline& points);
/// Largest step-to-step change of finite-difference speed, starting from `initial_speed`.
double max_implied_accel(const Polyline& points, double initial_speed);

/// Lane ids whose centreline passes within half a lane width of `p` and
/// whose direction agrees with `heading` within 45 degrees, nearest first.
std::vector<int> lanes_at(const MapInfo& map, const Vec2& p, double heading);

}  // namespace seal
