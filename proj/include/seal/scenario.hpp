#pragma once

#include "seal/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace seal {

/// Positions sampled every kDt seconds, starting at scenario step `start_index`.
struct Trajectory {
  Polyline points;
  int start_index = 0;

  int size() const { return static_cast<int>(points.size()); }
  int end_index() const { return start_index + size(); }  ///< one past the last step
  bool covers(int step) const { return step >= start_index && step < end_index(); }
  const Vec2& at_step(int step) const { return points[static_cast<std::size_t>(step - start_index)]; }

  bool operator==(const Trajectory&) const = default;
};

struct Lane {
  int id = 0;
  double width = 3.5;
  Polyline centerline;
  std::vector<int> successors;
  std::vector<int> predecessors;

  bool operator==(const Lane&) const = default;
};

struct MapInfo {
  std::vector<Lane> lanes;
  /// Closed polygons; the drivable region is their even-odd union.
  std::vector<Polyline> road_edges;

  const Lane* find_lane(int id) const;
  bool operator==(const MapInfo&) const = default;
};

/// Rebuilds every lane's predecessor list from the successor lists.
void link_predecessors(MapInfo& map);

struct AgentDims {
  double length = 4.5;
  double width = 2.0;
  bool operator==(const AgentDims&) const = default;
};

struct Scenario {
  std::string id;
  std::map<AgentId, Trajectory> trajectories;
  MapInfo map;
  AgentId ego_id = 0;
  AgentId adv_id = 1;
  std::map<AgentId, AgentDims> dims;

  /// Number of steps spanned by the longest trajectory.
  int horizon() const;
  const Trajectory& trajectory(AgentId id) const;
  AgentDims dims_of(AgentId id) const;

  bool operator==(const Scenario&) const = default;
};

/// Throws ValidationError on the first violated invariant.
void validate(const Scenario& s);
void validate(const Trajectory& t, std::string_view what);

enum class Template { StraightMerge, TJunction, CurveFollow };

std::string_view to_string(Template t);
Template template_from_string(std::string_view name);

/// Deterministic 9 s base scenario with interacting ego/adversary paths and
/// `n_background` agents on non-conflicting lanes. Coordinates lie on the
/// 1e-6 grid of the file format, so save/load round-trips exactly.
Scenario generate_synthetic(std::uint64_t seed, Template tmpl, int n_background);

/// `count` scenarios cycling through the templates, named scenario_0000, ...
std::vector<Scenario> synthetic_suite(std::uint64_t seed, int count, int n_background = 3);
std::string suite_scenario_name(int index);

Scenario parse_scenario(std::string_view json_text, std::string id);
std::string serialize_scenario(const Scenario& s);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

/// Linear resampling of a trace recorded at `source_dt` onto the kDt grid.
Polyline resample_to_grid(const Polyline& points, double source_dt);

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<std::filesystem::path>& paths, const std::filesystem::path& path);

}  // namespace seal
