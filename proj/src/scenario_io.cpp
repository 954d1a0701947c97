#include "seal/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace seal {

using nlohmann::json;

const Lane* MapInfo::find_lane(int id) const {
  for (const auto& lane : lanes)
    if (lane.id == id) return &lane;
  return nullptr;
}

void link_predecessors(MapInfo& map) {
  for (auto& lane : map.lanes) lane.predecessors.clear();
  for (const auto& lane : map.lanes)
    for (int succ : lane.successors)
      for (auto& other : map.lanes)
        if (other.id == succ) other.predecessors.push_back(lane.id);
}

int Scenario::horizon() const {
  int h = 0;
  for (const auto& [id, t] : trajectories) h = std::max(h, t.end_index());
  return h;
}

const Trajectory& Scenario::trajectory(AgentId id) const {
  auto it = trajectories.find(id);
  if (it == trajectories.end()) throw ValidationError("scenario " + this->id + ": no agent " + std::to_string(id));
  return it->second;
}

AgentDims Scenario::dims_of(AgentId id) const {
  auto it = dims.find(id);
  return it == dims.end() ? AgentDims{} : it->second;
}

void validate(const Trajectory& t, std::string_view what) {
  if (t.points.size() < 2) throw ValidationError(std::string(what) + ": trajectory needs at least 2 points");
  if (t.start_index < 0) throw ValidationError(std::string(what) + ": negative start_index");
  for (const auto& p : t.points)
    if (!p.allFinite()) throw ValidationError(std::string(what) + ": non-finite coordinate");
}

void validate(const Scenario& s) {
  if (s.ego_id == s.adv_id) throw ValidationError("ego_id and adv_id must differ");
  if (!s.trajectories.contains(s.ego_id)) throw ValidationError("ego_id " + std::to_string(s.ego_id) + " not among agents");
  if (!s.trajectories.contains(s.adv_id)) throw ValidationError("adv_id " + std::to_string(s.adv_id) + " not among agents");
  for (const auto& [id, t] : s.trajectories) validate(t, "agent " + std::to_string(id));
  for (const auto& [id, d] : s.dims) {
    if (!(d.length > 0 && d.width > 0)) throw ValidationError("agent " + std::to_string(id) + ": dims must be positive");
  }
  for (const auto& lane : s.map.lanes) {
    if (lane.centerline.size() < 2) throw ValidationError("lane " + std::to_string(lane.id) + ": needs at least 2 points");
    if (!(lane.width > 0)) throw ValidationError("lane " + std::to_string(lane.id) + ": width must be positive");
    for (const auto& p : lane.centerline)
      if (!p.allFinite()) throw ValidationError("lane " + std::to_string(lane.id) + ": non-finite coordinate");
  }
  for (std::size_t i = 0; i < s.map.road_edges.size(); ++i) {
    const auto& edge = s.map.road_edges[i];
    const std::string where = "map.road_edges[" + std::to_string(i) + "]";
    if (edge.size() < 4) throw ConfigError(where + ": a closed road edge needs at least 4 points");
    if ((edge.front() - edge.back()).norm() > 1e-6) throw ConfigError(where + ": road edge is not closed");
  }
}

Polyline resample_to_grid(const Polyline& points, double source_dt) {
  if (std::abs(source_dt - kDt) < 1e-12 || points.size() < 2) return points;
  const double duration = source_dt * static_cast<double>(points.size() - 1);
  const auto n = static_cast<std::size_t>(std::floor(duration / kDt + 1e-9)) + 1;
  Polyline out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) * kDt / source_dt;
    const auto i = std::min(static_cast<std::size_t>(std::floor(u)), points.size() - 2);
    const double f = u - static_cast<double>(i);
    out.push_back(points[i] + f * (points[i + 1] - points[i]));
  }
  return out;
}

namespace {

// Field-path aware accessors so schema errors point at the offending key.
const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key + ": missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path + ": expected an integer");
  return j.get<int>();
}

Polyline points(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of [x, y]");
  Polyline out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& p = j[i];
    const std::string here = path + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2) throw ParseError(here + ": expected [x, y]");
    out.emplace_back(number(p[0], here + "[0]"), number(p[1], here + "[1]"));
  }
  return out;
}

std::vector<int> ids(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of ids");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(integer(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void put_number(std::string& out, double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, 6);
  std::string_view text(buf, static_cast<std::size_t>(end - buf));
  if (text == "-0.000000") text = "0.000000";
  out.append(text);
}

void put_points(std::string& out, const Polyline& pts) {
  out.push_back('[');
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out.push_back(',');
    out.push_back('[');
    put_number(out, pts[i].x());
    out.push_back(',');
    put_number(out, pts[i].y());
    out.push_back(']');
  }
  out.push_back(']');
}

void put_ids(std::string& out, const std::vector<int>& v) {
  out.push_back('[');
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(v[i]);
  }
  out.push_back(']');
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, std::string id) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: malformed JSON: ") + e.what());
  }
  Scenario s;
  s.id = std::move(id);
  const int version = integer(field(root, "version", "$"), "$.version");
  if (version != 1) throw ParseError("$.version: unsupported version " + std::to_string(version));
  const double dt = number(field(root, "dt", "$"), "$.dt");
  if (!(dt > 0)) throw ParseError("$.dt: must be positive");
  s.ego_id = integer(field(root, "ego_id", "$"), "$.ego_id");
  s.adv_id = integer(field(root, "adv_id", "$"), "$.adv_id");

  const json& agents = field(root, "agents", "$");
  if (!agents.is_array()) throw ParseError("$.agents: expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "$.agents[" + std::to_string(i) + "]";
    const json& a = agents[i];
    const int aid = integer(field(a, "id", path), path + ".id");
    AgentDims dims;
    if (a.contains("length")) dims.length = number(a["length"], path + ".length");
    if (a.contains("width")) dims.width = number(a["width"], path + ".width");
    Trajectory t;
    t.points = resample_to_grid(points(field(a, "points", path), path + ".points"), dt);
    const int start = a.contains("start_index") ? integer(a["start_index"], path + ".start_index") : 0;
    t.start_index = static_cast<int>(std::lround(start * dt / kDt));
    if (s.trajectories.contains(aid)) throw ParseError(path + ".id: duplicate agent id " + std::to_string(aid));
    s.trajectories.emplace(aid, std::move(t));
    s.dims.emplace(aid, dims);
  }

  const json& map = field(root, "map", "$");
  const json& lanes = field(map, "lanes", "$.map");
  if (!lanes.is_array()) throw ParseError("$.map.lanes: expected an array");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const std::string path = "$.map.lanes[" + std::to_string(i) + "]";
    const json& l = lanes[i];
    Lane lane;
    lane.id = integer(field(l, "id", path), path + ".id");
    lane.width = number(field(l, "width", path), path + ".width");
    lane.centerline = points(field(l, "centerline", path), path + ".centerline");
    if (l.contains("successors")) lane.successors = ids(l["successors"], path + ".successors");
    s.map.lanes.push_back(std::move(lane));
  }
  link_predecessors(s.map);

  const json& edges = field(map, "road_edges", "$.map");
  if (!edges.is_array()) throw ParseError("$.map.road_edges: expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i)
    s.map.road_edges.push_back(points(edges[i], "$.map.road_edges[" + std::to_string(i) + "]"));

  validate(s);
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  validate(s);
  std::string out;
  out.reserve(1 << 16);
  out += "{\"version\":1,\"dt\":";
  put_number(out, kDt);
  out += ",\"ego_id\":" + std::to_string(s.ego_id) + ",\"adv_id\":" + std::to_string(s.adv_id);
  out += ",\"agents\":[";
  bool first = true;
  for (const auto& [id, t] : s.trajectories) {
    if (!first) out.push_back(',');
    first = false;
    const AgentDims d = s.dims_of(id);
    out += "{\"id\":" + std::to_string(id) + ",\"length\":";
    put_number(out, d.length);
    out += ",\"width\":";
    put_number(out, d.width);
    out += ",\"points\":";
    put_points(out, t.points);
    out += ",\"start_index\":" + std::to_string(t.start_index) + "}";
  }
  out += "],\"map\":{\"lanes\":[";
  for (std::size_t i = 0; i < s.map.lanes.size(); ++i) {
    const Lane& lane = s.map.lanes[i];
    if (i) out.push_back(',');
    out += "{\"id\":" + std::to_string(lane.id) + ",\"width\":";
    put_number(out, lane.width);
    out += ",\"centerline\":";
    put_points(out, lane.centerline);
    out += ",\"successors\":";
    put_ids(out, lane.successors);
    out.push_back('}');
  }
  out += "],\"road_edges\":[";
  for (std::size_t i = 0; i < s.map.road_edges.size(); ++i) {
    if (i) out.push_back(',');
    put_points(out, s.map.road_edges[i]);
  }
  out += "]}}\n";
  return out;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  const std::string text = serialize_scenario(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write scenario file " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::filesystem::path p(line);
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back(p);
  }
  return out;
}

void write_manifest(const std::vector<std::filesystem::path>& paths, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& p : paths) out << p.generic_string() << '\n';
}

}  // namespace seal
