#include "seal/geometry.hpp"

#include <algorithm>
#include <limits>

namespace seal {

bool point_in_polygon(const Vec2& p, std::span<const Vec2> polygon) {
  bool inside = false;
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool point_in_region(const Vec2& p, std::span<const Polyline> polygons) {
  bool inside = false;
  for (const auto& poly : polygons) {
    if (point_in_polygon(p, poly)) inside = !inside;
  }
  return inside;
}

bool box_in_region(const Box& box, std::span<const Polyline> polygons) {
  for (const Vec2& c : box.corners())
    if (!point_in_region(c, polygons)) return false;
  return true;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

double distance_to_polyline(const Vec2& p, std::span<const Vec2> line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return (p - line[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, distance_to_segment(p, line[i], line[i + 1]));
  return best;
}

PolylineProjection project_onto_polyline(const Vec2& p, std::span<const Vec2> line) {
  PolylineProjection out;
  if (line.size() < 2) {
    if (!line.empty()) out.distance = (p - line[0]).norm();
    return out;
  }
  double best = std::numeric_limits<double>::infinity();
  double s_start = 0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Vec2 ab = line[i + 1] - line[i];
    const double len = ab.norm();
    if (len <= 0) continue;
    const Vec2 dir = ab / len;
    const double t = std::clamp((p - line[i]).dot(dir), 0.0, len);
    const Vec2 foot = line[i] + t * dir;
    const double dist = (p - foot).norm();
    if (dist < best) {
      best = dist;
      out.arc_length = s_start + t;
      out.distance = dist;
      const Vec2 rel = p - line[i];
      out.lateral = dir.x() * rel.y() - dir.y() * rel.x();
      out.tangent_heading = std::atan2(dir.y(), dir.x());
      out.segment = i;
    }
    s_start += len;
  }
  return out;
}

std::vector<double> cumulative_arc_length(std::span<const Vec2> line) {
  std::vector<double> s(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) s[i] = s[i - 1] + (line[i] - line[i - 1]).norm();
  return s;
}

double polyline_length(std::span<const Vec2> line) {
  double s = 0;
  for (std::size_t i = 1; i < line.size(); ++i) s += (line[i] - line[i - 1]).norm();
  return s;
}

namespace {

// Index i such that cumulative[i] <= s < cumulative[i+1], clamped to a valid segment.
std::size_t segment_for(std::span<const double> cumulative, double s) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  std::size_t i = it == cumulative.begin() ? 0 : static_cast<std::size_t>(it - cumulative.begin()) - 1;
  i = std::min(i, cumulative.size() - 2);
  // skip zero-length segments
  while (i + 1 < cumulative.size() - 1 && cumulative[i + 1] - cumulative[i] <= 0) ++i;
  return i;
}

}  // namespace

Vec2 point_at_arc_length(std::span<const Vec2> line, std::span<const double> cumulative, double s) {
  if (line.size() == 1) return line[0];
  const std::size_t i = segment_for(cumulative, s);
  const double len = cumulative[i + 1] - cumulative[i];
  if (len <= 0) return line[i];
  const double t = (s - cumulative[i]) / len;
  return line[i] + t * (line[i + 1] - line[i]);
}

double heading_at_arc_length(std::span<const Vec2> line, std::span<const double> cumulative, double s) {
  if (line.size() < 2) return 0;
  const std::size_t i = segment_for(cumulative, s);
  const Vec2 d = line[i + 1] - line[i];
  return std::atan2(d.y(), d.x());
}

std::vector<double> derive_headings(std::span<const Vec2> points) {
  constexpr double kStationary = 1e-6;
  const std::size_t n = points.size();
  std::vector<double> heading(n, 0.0);
  std::vector<bool> known(n, false);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 d = points[i + 1] - points[i];
    if (d.norm() > kStationary) {
      heading[i] = std::atan2(d.y(), d.x());
      known[i] = true;
    }
  }
  // stationary steps copy the previous heading; leading ones take the first known
  std::optional<double> first;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (known[i]) {
      first = heading[i];
      break;
    }
  }
  if (!first) return heading;
  double last = *first;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (known[i])
      last = heading[i];
    else
      heading[i] = last;
  }
  if (n >= 2) heading[n - 1] = heading[n - 2];
  return heading;
}

}  // namespace seal

namespace seal {

SmoothPath::SmoothPath(Polyline control) {
  // drop repeated vertices; Catmull-Rom needs distinct neighbours
  for (const auto& p : control)
    if (control_.empty() || (control_.back() - p).norm() > 1e-9) control_.push_back(p);
  if (control_.size() < 2) return;
  constexpr int kSamplesPerSegment = 16;
  const double u_max = static_cast<double>(control_.size() - 1);
  Vec2 prev = eval(0);
  table_u_.push_back(0);
  table_s_.push_back(0);
  const int n = kSamplesPerSegment * static_cast<int>(control_.size() - 1);
  for (int k = 1; k <= n; ++k) {
    const double u = u_max * k / n;
    const Vec2 p = eval(u);
    table_u_.push_back(u);
    table_s_.push_back(table_s_.back() + (p - prev).norm());
    prev = p;
  }
}

Vec2 SmoothPath::eval(double u) const {
  const std::size_t last = control_.size() - 1;
  const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), last - 1);
  const double t = u - static_cast<double>(i);
  const Vec2& p1 = control_[i];
  const Vec2& p2 = control_[i + 1];
  const Vec2 p0 = i > 0 ? control_[i - 1] : 2 * p1 - p2;
  const Vec2 p3 = i + 2 <= last ? control_[i + 2] : 2 * p2 - p1;
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2 * p1) + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t2 + (-p0 + 3 * p1 - 3 * p2 + p3) * t3);
}

Vec2 SmoothPath::tangent(double u) const {
  const std::size_t last = control_.size() - 1;
  const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), last - 1);
  const double t = u - static_cast<double>(i);
  const Vec2& p1 = control_[i];
  const Vec2& p2 = control_[i + 1];
  const Vec2 p0 = i > 0 ? control_[i - 1] : 2 * p1 - p2;
  const Vec2 p3 = i + 2 <= last ? control_[i + 2] : 2 * p2 - p1;
  const Vec2 d = 0.5 * ((-p0 + p2) + 2 * (2 * p0 - 5 * p1 + 4 * p2 - p3) * t + 3 * (-p0 + 3 * p1 - 3 * p2 + p3) * t * t);
  const double n = d.norm();
  return n > 0 ? Vec2(d / n) : Vec2(p2 - p1).normalized();
}

double SmoothPath::param_at(double s) const {
  auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
  std::size_t k = it == table_s_.begin() ? 0 : static_cast<std::size_t>(it - table_s_.begin()) - 1;
  k = std::min(k, table_s_.size() - 2);
  const double span = table_s_[k + 1] - table_s_[k];
  const double f = span > 0 ? (s - table_s_[k]) / span : 0.0;
  return table_u_[k] + f * (table_u_[k + 1] - table_u_[k]);
}

Vec2 SmoothPath::at(double s) const {
  if (control_.size() == 1) return control_[0];
  if (s <= 0) return eval(0) + s * tangent(0);
  const double len = length();
  const double u_max = static_cast<double>(control_.size() - 1);
  if (s >= len) return eval(u_max) + (s - len) * tangent(u_max);
  return eval(param_at(s));
}

double SmoothPath::heading(double s) const {
  const double u_max = static_cast<double>(control_.size() - 1);
  const Vec2 t = s <= 0 ? tangent(0) : s >= length() ? tangent(u_max) : tangent(param_at(s));
  return std::atan2(t.y(), t.x());
}

}  // namespace seal
