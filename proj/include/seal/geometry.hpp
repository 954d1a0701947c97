#pragma once

#include "seal/common.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>

namespace seal {

/// Rectangle footprint of a vehicle, centred on `center`.
template <typename Scalar>
struct OrientedBox {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;

  Vec center = Vec::Zero();
  Scalar heading = 0;
  Scalar length = 0;
  Scalar width = 0;

  Vec axis_long() const { return {std::cos(heading), std::sin(heading)}; }
  Vec axis_lat() const { return {-std::sin(heading), std::cos(heading)}; }

  std::array<Vec, 4> corners() const {
    const Vec hl = axis_long() * (length / 2);
    const Vec hw = axis_lat() * (width / 2);
    return {center + hl + hw, center - hl + hw, center - hl - hw, center + hl - hw};
  }

  /// Closed containment test.
  bool contains(const Vec& p) const {
    const Vec d = p - center;
    return std::abs(d.dot(axis_long())) <= length / 2 && std::abs(d.dot(axis_lat())) <= width / 2;
  }

  /// Half-extent of the box projected onto a unit axis.
  Scalar projected_radius(const Vec& axis) const {
    return std::abs(axis.dot(axis_long())) * length / 2 + std::abs(axis.dot(axis_lat())) * width / 2;
  }
};

using Box = OrientedBox<double>;

template <typename Scalar>
struct SatResult {
  Eigen::Matrix<Scalar, 2, 1> normal;  ///< unit, oriented from the first box to the second
  Scalar penetration;
};

/// Separating-axis test over the four face normals of two rectangles.
/// Touching boxes (zero penetration) count as overlapping.
template <typename Scalar>
std::optional<SatResult<Scalar>> sat_overlap(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  const std::array<Vec, 4> axes = {a.axis_long(), a.axis_lat(), b.axis_long(), b.axis_lat()};
  const Vec d = b.center - a.center;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  Vec best_axis = axes[0];
  for (const Vec& axis : axes) {
    const Scalar overlap = a.projected_radius(axis) + b.projected_radius(axis) - std::abs(d.dot(axis));
    if (overlap < 0) return std::nullopt;
    if (overlap < best) {
      best = overlap;
      best_axis = axis;
    }
  }
  if (d.dot(best_axis) < 0) best_axis = -best_axis;
  return SatResult<Scalar>{best_axis, best};
}

/// Even-odd point-in-polygon test. The polygon may repeat its first vertex.
bool point_in_polygon(const Vec2& p, std::span<const Vec2> polygon);

/// Even-odd test against the union of several closed polygons.
bool point_in_region(const Vec2& p, std::span<const Polyline> polygons);

/// True iff every corner of the box lies inside the region.
bool box_in_region(const Box& box, std::span<const Polyline> polygons);

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);
double distance_to_polyline(const Vec2& p, std::span<const Vec2> line);

/// Position of a point relative to a polyline.
struct PolylineProjection {
  double arc_length = 0;   ///< along the polyline, clamped to [0, length]
  double lateral = 0;      ///< signed, positive to the left of travel
  double distance = 0;     ///< unsigned distance to the closest point
  double tangent_heading = 0;
  std::size_t segment = 0;
};

PolylineProjection project_onto_polyline(const Vec2& p, std::span<const Vec2> line);

std::vector<double> cumulative_arc_length(std::span<const Vec2> line);
double polyline_length(std::span<const Vec2> line);

/// Point at arc length `s`; extrapolates linearly past either end.
Vec2 point_at_arc_length(std::span<const Vec2> line, std::span<const double> cumulative, double s);
double heading_at_arc_length(std::span<const Vec2> line, std::span<const double> cumulative, double s);

/// Headings from consecutive displacements; the final step copies the previous
/// heading and stationary stretches inherit the nearest moving heading.
std::vector<double> derive_headings(std::span<const Vec2> points);

}  // namespace seal

namespace seal {

/// C1 Catmull-Rom curve through a polyline's vertices, evaluated by arc
/// length. Positions sampled along it turn smoothly even between vertices,
/// which keeps finite-difference curvature of sampled trajectories meaningful.
class SmoothPath {
 public:
  SmoothPath() = default;
  explicit SmoothPath(Polyline control);

  double length() const { return table_s_.empty() ? 0.0 : table_s_.back(); }
  /// Extrapolates along the end tangents outside [0, length].
  Vec2 at(double s) const;
  double heading(double s) const;
  bool empty() const { return control_.size() < 2; }
  const Polyline& control() const { return control_; }

 private:
  Vec2 eval(double u) const;
  Vec2 tangent(double u) const;
  double param_at(double s) const;

  Polyline control_;
  std::vector<double> table_u_;
  std::vector<double> table_s_;
};

}  // namespace seal
