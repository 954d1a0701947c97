#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace seal {

using Vec2 = Eigen::Vector2d;
using Polyline = std::vector<Vec2>;
using AgentId = int;

/// Simulation step (10 Hz).
inline constexpr double kDt = 0.1;
/// 1 s history + 8 s future.
inline constexpr int kScenarioSteps = 91;
/// Index of the last history step; futures start from here.
inline constexpr int kCurrentStep = 10;
inline constexpr int kFutureSteps = 80;

inline constexpr double kPi = std::numbers::pi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  a = std::remainder(a, Scalar(2 * kPi));
  if (a <= Scalar(-kPi)) a += Scalar(2 * kPi);
  return a;
}

inline Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Rounds to the 1e-6 grid used by the on-disk formats.
inline double quantize6(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace seal
