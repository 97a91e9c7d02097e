#pragma once

#include <cmath>
#include <compare>

namespace stereofov {

// Unit-tagged scalar. Angles in this project use degrees for eccentricity and
// arcminutes for blur sigma and disparity.
template <class Tag>
struct Quantity {
  double value = 0.0;

  constexpr Quantity() = default;
  constexpr explicit Quantity(double v) : value(v) {}

  constexpr auto operator<=>(const Quantity&) const = default;
};

/// Visual angle from the gaze point, in degrees.
using Eccentricity = Quantity<struct EccentricityTag>;
/// Standard deviation of a Gaussian blur kernel, in arcminutes.
using BlurSigma = Quantity<struct BlurSigmaTag>;
/// Binocular disparity, in arcminutes (signed).
using Disparity = Quantity<struct DisparityTag>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kArcminPerDegree = 60.0;

/// Pixel coordinate; x grows to the right, y grows downwards.
struct Pixel {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace stereofov
