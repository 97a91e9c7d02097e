#pragma once

#include <nlohmann/json_fwd.hpp>

#include "stereofov/units.hpp"

namespace stereofov::display {

/// Angular <-> pixel calibration using a planar small-angle model: one degree
/// of visual angle spans `ppd` pixels everywhere on the image.
///
/// The default of 30 ppd is a configuration value, not a measured property
/// of any particular headset.
struct DisplayModel {
  int width_px = 1024;
  int height_px = 1024;
  double ppd = 30.0;
  double binocular_limit = 25.0;  // degrees

  /// Throws DomainError unless every field is positive and
  /// binocular_limit <= 90.
  void validate() const;

  Pixel center() const noexcept {
    return {0.5 * (width_px - 1), 0.5 * (height_px - 1)};
  }
  bool contains(Pixel p) const noexcept {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_px - 1 && p.y <= height_px - 1;
  }
};

Eccentricity eccentricity_of(const DisplayModel& d, Pixel gaze, Pixel p);

double arcmin_to_px(const DisplayModel& d, double arcmin) noexcept;
double px_to_arcmin(const DisplayModel& d, double px) noexcept;
double degrees_to_px(const DisplayModel& d, double degrees) noexcept;

void to_json(nlohmann::json& j, const DisplayModel& d);
void from_json(const nlohmann::json& j, DisplayModel& d);

}  // namespace stereofov::display
