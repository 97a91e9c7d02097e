#include "stereofov/display.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"

namespace stereofov::display {

void DisplayModel::validate() const {
  if (width_px <= 0 || height_px <= 0) throw DomainError("display size must be positive");
  if (!(ppd > 0.0) || !std::isfinite(ppd)) throw DomainError("ppd must be positive");
  if (!(binocular_limit > 0.0) || binocular_limit > 90.0) {
    throw DomainError("binocular_limit must lie in (0, 90] degrees");
  }
}

Eccentricity eccentricity_of(const DisplayModel& d, Pixel gaze, Pixel p) {
  return Eccentricity{std::hypot(p.x - gaze.x, p.y - gaze.y) / d.ppd};
}

double arcmin_to_px(const DisplayModel& d, double arcmin) noexcept {
  return arcmin * d.ppd / kArcminPerDegree;
}

double px_to_arcmin(const DisplayModel& d, double px) noexcept {
  return px * kArcminPerDegree / d.ppd;
}

double degrees_to_px(const DisplayModel& d, double degrees) noexcept { return degrees * d.ppd; }

void to_json(nlohmann::json& j, const DisplayModel& d) {
  j = nlohmann::json{{"width_px", d.width_px},
                     {"height_px", d.height_px},
                     {"ppd", d.ppd},
                     {"binocular_limit", d.binocular_limit}};
}

void from_json(const nlohmann::json& j, DisplayModel& d) {
  DisplayModel out;
  out.width_px = j.value("width_px", out.width_px);
  out.height_px = j.value("height_px", out.height_px);
  out.ppd = j.value("ppd", out.ppd);
  out.binocular_limit = j.value("binocular_limit", out.binocular_limit);
  out.validate();
  d = out;
}

}  // namespace stereofov::display
