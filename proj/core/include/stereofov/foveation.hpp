#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/display.hpp"
#include "stereofov/image.hpp"
#include "stereofov/model.hpp"

namespace stereofov::foveation {

struct PyramidLevel {
  BlurSigma sigma;
  GrayImage image;
};

/// Pre-blurred copies of one image at increasing sigma; level 0 is the input.
struct BlurPyramid {
  std::vector<PyramidLevel> levels;
};

inline const std::vector<double> kDefaultLevels = {0.0, 2.0, 4.0, 8.0, 16.0, 32.0};

/// Throws DomainError unless sigmas start at 0 and strictly increase.
BlurPyramid build_pyramid(const GrayImage& img, const std::vector<double>& sigmas_arcmin,
                          const display::DisplayModel& dm);

/// Blur budget sigma(theta) in arcmin.
class BudgetCurve {
 public:
  /// Optimal blur of the model, eccentricity clamped to the model range.
  static BudgetCurve from_model(const model::SurfaceModel& m);
  /// Piecewise-linear (theta, sigma) table, constant beyond its ends.
  static BudgetCurve from_table(std::vector<std::pair<double, double>> table);
  static BudgetCurve constant(double sigma_arcmin);

  double operator()(double theta_deg) const { return fn_(theta_deg); }

 private:
  explicit BudgetCurve(std::function<double(double)> fn) : fn_(std::move(fn)) {}
  std::function<double(double)> fn_;
};

/// {"budget": [[theta, sigma], ...]}
BudgetCurve budget_from_json(const nlohmann::json& j);

/// Per pixel: sigma = budget(eccentricity), linear blend of the two bracketing
/// levels (top level beyond the pyramid). Finally the pixels that are non-black
/// in level 0 are remapped linearly so their min/max match the input's.
GrayImage foveate(const BlurPyramid& pyr, Pixel gaze, const BudgetCurve& budget,
                  const display::DisplayModel& dm);

}  // namespace stereofov::foveation
