#include "stereofov/foveation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/stimulus.hpp"

namespace stereofov::foveation {

BlurPyramid build_pyramid(const GrayImage& img, const std::vector<double>& sigmas_arcmin,
                          const display::DisplayModel& dm) {
  if (sigmas_arcmin.empty() || sigmas_arcmin.front() != 0.0) {
    throw DomainError("pyramid levels must start at sigma 0");
  }
  for (std::size_t i = 1; i < sigmas_arcmin.size(); ++i) {
    if (!(sigmas_arcmin[i] > sigmas_arcmin[i - 1])) {
      throw DomainError("pyramid levels must strictly increase");
    }
  }
  BlurPyramid pyr;
  stimulus::PreblurOptions opts;
  opts.recover_contrast = false;
  for (double s : sigmas_arcmin) {
    pyr.levels.push_back({BlurSigma{s}, stimulus::preblur(img, BlurSigma{s}, dm, nullptr, opts)});
  }
  return pyr;
}

BudgetCurve BudgetCurve::from_model(const model::SurfaceModel& m) {
  return BudgetCurve([m](double theta) {
    return model::optimal_blur(m, Eccentricity{m.theta_range.clamp(theta)}).value;
  });
}

BudgetCurve BudgetCurve::from_table(std::vector<std::pair<double, double>> table) {
  if (table.empty()) throw DomainError("budget table is empty");
  std::ranges::sort(table);
  for (const auto& [t, s] : table) {
    if (!(s >= 0.0) || !std::isfinite(t)) throw DomainError("budget table entries must be >= 0");
  }
  return BudgetCurve([table = std::move(table)](double theta) {
    if (theta <= table.front().first) return table.front().second;
    if (theta >= table.back().first) return table.back().second;
    const auto hi = std::ranges::upper_bound(table, theta, {}, &std::pair<double, double>::first);
    const auto lo = hi - 1;
    if (hi->first == lo->first) return hi->second;
    const double t = (theta - lo->first) / (hi->first - lo->first);
    return (1.0 - t) * lo->second + t * hi->second;
  });
}

BudgetCurve BudgetCurve::constant(double sigma_arcmin) {
  if (!(sigma_arcmin >= 0.0)) throw DomainError("budget sigma must be >= 0");
  return BudgetCurve([sigma_arcmin](double) { return sigma_arcmin; });
}

BudgetCurve budget_from_json(const nlohmann::json& j) {
  if (!j.contains("budget") || !j.at("budget").is_array()) {
    throw DomainError("budget JSON needs a \"budget\" array of [theta, sigma] pairs");
  }
  std::vector<std::pair<double, double>> table;
  for (const auto& row : j.at("budget")) {
    if (!row.is_array() || row.size() != 2) throw DomainError("budget rows must be [theta, sigma]");
    table.emplace_back(row[0].get<double>(), row[1].get<double>());
  }
  return BudgetCurve::from_table(std::move(table));
}

GrayImage foveate(const BlurPyramid& pyr, Pixel gaze, const BudgetCurve& budget,
                  const display::DisplayModel& dm) {
  if (pyr.levels.empty()) throw DomainError("pyramid has no levels");
  const GrayImage& base = pyr.levels.front().image;
  if (!(gaze.x >= 0.0 && gaze.y >= 0.0 && gaze.x <= base.width() - 1 &&
        gaze.y <= base.height() - 1)) {
    throw DomainError("gaze lies outside the image");
  }
  const std::size_t top = pyr.levels.size() - 1;
  GrayImage out(base.width(), base.height());
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const double theta =
          display::eccentricity_of(dm, gaze, {static_cast<double>(x), static_cast<double>(y)})
              .value;
      const double s = std::max(0.0, budget(theta));
      std::size_t hi = 0;
      while (hi <= top && pyr.levels[hi].sigma.value < s) ++hi;
      double v;
      if (hi > top) {
        v = pyr.levels[top].image.at(x, y);
      } else if (hi == 0 || pyr.levels[hi].sigma.value == s) {
        v = pyr.levels[hi].image.at(x, y);
      } else {
        const auto& a = pyr.levels[hi - 1];
        const auto& b = pyr.levels[hi];
        const double w = (s - a.sigma.value) / (b.sigma.value - a.sigma.value);
        v = (1.0 - w) * a.image.at(x, y) + w * b.image.at(x, y);
      }
      out.at(x, y) = v;
    }
  }

  Mask lit(base.width(), base.height(), 0);
  bool any = false;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base.pixels()[i] > 0.0) {
      lit.pixels()[i] = 1;
      any = true;
    }
  }
  if (!any) return out;
  const ValueRange want = value_range(base, &lit);
  const ValueRange have = value_range(out, &lit);
  if (have.min == want.min && have.max == want.max) return out;
  if (have.max == have.min) return out;
  const double gain = (want.max - want.min) / (have.max - have.min);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!lit.pixels()[i]) continue;
    out.pixels()[i] = want.min + (out.pixels()[i] - have.min) * gain;
  }
  return out;
}

}  // namespace stereofov::foveation
