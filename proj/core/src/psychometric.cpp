#include "stereofov/psychometric.hpp"

#include <cmath>
#include <numbers>

namespace stereofov::psychofit {

double weibull_eval(const WeibullParams& p, double x) noexcept {
  if (x <= 0.0) return 0.5;
  return 1.0 - 0.5 * std::exp(-std::pow(x / p.lambda, p.k));
}

double threshold_from_fit(const WeibullParams& p) noexcept {
  return p.lambda * std::pow(std::numbers::ln2, 1.0 / p.k);
}

double lambda_for_threshold(double threshold, double k) noexcept {
  return threshold / std::pow(std::numbers::ln2, 1.0 / k);
}

double with_lapse(double f, double lapse) noexcept {
  return (1.0 - lapse) * f + 0.5 * lapse;
}

}  // namespace stereofov::psychofit
