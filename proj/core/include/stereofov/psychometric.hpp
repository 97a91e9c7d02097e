#pragma once

namespace stereofov::psychofit {

/// Shape of the 2AFC modified Weibull F(x) = 1 - 0.5 exp(-(x / lambda)^k).
struct WeibullParams {
  double lambda = 1.0;
  double k = 1.0;
};

/// F(x) in [0.5, 1). x must be >= 0.
double weibull_eval(const WeibullParams& p, double x) noexcept;

/// Closed-form 75% point: lambda * (ln 2)^(1/k).
double threshold_from_fit(const WeibullParams& p) noexcept;

/// Scale whose 75% point equals `threshold` for shape k.
double lambda_for_threshold(double threshold, double k) noexcept;

/// Probability of a correct 2AFC answer when a fraction `lapse` of trials are
/// blind guesses: (1 - lapse) F(x) + lapse / 2.
double with_lapse(double f, double lapse) noexcept;

}  // namespace stereofov::psychofit
