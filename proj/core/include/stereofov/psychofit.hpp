#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/psychometric.hpp"
#include "stereofov/staircase.hpp"

namespace stereofov::psychofit {

struct DataRow {
  double intensity = 0.0;
  int n = 0;  // trials
  int c = 0;  // correct
  double proportion() const noexcept { return static_cast<double>(c) / n; }
  bool operator==(const DataRow&) const = default;
};

/// Rows sorted by ascending, distinct intensity.
struct PsychometricDataset {
  std::vector<DataRow> rows;

  /// Throws DomainError when a row breaks 0 <= c <= n, n >= 1, or
  /// intensities are not strictly increasing.
  void validate() const;
  int total_trials() const noexcept;
};

/// Groups a trial log by presented intensity. Throws DomainError when empty.
PsychometricDataset tally(std::span<const staircase::TrialRecord> trials);

struct FitResult {
  WeibullParams params;
  double sse = 0.0;          // weighted sum of squared residuals
  double gradient_norm = 0;  // in (log lambda, log k)
  bool at_bound = false;
};

/// Weighted least squares sum_d n_d (P(d) - F(d))^2 over lambda, k > 0:
/// damped Gauss-Newton in (log lambda, log k) from a 5 x 5 grid of starts.
/// Throws FitError when fewer than two intensities are present or all
/// proportions are identical.
FitResult fit_weibull_detailed(const PsychometricDataset& data);
WeibullParams fit_weibull(const PsychometricDataset& data);

enum class BootstrapScheme { parametric_rows, trials };

struct BootstrapOptions {
  int n_boot = 100;
  std::uint64_t seed = 0;
  BootstrapScheme scheme = BootstrapScheme::parametric_rows;
};

struct ThresholdEstimate {
  double T = 0.0;
  double T_sigma = 0.0;
  double u = 0.0;
  double weight = 0.0;
  bool outlier = false;
  double theta = 0.0;  // condition labels, carried through
  double sigma = 0.0;
  int n_boot_ok = 0;
};

/// Relative uncertainty above which an estimate is excluded from fitting.
inline constexpr double kOutlierU = 0.3;
/// Weight used for u == 0 (1/u^2 is unbounded).
inline constexpr double kMaxWeight = 1e12;

double weight_from_u(double u) noexcept;

/// Fits the data, then refits `n_boot` resampled datasets. Resampling draws
/// c_d ~ Binomial(n_d, c_d / n_d) per row (or resamples trials with
/// replacement). Failed refits are dropped; fewer than half succeeding throws
/// FitError.
ThresholdEstimate bootstrap_threshold(const PsychometricDataset& data,
                                      const BootstrapOptions& opts = {});

// Estimate CSV columns: theta,sigma,T,T_sigma,u,weight,outlier
inline constexpr const char* kEstimateCsvHeader = "theta,sigma,T,T_sigma,u,weight,outlier";

std::string estimates_csv(std::span<const ThresholdEstimate> estimates);
std::vector<ThresholdEstimate> parse_estimates_csv(const std::string& text);

void to_json(nlohmann::json& j, const ThresholdEstimate& e);
void from_json(const nlohmann::json& j, ThresholdEstimate& e);

}  // namespace stereofov::psychofit
