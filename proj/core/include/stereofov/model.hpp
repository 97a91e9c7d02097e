#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/display.hpp"
#include "stereofov/image.hpp"
#include "stereofov/units.hpp"

namespace stereofov::model {

/// p(theta) = a * exp(b * theta) + c
struct ExpCurve {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double theta) const noexcept;
  bool operator==(const ExpCurve&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
  bool operator==(const Interval&) const = default;
};

/// Stereoacuity threshold surface
///   M(theta, sigma) = p1(theta) * (sigma - p2(theta))^2 + p3(theta)
/// with theta in degrees, sigma and M in arcminutes.
struct SurfaceModel {
  ExpCurve p1;
  ExpCurve p2;
  ExpCurve p3;
  double p1_constant = 0.0034;
  Interval theta_range{0.0, 20.0};
  Interval sigma_range{0.0, 15.0};

  bool operator==(const SurfaceModel&) const = default;
};

enum class P1Mode { printed, constant };

/// Evaluation domain policy. Out-of-range inputs throw RangeError unless
/// `extrapolate` is set.
struct EvalOptions {
  P1Mode p1_mode = P1Mode::printed;
  bool extrapolate = false;
};

/// The published coefficients:
///   p1 = 2.07e-11 e^{0.87 theta} + 0.003
///   p2 = 8.85 e^{0.04 theta} - 7.5
///   p3 = 0.04 e^{0.15 theta} + 0.12
/// The text quotes p2(10) = 5.41' and p2(20) = 11.33'; evaluating the printed
/// coefficients gives 5.70' and 12.20'. The coefficients are authoritative here.
SurfaceModel default_paper_model();

Disparity eval_threshold(const SurfaceModel& m, Eccentricity theta, BlurSigma sigma,
                         EvalOptions opts = {});

/// Blur that minimizes the threshold at fixed eccentricity: max(0, p2(theta)).
BlurSigma optimal_blur(const SurfaceModel& m, Eccentricity theta, bool extrapolate = false);

/// sigma = 3 / (2 pi f) degrees, returned in arcminutes. Throws DomainError for f <= 0.
BlurSigma sigma_from_cutoff(double cycles_per_degree);

/// Per-pixel optimal blur (arcmin) for a gaze position. Eccentricities beyond
/// the model range are clamped to its upper end.
ScalarField blur_budget_map(const SurfaceModel& m, const display::DisplayModel& d, Pixel gaze);

/// Budget map written as uint16 little-endian (arcmin * scale) plus sidecar.
struct BudgetMapEncoding {
  double scale = 100.0;
};
nlohmann::json budget_map_sidecar(const ScalarField& map, Pixel gaze, BudgetMapEncoding enc);

void to_json(nlohmann::json& j, const ExpCurve& c);
void from_json(const nlohmann::json& j, ExpCurve& c);
void to_json(nlohmann::json& j, const SurfaceModel& m);
void from_json(const nlohmann::json& j, SurfaceModel& m);

SurfaceModel load_model(const std::string& path);
void save_model(const std::string& path, const SurfaceModel& m);

}  // namespace stereofov::model
