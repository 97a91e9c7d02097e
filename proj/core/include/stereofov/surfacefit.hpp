#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/model.hpp"
#include "stereofov/psychofit.hpp"

namespace stereofov::surfacefit {

/// Vertex form p1 * (sigma - p2)^2 + p3 at one eccentricity.
struct ParabolaParams {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
  double theta = 0.0;
  bool convex = true;          // false when the fitted curvature is <= 0
  std::string warning;
  int n_used = 0;
  int n_excluded = 0;          // outliers dropped
  std::vector<double> residuals;  // T - fit, for the points used
};

/// Weighted least squares of T on (sigma^2, sigma, 1) with weights 1/u^2,
/// outliers excluded, then converted to vertex form. Throws FitError when
/// fewer than three usable estimates with distinct sigma remain.
ParabolaParams fit_parabola(std::span<const psychofit::ThresholdEstimate> estimates);

struct ThetaValue {
  double theta = 0.0;
  double value = 0.0;
};

struct ExpFit {
  model::ExpCurve curve;
  bool degenerate = false;
  std::string warning;
};

/// a e^{b theta} + c through the points. With `exact_3pt` the points must be
/// theta = 0, 10, 20 and the closed-form interpolant is returned; otherwise a
/// least-squares fit (variable projection over b). Degenerate geometry (no
/// monotone exponential through the data) falls back to a constant (mean) or,
/// for exactly linear data, to a near-linear curve, with `degenerate` set.
ExpFit fit_exponential(std::span<const ThetaValue> points, bool exact_3pt);

enum class P1Mode { fit, constant };

/// Interpolates parameter curves through parabolas at three eccentricities.
/// In constant mode p1 becomes the mean of the three curvatures.
model::SurfaceModel assemble_surface(std::span<const ParabolaParams> parabolas,
                                     P1Mode p1_mode = P1Mode::fit);

struct SurfaceFitReport {
  model::SurfaceModel model;
  std::vector<ParabolaParams> parabolas;
  std::vector<ExpFit> curve_fits;  // p1, p2, p3
  std::vector<psychofit::ThresholdEstimate> excluded;
};

/// Groups estimates by eccentricity, fits one parabola per group and
/// assembles the surface. Throws FitError when an eccentricity of
/// `required_thetas` has no data.
SurfaceFitReport fit_surface(std::span<const psychofit::ThresholdEstimate> estimates,
                             P1Mode p1_mode = P1Mode::fit,
                             std::span<const double> required_thetas = {});

nlohmann::json report_json(const SurfaceFitReport& r);
std::string report_text(const SurfaceFitReport& r);

}  // namespace stereofov::surfacefit
