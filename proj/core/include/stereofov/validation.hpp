#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/display.hpp"
#include "stereofov/foveation.hpp"
#include "stereofov/model.hpp"
#include "stereofov/psychofit.hpp"
#include "stereofov/staircase.hpp"
#include "stereofov/stimulus.hpp"

namespace stereofov::validation {

enum class Style { org, fov };

std::string_view to_string(Style s) noexcept;
std::optional<Style> parse_style(std::string_view s) noexcept;

struct ValidationCondition {
  std::string scene = "forest-like";  // forest-like | kitchen-like | procedural-<seed>
  Style style = Style::org;
  bool operator==(const ValidationCondition&) const = default;
};

/// Throws DomainError for an unknown scene id.
void validate_scene_id(const std::string& scene);

struct IpdEstimate {
  double T_ipd = 0.0;  // mm
  double T_sigma = 0.0;
  double u = 0.0;
  double weight = 0.0;
  bool valid = false;  // fit succeeded, u <= 0.3 and T_ipd in (0, 20]
  ValidationCondition condition;
  std::string participant;
};

/// What a responder sees on one trial.
struct ValidationTrial {
  int index = 0;
  double ipd_mm = 0.0;
  Choice side_with_disparity = Choice::left;
  double effective_disparity_arcmin = 0.0;
  Style style = Style::org;
  const stimulus::ValidationScene* scene = nullptr;  // only when rendering is on
  const GrayImage* foveated_left = nullptr;          // FOV style with rendering
  const GrayImage* foveated_right = nullptr;
};

/// Returns the side the observer reports as carrying disparity.
using Responder = std::function<Choice(const ValidationTrial&)>;

/// Simulated participant: a Weibull observer on the scene's effective
/// disparity. `fov_gain` scales the effective disparity in FOV trials; 1 makes
/// the observer insensitive to the rendering style.
struct ValidationObserver {
  double threshold_arcmin = 1.0;
  double slope = 1.5;
  double lapse = 0.0;
  double fov_gain = 1.0;
  std::uint64_t seed = 0;
};

Responder simulated_responder(const ValidationObserver& o);

struct HarnessConfig {
  staircase::PestConfig pest{.grid_min = 0.1, .grid_max = 20.0};
  display::DisplayModel display{.width_px = 512, .height_px = 512, .ppd = 10.0};
  stimulus::SceneConfig scene;
  model::SurfaceModel model = model::default_paper_model();
  std::vector<double> pyramid_levels = foveation::kDefaultLevels;
  bool render_images = false;
  int n_boot = 100;
};

/// Depth layout of a named scene (independent of IPD and style).
stimulus::SceneGeometry scene_geometry(const std::string& scene, const HarnessConfig& cfg);

/// IPD staircase on one scene and style; threshold extracted with IPD as the
/// abscissa.
IpdEstimate run_validation_session(const ValidationCondition& cond, const Responder& responder,
                                   const HarnessConfig& cfg, std::uint64_t seed,
                                   const std::string& participant = {},
                                   std::vector<staircase::TrialRecord>* log = nullptr);

/// log(T_org / T_fov); positive when the FOV threshold is smaller. Throws
/// DomainError when the estimates are not an ORG/FOV pair of one participant
/// and scene.
double change_rate(const IpdEstimate& org, const IpdEstimate& fov);

struct BoxStats {
  int n = 0;
  double weighted_mean = 0.0;
  double std_error = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  double notch_lo = 0.0;
  double notch_hi = 0.0;
};

/// Quantile by linear interpolation between order statistics
/// (position (n - 1) p).
double quantile(std::vector<double> values, double p);

/// Box-plot statistics; weights feed the weighted mean only. Notch is
/// median +- 1.57 IQR / sqrt(n).
BoxStats box_stats(std::span<const double> values, std::span<const double> weights = {});

bool notches_overlap(const BoxStats& a, const BoxStats& b) noexcept;

struct ConditionStats {
  ValidationCondition condition;
  BoxStats stats;
};

struct ChangeRow {
  std::string participant;
  std::string scene;
  double rate = 0.0;
};

struct SceneComparison {
  std::string scene;
  BoxStats change;           // over participants' change rates
  bool medians_differ = false;  // ORG/FOV notches do not overlap
};

struct ValidationSummary {
  std::vector<ConditionStats> conditions;
  std::vector<ChangeRow> changes;
  std::vector<SceneComparison> scenes;
  double mean_change = 0.0;
  std::vector<std::string> warnings;
};

/// Statistics over valid estimates. Change rates use only participants with
/// valid ORG and FOV measurements of a scene. Conditions with fewer than two
/// valid estimates are omitted with a warning.
ValidationSummary summarize(std::span<const IpdEstimate> estimates);

struct ExperimentConfig {
  int participants = 15;
  std::vector<std::string> scenes = {"forest-like", "kitchen-like"};
  double median_threshold_arcmin = 1.0;
  double threshold_log_sd = 0.3;  // between-participant spread
  double slope = 1.5;
  double lapse = 0.0;
  double fov_gain = 1.0;
  std::uint64_t seed = 1;
};

/// Simulated participants, each measured on every scene in both styles.
std::vector<IpdEstimate> run_validation_experiment(const ExperimentConfig& exp,
                                                   const HarnessConfig& cfg);

std::string results_csv(const ValidationSummary& s);
nlohmann::json report_json(const ValidationSummary& s);

void to_json(nlohmann::json& j, const ValidationCondition& c);
void from_json(const nlohmann::json& j, ValidationCondition& c);

}  // namespace stereofov::validation
