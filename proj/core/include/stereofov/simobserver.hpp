#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "stereofov/choice.hpp"
#include "stereofov/model.hpp"
#include "stereofov/psychofit.hpp"
#include "stereofov/staircase.hpp"

namespace stereofov::sim {

enum class ResponseMode {
  stochastic,
  deterministic,  // correct iff F(presented) > 0.75
};

struct ObserverSpec {
  double true_threshold = 1.0;  // 75% point, in intensity units
  double slope = 1.5;           // k of the generating Weibull
  double lapse = 0.0;           // in [0, 0.1]
  std::uint64_t seed = 0;
  ResponseMode mode = ResponseMode::stochastic;

  /// Throws DomainError for threshold <= 0, slope <= 0 or lapse outside [0, 0.1].
  void validate() const;
};

/// Observer whose threshold is the model prediction at (theta, sigma).
ObserverSpec observer_from_model(const model::SurfaceModel& m, Eccentricity theta,
                                 BlurSigma sigma, double slope, double lapse,
                                 std::uint64_t seed);

/// (1 - lapse) F(presented) + lapse / 2.
double probability_correct(const ObserverSpec& o, double presented);

Choice observer_respond(const ObserverSpec& o, double presented, Choice correct_answer,
                        std::mt19937_64& rng);

struct SessionResult {
  std::vector<staircase::TrialRecord> trials;
  psychofit::ThresholdEstimate estimate;  // bootstrap; valid only if fit_ok
  bool fit_ok = false;
  std::string fit_error;
  double ml_estimate = 0.0;               // PEST's final ML threshold
};

struct SimulationOptions {
  staircase::PestConfig pest;
  psychofit::BootstrapOptions bootstrap;
  bool run_fit = true;
  staircase::Task task = staircase::Task::corrugation;
};

/// Runs one staircase session exactly as a human session would be logged.
/// Responses and trial layouts are drawn from o.seed; the bootstrap uses
/// opts.bootstrap.seed.
SessionResult run_simulated_session(const ObserverSpec& o, Eccentricity theta, BlurSigma sigma,
                                    const SimulationOptions& opts);

}  // namespace stereofov::sim
