#include "stereofov/simobserver.hpp"

#include <cmath>

#include "stereofov/errors.hpp"
#include "stereofov/psychometric.hpp"

namespace stereofov::sim {

void ObserverSpec::validate() const {
  if (!(true_threshold > 0.0) || !std::isfinite(true_threshold)) {
    throw DomainError("observer threshold must be positive");
  }
  if (!(slope > 0.0) || !std::isfinite(slope)) throw DomainError("observer slope must be positive");
  if (!(lapse >= 0.0 && lapse <= 0.1)) throw DomainError("observer lapse must lie in [0, 0.1]");
}

ObserverSpec observer_from_model(const model::SurfaceModel& m, Eccentricity theta,
                                 BlurSigma sigma, double slope, double lapse,
                                 std::uint64_t seed) {
  ObserverSpec o;
  o.true_threshold = model::eval_threshold(m, theta, sigma, {.extrapolate = true}).value;
  o.slope = slope;
  o.lapse = lapse;
  o.seed = seed;
  o.validate();
  return o;
}

double probability_correct(const ObserverSpec& o, double presented) {
  const psychofit::WeibullParams wp{psychofit::lambda_for_threshold(o.true_threshold, o.slope),
                                    o.slope};
  return psychofit::with_lapse(psychofit::weibull_eval(wp, presented), o.lapse);
}

Choice observer_respond(const ObserverSpec& o, double presented, Choice correct_answer,
                        std::mt19937_64& rng) {
  if (o.mode == ResponseMode::deterministic) {
    const psychofit::WeibullParams wp{
        psychofit::lambda_for_threshold(o.true_threshold, o.slope), o.slope};
    return psychofit::weibull_eval(wp, presented) > 0.75 ? correct_answer
                                                         : opposite(correct_answer);
  }
  const double p = probability_correct(o, presented);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p ? correct_answer : opposite(correct_answer);
}

SessionResult run_simulated_session(const ObserverSpec& o, Eccentricity theta, BlurSigma sigma,
                                    const SimulationOptions& opts) {
  o.validate();
  SessionResult result;
  std::mt19937_64 rng(o.seed ^ 0xA5A5A5A5DEADBEEFull);
  auto state = staircase::pest_init(opts.pest);
  while (!staircase::pest_is_done(state)) {
    const double x = staircase::pest_next_intensity(state);
    const int index = state.trial_count();
    const auto layout = staircase::trial_layout_for(o.seed, index, opts.task);
    staircase::TrialRecord t;
    t.index = index;
    t.intensity = x;
    t.target = layout.target;
    t.phase_index = layout.phase_index;
    t.response = observer_respond(o, x, layout.target, rng);
    t.correct = t.response == t.target;
    t.timestamp_ms = 0;
    state = staircase::pest_update(std::move(state), x, t.correct);
    result.trials.push_back(t);
  }
  result.ml_estimate = staircase::pest_ml_estimate(state);
  if (!opts.run_fit) return result;
  try {
    result.estimate =
        psychofit::bootstrap_threshold(psychofit::tally(result.trials), opts.bootstrap);
    result.fit_ok = true;
  } catch (const FitError& e) {
    result.fit_error = e.what();
  }
  result.estimate.theta = theta.value;
  result.estimate.sigma = sigma.value;
  return result;
}

}  // namespace stereofov::sim
