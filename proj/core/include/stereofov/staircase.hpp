#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stereofov/choice.hpp"

namespace stereofov::staircase {

/// One logged 2AFC presentation. `intensity` is the presented disparity in
/// arcmin for ring sessions and the rendering IPD in mm for scene sessions.
struct TrialRecord {
  int index = 0;
  double intensity = 0.0;
  Choice target = Choice::peaks;
  int phase_index = 0;
  Choice response = Choice::peaks;
  bool correct = false;
  std::int64_t timestamp_ms = 0;

  bool operator==(const TrialRecord&) const = default;
};

struct PestConfig {
  double grid_min = 0.05;
  double grid_max = 30.0;
  int n_grid = 64;
  double slope = 1.5;   // assumed Weibull shape k
  double lapse = 0.02;
  int max_trials = 60;
  /// Optional early stop: posterior mass within one grid step of the ML
  /// candidate reaching this value ends the run.
  std::optional<double> early_stop_mass = std::nullopt;

  bool operator==(const PestConfig&) const = default;
};

/// Best PEST state: log-likelihood over log-spaced candidate thresholds.
class PestState {
 public:
  PestState() = default;

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> log_likelihood() const noexcept { return loglik_; }
  int trial_count() const noexcept { return trial_count_; }
  int max_trials() const noexcept { return config_.max_trials; }
  double slope() const noexcept { return config_.slope; }
  double lapse() const noexcept { return config_.lapse; }
  const PestConfig& config() const noexcept { return config_; }

  bool operator==(const PestState&) const = default;

 private:
  friend PestState pest_init(const PestConfig& cfg);
  friend PestState pest_update(PestState s, double presented, bool correct);

  PestConfig config_;
  std::vector<double> grid_;
  std::vector<double> loglik_;
  int trial_count_ = 0;
};

/// Throws DomainError unless 0 < grid_min < grid_max, n_grid >= 16,
/// slope > 0, lapse in [0, 1) and max_trials >= 1.
PestState pest_init(const PestConfig& cfg);
PestState pest_init(double grid_min, double grid_max, int n_grid, double k, double lapse);

/// Maximum-likelihood candidate. Ties go to the smaller intensity, except a
/// completely flat likelihood which returns the middle candidate
/// (index (n - 1) / 2). Throws StateError once the run is done.
double pest_next_intensity(const PestState& s);

/// Same as pest_next_intensity but also valid after the run has stopped.
double pest_ml_estimate(const PestState& s);

/// Adds log P(correct | T_c) or log P(incorrect | T_c) for every candidate.
PestState pest_update(PestState s, double presented, bool correct);

bool pest_is_done(const PestState& s);

/// Rebuilds a state by replaying a log.
PestState pest_replay(const PestConfig& cfg, std::span<const TrialRecord> trials);

enum class Task { corrugation, half_split };

struct TrialLayout {
  Choice target = Choice::peaks;
  int phase_index = 0;
};

/// Uniform draw of the highlight target and phase map (corrugation task) or
/// of the disparity side (half-split task).
TrialLayout draw_trial_layout(std::mt19937_64& rng, Task task);

/// Deterministic layout for trial `index` of a session seeded with `seed`.
TrialLayout trial_layout_for(std::uint64_t seed, int index, Task task);

// Trial log formats. CSV columns, in order:
//   index,intensity,target,phase_index,response,correct,timestamp_ms
inline constexpr const char* kTrialCsvHeader =
    "index,intensity,target,phase_index,response,correct,timestamp_ms";

std::string trial_log_csv(std::span<const TrialRecord> trials);
std::vector<TrialRecord> parse_trial_log_csv(const std::string& text);

void to_json(nlohmann::json& j, const TrialRecord& t);
void from_json(const nlohmann::json& j, TrialRecord& t);
void to_json(nlohmann::json& j, const PestConfig& c);
void from_json(const nlohmann::json& j, PestConfig& c);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace stereofov::staircase
