#include "stereofov/staircase.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/psychometric.hpp"

namespace stereofov::staircase {
namespace {

std::size_t ml_index(const PestState& s) {
  const auto ll = s.log_likelihood();
  const auto hi = std::ranges::max_element(ll);  // first maximum
  if (*std::ranges::min_element(ll) == *hi) return (ll.size() - 1) / 2;
  return static_cast<std::size_t>(hi - ll.begin());
}

double mass_near_ml(const PestState& s) {
  const auto ll = s.log_likelihood();
  const std::size_t best = ml_index(s);
  const double peak = ll[best];
  double total = 0.0;
  double near = 0.0;
  for (std::size_t i = 0; i < ll.size(); ++i) {
    const double w = std::exp(ll[i] - peak);
    total += w;
    if (i + 1 >= best && i <= best + 1) near += w;
  }
  return near / total;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

Choice require_choice(const std::string& s) {
  const auto c = parse_choice(s);
  if (!c) throw DomainError("unknown choice label '" + s + "'");
  return *c;
}

}  // namespace

PestState pest_init(const PestConfig& cfg) {
  if (!(cfg.grid_min > 0.0) || !(cfg.grid_max > cfg.grid_min) || !std::isfinite(cfg.grid_max)) {
    throw DomainError("staircase grid needs 0 < grid_min < grid_max");
  }
  if (cfg.n_grid < 16) throw DomainError("staircase grid needs at least 16 candidates");
  if (!(cfg.slope > 0.0)) throw DomainError("staircase slope must be positive");
  if (!(cfg.lapse >= 0.0 && cfg.lapse < 1.0)) throw DomainError("lapse must lie in [0, 1)");
  if (cfg.max_trials < 1) throw DomainError("max_trials must be at least 1");
  if (cfg.early_stop_mass && !(*cfg.early_stop_mass > 0.0 && *cfg.early_stop_mass <= 1.0)) {
    throw DomainError("early_stop_mass must lie in (0, 1]");
  }
  PestState s;
  s.config_ = cfg;
  s.grid_.resize(static_cast<std::size_t>(cfg.n_grid));
  const double step = std::log(cfg.grid_max / cfg.grid_min) / (cfg.n_grid - 1);
  for (int i = 0; i < cfg.n_grid; ++i) {
    s.grid_[static_cast<std::size_t>(i)] = cfg.grid_min * std::exp(step * i);
  }
  s.grid_.front() = cfg.grid_min;
  s.grid_.back() = cfg.grid_max;
  s.loglik_.assign(s.grid_.size(), 0.0);
  return s;
}

PestState pest_init(double grid_min, double grid_max, int n_grid, double k, double lapse) {
  PestConfig cfg;
  cfg.grid_min = grid_min;
  cfg.grid_max = grid_max;
  cfg.n_grid = n_grid;
  cfg.slope = k;
  cfg.lapse = lapse;
  return pest_init(cfg);
}

double pest_ml_estimate(const PestState& s) {
  if (s.grid().empty()) throw StateError("staircase is not initialized");
  return s.grid()[ml_index(s)];
}

double pest_next_intensity(const PestState& s) {
  if (pest_is_done(s)) throw StateError("staircase run is complete");
  return pest_ml_estimate(s);
}

PestState pest_update(PestState s, double presented, bool correct) {
  if (s.grid_.empty()) throw StateError("staircase is not initialized");
  if (!(presented >= 0.0) || !std::isfinite(presented)) {
    throw DomainError("presented intensity must be finite and >= 0");
  }
  const double k = s.config_.slope;
  const double lapse = s.config_.lapse;
  for (std::size_t i = 0; i < s.grid_.size(); ++i) {
    const psychofit::WeibullParams wp{psychofit::lambda_for_threshold(s.grid_[i], k), k};
    const double p = psychofit::with_lapse(psychofit::weibull_eval(wp, presented), lapse);
    const double q = correct ? p : 1.0 - p;
    s.loglik_[i] += std::log(std::max(q, 1e-300));
  }
  ++s.trial_count_;
  return s;
}

bool pest_is_done(const PestState& s) {
  if (s.trial_count() >= s.max_trials()) return true;
  const auto& stop = s.config().early_stop_mass;
  return stop && s.trial_count() > 0 && mass_near_ml(s) >= *stop;
}

PestState pest_replay(const PestConfig& cfg, std::span<const TrialRecord> trials) {
  PestState s = pest_init(cfg);
  for (const auto& t : trials) s = pest_update(std::move(s), t.intensity, t.correct);
  return s;
}

TrialLayout draw_trial_layout(std::mt19937_64& rng, Task task) {
  std::uniform_int_distribution<int> coin(0, 1);
  TrialLayout layout;
  if (task == Task::half_split) {
    layout.target = coin(rng) ? Choice::right : Choice::left;
    return layout;
  }
  layout.target = coin(rng) ? Choice::troughs : Choice::peaks;
  layout.phase_index = std::uniform_int_distribution<int>(0, 4)(rng);
  return layout;
}

TrialLayout trial_layout_for(std::uint64_t seed, int index, Task task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::mt19937_64 rng(seq);
  return draw_trial_layout(rng, task);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trial_log_csv(std::span<const TrialRecord> trials) {
  std::string out = kTrialCsvHeader;
  out += '\n';
  for (const auto& t : trials) {
    out += std::to_string(t.index);
    out += ',';
    out += format_double(t.intensity);
    out += ',';
    out += to_string(t.target);
    out += ',';
    out += std::to_string(t.phase_index);
    out += ',';
    out += to_string(t.response);
    out += ',';
    out += t.correct ? "1" : "0";
    out += ',';
    out += std::to_string(t.timestamp_ms);
    out += '\n';
  }
  return out;
}

std::vector<TrialRecord> parse_trial_log_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("trial log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrialCsvHeader) throw DomainError("unexpected trial log header: " + line);
  std::vector<TrialRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw DomainError("trial log line " + std::to_string(line_no) + ": expected 7 fields");
    }
    try {
      TrialRecord t;
      t.index = std::stoi(f[0]);
      t.intensity = std::stod(f[1]);
      t.target = require_choice(f[2]);
      t.phase_index = std::stoi(f[3]);
      t.response = require_choice(f[4]);
      if (f[5] != "0" && f[5] != "1") throw DomainError("correct must be 0 or 1");
      t.correct = f[5] == "1";
      if (t.correct != (t.response == t.target)) {
        throw DomainError("correct flag disagrees with response and target");
      }
      t.timestamp_ms = std::stoll(f[6]);
      out.push_back(t);
    } catch (const std::logic_error& e) {
      throw DomainError("trial log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const TrialRecord& t) {
  j = nlohmann::json{{"index", t.index},
                     {"intensity", t.intensity},
                     {"target", std::string(to_string(t.target))},
                     {"phase_index", t.phase_index},
                     {"response", std::string(to_string(t.response))},
                     {"correct", t.correct},
                     {"timestamp_ms", t.timestamp_ms}};
}

void from_json(const nlohmann::json& j, TrialRecord& t) {
  t.index = j.at("index").get<int>();
  t.intensity = j.at("intensity").get<double>();
  t.target = require_choice(j.at("target").get<std::string>());
  t.phase_index = j.value("phase_index", 0);
  t.response = require_choice(j.at("response").get<std::string>());
  t.correct = j.at("correct").get<bool>();
  t.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
}

void to_json(nlohmann::json& j, const PestConfig& c) {
  j = nlohmann::json{{"grid_min", c.grid_min}, {"grid_max", c.grid_max},
                     {"n_grid", c.n_grid},     {"slope", c.slope},
                     {"lapse", c.lapse},       {"max_trials", c.max_trials}};
  if (c.early_stop_mass) j["early_stop_mass"] = *c.early_stop_mass;
}

void from_json(const nlohmann::json& j, PestConfig& c) {
  PestConfig d;
  c.grid_min = j.value("grid_min", d.grid_min);
  c.grid_max = j.value("grid_max", d.grid_max);
  c.n_grid = j.value("n_grid", d.n_grid);
  c.slope = j.value("slope", d.slope);
  c.lapse = j.value("lapse", d.lapse);
  c.max_trials = j.value("max_trials", d.max_trials);
  c.early_stop_mass.reset();
  if (j.contains("early_stop_mass") && !j.at("early_stop_mass").is_null()) {
    c.early_stop_mass = j.at("early_stop_mass").get<double>();
  }
}

}  // namespace stereofov::staircase
