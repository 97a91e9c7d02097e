#include "stereofov/validation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/psychometric.hpp"

namespace stereofov::validation {
namespace {

constexpr double kMaxIpd = 20.0;
constexpr char kProceduralPrefix[] = "procedural-";

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::optional<std::uint64_t> procedural_seed(const std::string& scene) {
  const std::string_view prefix = kProceduralPrefix;
  if (!scene.starts_with(prefix) || scene.size() == prefix.size()) return std::nullopt;
  std::uint64_t seed = 0;
  const char* first = scene.data() + prefix.size();
  const char* last = scene.data() + scene.size();
  const auto res = std::from_chars(first, last, seed);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return seed;
}

std::string fmt(double v) { return staircase::format_double(v); }

void box_json(nlohmann::json& j, const BoxStats& b) {
  j = nlohmann::json{{"n", b.n},
                     {"weighted_mean", b.weighted_mean},
                     {"std_error", b.std_error},
                     {"median", b.median},
                     {"q1", b.q1},
                     {"q3", b.q3},
                     {"whisker_lo", b.whisker_lo},
                     {"whisker_hi", b.whisker_hi},
                     {"notch_lo", b.notch_lo},
                     {"notch_hi", b.notch_hi}};
}

std::string box_csv(const BoxStats& b) {
  return std::to_string(b.n) + ',' + fmt(b.weighted_mean) + ',' + fmt(b.std_error) + ',' +
         fmt(b.median) + ',' + fmt(b.q1) + ',' + fmt(b.q3) + ',' + fmt(b.whisker_lo) + ',' +
         fmt(b.whisker_hi) + ',' + fmt(b.notch_lo) + ',' + fmt(b.notch_hi);
}

}  // namespace

std::string_view to_string(Style s) noexcept { return s == Style::org ? "ORG" : "FOV"; }

std::optional<Style> parse_style(std::string_view s) noexcept {
  if (s == "ORG" || s == "org") return Style::org;
  if (s == "FOV" || s == "fov") return Style::fov;
  return std::nullopt;
}

void validate_scene_id(const std::string& scene) {
  if (scene == "forest-like" || scene == "kitchen-like" || procedural_seed(scene)) return;
  throw DomainError("unknown scene '" + scene +
                    "' (expected forest-like, kitchen-like or procedural-<seed>)");
}

stimulus::SceneGeometry scene_geometry(const std::string& scene, const HarnessConfig& cfg) {
  validate_scene_id(scene);
  stimulus::SceneConfig sc = cfg.scene;
  std::uint64_t seed = 0;
  if (scene == "forest-like") {
    sc.near_m = 1.0;
    sc.far_m = 10.0;
    sc.objects = 80;
    seed = 1;
  } else if (scene == "kitchen-like") {
    sc.near_m = 0.4;
    sc.far_m = 2.5;
    sc.objects = 40;
    seed = 2;
  } else {
    seed = *procedural_seed(scene);
  }
  return stimulus::make_scene_geometry(seed, cfg.display, sc);
}

Responder simulated_responder(const ValidationObserver& o) {
  if (!(o.threshold_arcmin > 0.0)) throw DomainError("observer threshold must be positive");
  if (!(o.slope > 0.0)) throw DomainError("observer slope must be positive");
  if (!(o.lapse >= 0.0 && o.lapse <= 0.1)) throw DomainError("observer lapse must lie in [0, 0.1]");
  auto rng = std::make_shared<std::mt19937_64>(o.seed);
  return [o, rng](const ValidationTrial& t) {
    const double gain = t.style == Style::fov ? o.fov_gain : 1.0;
    const psychofit::WeibullParams wp{psychofit::lambda_for_threshold(o.threshold_arcmin, o.slope),
                                      o.slope};
    const double p = psychofit::with_lapse(
        psychofit::weibull_eval(wp, gain * t.effective_disparity_arcmin), o.lapse);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(*rng) < p ? t.side_with_disparity : opposite(t.side_with_disparity);
  };
}

IpdEstimate run_validation_session(const ValidationCondition& cond, const Responder& responder,
                                   const HarnessConfig& cfg, std::uint64_t seed,
                                   const std::string& participant,
                                   std::vector<staircase::TrialRecord>* log) {
  if (!responder) throw DomainError("validation session needs a responder");
  const stimulus::SceneGeometry geometry = scene_geometry(cond.scene, cfg);

  std::optional<foveation::BudgetCurve> budget;
  if (cfg.render_images && cond.style == Style::fov) {
    budget = foveation::BudgetCurve::from_model(cfg.model);
  }

  const stimulus::DepthHistogram left_depths =
      stimulus::visible_depth_histogram(geometry, Choice::left, cfg.display);
  const stimulus::DepthHistogram right_depths =
      stimulus::visible_depth_histogram(geometry, Choice::right, cfg.display);

  std::vector<staircase::TrialRecord> trials;
  auto state = staircase::pest_init(cfg.pest);
  while (!staircase::pest_is_done(state)) {
    const double ipd = staircase::pest_next_intensity(state);
    const int index = state.trial_count();
    const auto layout = staircase::trial_layout_for(seed, index, staircase::Task::half_split);

    ValidationTrial trial;
    trial.index = index;
    trial.ipd_mm = ipd;
    trial.side_with_disparity = layout.target;
    trial.style = cond.style;
    trial.effective_disparity_arcmin = stimulus::effective_disparity_arcmin(
        layout.target == Choice::left ? left_depths : right_depths, ipd);

    std::optional<stimulus::ValidationScene> scene;
    GrayImage fov_left, fov_right;
    if (cfg.render_images) {
      scene = stimulus::make_validation_scene(geometry, ipd, layout.target, cfg.display);
      trial.scene = &*scene;
      if (budget) {
        fov_left = foveation::foveate(
            foveation::build_pyramid(scene->stimulus.left, cfg.pyramid_levels, cfg.display),
            geometry.gaze, *budget, cfg.display);
        fov_right = foveation::foveate(
            foveation::build_pyramid(scene->stimulus.right, cfg.pyramid_levels, cfg.display),
            geometry.gaze, *budget, cfg.display);
        trial.foveated_left = &fov_left;
        trial.foveated_right = &fov_right;
      }
    }

    staircase::TrialRecord rec;
    rec.index = index;
    rec.intensity = ipd;
    rec.target = layout.target;
    rec.phase_index = 0;
    rec.response = responder(trial);
    rec.correct = rec.response == rec.target;
    state = staircase::pest_update(std::move(state), ipd, rec.correct);
    trials.push_back(rec);
  }
  if (log) *log = trials;

  IpdEstimate est;
  est.condition = cond;
  est.participant = participant;
  try {
    const auto e = psychofit::bootstrap_threshold(psychofit::tally(trials),
                                                  {.n_boot = cfg.n_boot, .seed = mix(seed, 7)});
    est.T_ipd = e.T;
    est.T_sigma = e.T_sigma;
    est.u = e.u;
    est.weight = e.weight;
    est.valid = !e.outlier && e.T > 0.0 && e.T <= kMaxIpd;
  } catch (const FitError&) {
    est.valid = false;
  }
  return est;
}

double change_rate(const IpdEstimate& org, const IpdEstimate& fov) {
  if (org.participant != fov.participant || org.condition.scene != fov.condition.scene) {
    throw DomainError("change rate needs two estimates of one participant and scene");
  }
  if (org.condition.style == fov.condition.style) {
    throw DomainError("change rate needs one estimate per rendering style");
  }
  if (!(org.T_ipd > 0.0) || !(fov.T_ipd > 0.0)) {
    throw DomainError("change rate needs positive thresholds");
  }
  return std::log(org.T_ipd / fov.T_ipd);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::ranges::sort(values);
  const double h = (values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

BoxStats box_stats(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw DomainError("box statistics of an empty sample");
  if (!weights.empty() && weights.size() != values.size()) {
    throw DomainError("weights and values differ in length");
  }
  const std::vector<double> v(values.begin(), values.end());
  BoxStats b;
  b.n = static_cast<int>(v.size());
  double wsum = 0.0, wx = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    wsum += w;
    wx += w * v[i];
  }
  b.weighted_mean = wx / wsum;
  if (v.size() > 1) {
    double wss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      wss += w * (v[i] - b.weighted_mean) * (v[i] - b.weighted_mean);
    }
    const double n = static_cast<double>(v.size());
    b.std_error = std::sqrt(wss / wsum * n / (n - 1.0)) / std::sqrt(n);
  }
  b.median = quantile(v, 0.5);
  b.q1 = quantile(v, 0.25);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  const double fence_lo = b.q1 - 1.5 * iqr;
  const double fence_hi = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.q1;
  b.whisker_hi = b.q3;
  for (double x : v) {
    if (x >= fence_lo) b.whisker_lo = std::min(b.whisker_lo, x);
    if (x <= fence_hi) b.whisker_hi = std::max(b.whisker_hi, x);
  }
  const double half = 1.57 * iqr / std::sqrt(static_cast<double>(v.size()));
  b.notch_lo = b.median - half;
  b.notch_hi = b.median + half;
  return b;
}

bool notches_overlap(const BoxStats& a, const BoxStats& b) noexcept {
  return a.notch_lo <= b.notch_hi && b.notch_lo <= a.notch_hi;
}

ValidationSummary summarize(std::span<const IpdEstimate> estimates) {
  ValidationSummary s;
  auto key = [](const ValidationCondition& c) {
    return std::make_pair(c.scene, static_cast<int>(c.style));
  };
  std::map<std::pair<std::string, int>, std::vector<const IpdEstimate*>> groups;
  std::map<std::pair<std::string, int>, ValidationCondition> seen;
  for (const auto& e : estimates) {
    seen[key(e.condition)] = e.condition;
    if (e.valid) groups[key(e.condition)].push_back(&e);
  }
  std::map<std::pair<std::string, int>, BoxStats> by_condition;
  for (const auto& [k, cond] : seen) {
    const auto it = groups.find(k);
    const std::size_t n = it == groups.end() ? 0 : it->second.size();
    if (n < 2) {
      s.warnings.push_back("condition " + cond.scene + "/" + std::string(to_string(cond.style)) +
                           " has " + std::to_string(n) + " valid estimate(s); omitted");
      continue;
    }
    auto members = it->second;
    std::ranges::sort(members, [](const IpdEstimate* a, const IpdEstimate* b) {
      return std::tie(a->participant, a->T_ipd, a->weight) <
             std::tie(b->participant, b->T_ipd, b->weight);
    });
    std::vector<double> values, weights;
    for (const auto* e : members) {
      values.push_back(e->T_ipd);
      weights.push_back(e->weight);
    }
    const BoxStats b = box_stats(values, weights);
    by_condition[k] = b;
    s.conditions.push_back({cond, b});
  }

  // Participant/scene pairs with both styles valid, in sorted order so the
  // result does not depend on input order.
  std::map<std::pair<std::string, std::string>, std::pair<const IpdEstimate*, const IpdEstimate*>>
      pairs;
  for (const auto& e : estimates) {
    if (!e.valid) continue;
    auto& slot = pairs[{e.condition.scene, e.participant}];
    (e.condition.style == Style::org ? slot.first : slot.second) = &e;
  }
  std::map<std::string, std::vector<double>> per_scene;
  double total = 0.0;
  for (const auto& [k, p] : pairs) {
    if (!p.first || !p.second) continue;
    const double rate = change_rate(*p.first, *p.second);
    s.changes.push_back({k.second, k.first, rate});
    per_scene[k.first].push_back(rate);
    total += rate;
  }
  s.mean_change = s.changes.empty() ? 0.0 : total / static_cast<double>(s.changes.size());
  if (s.changes.empty()) s.warnings.push_back("no participant has valid ORG and FOV estimates");

  for (const auto& [scene, rates] : per_scene) {
    SceneComparison c;
    c.scene = scene;
    c.change = box_stats(rates);
    const auto org = by_condition.find({scene, static_cast<int>(Style::org)});
    const auto fov = by_condition.find({scene, static_cast<int>(Style::fov)});
    if (org != by_condition.end() && fov != by_condition.end()) {
      c.medians_differ = !notches_overlap(org->second, fov->second);
    }
    s.scenes.push_back(c);
  }
  return s;
}

std::vector<IpdEstimate> run_validation_experiment(const ExperimentConfig& exp,
                                                   const HarnessConfig& cfg) {
  if (exp.participants < 1) throw DomainError("experiment needs at least one participant");
  for (const auto& scene : exp.scenes) validate_scene_id(scene);
  std::mt19937_64 population(exp.seed);
  std::normal_distribution<double> spread(0.0, exp.threshold_log_sd);
  std::vector<IpdEstimate> out;
  for (int p = 0; p < exp.participants; ++p) {
    const double threshold = exp.median_threshold_arcmin * std::exp(spread(population));
    std::ostringstream id;
    id << 'P' << (p + 1 < 10 ? "0" : "") << p + 1;
    for (std::size_t s = 0; s < exp.scenes.size(); ++s) {
      for (Style style : {Style::org, Style::fov}) {
        const std::uint64_t session_seed =
            mix(mix(mix(exp.seed, static_cast<std::uint64_t>(p)), s), static_cast<int>(style));
        ValidationObserver o;
        o.threshold_arcmin = threshold;
        o.slope = exp.slope;
        o.lapse = exp.lapse;
        o.fov_gain = exp.fov_gain;
        o.seed = mix(session_seed, 1);
        out.push_back(run_validation_session({exp.scenes[s], style}, simulated_responder(o), cfg,
                                             session_seed, id.str()));
      }
    }
  }
  return out;
}

std::string results_csv(const ValidationSummary& s) {
  std::string out =
      "kind,scene,style,participant,value,n,weighted_mean,std_error,median,q1,q3,whisker_lo,"
      "whisker_hi,notch_lo,notch_hi\n";
  for (const auto& c : s.conditions) {
    out += "condition," + c.condition.scene + ',' + std::string(to_string(c.condition.style)) +
           ",,," + box_csv(c.stats) + '\n';
  }
  for (const auto& c : s.scenes) {
    out += "scene_change," + c.scene + ",,,," + box_csv(c.change) + '\n';
  }
  for (const auto& r : s.changes) {
    out += "change," + r.scene + ",," + r.participant + ',' + fmt(r.rate) + ",,,,,,,,,,\n";
  }
  return out;
}

nlohmann::json report_json(const ValidationSummary& s) {
  nlohmann::json j;
  j["conditions"] = nlohmann::json::array();
  for (const auto& c : s.conditions) {
    nlohmann::json stats;
    box_json(stats, c.stats);
    j["conditions"].push_back({{"condition", c.condition}, {"stats", stats}});
  }
  j["changes"] = nlohmann::json::array();
  for (const auto& r : s.changes) {
    j["changes"].push_back({{"participant", r.participant}, {"scene", r.scene}, {"rate", r.rate}});
  }
  j["scenes"] = nlohmann::json::array();
  for (const auto& c : s.scenes) {
    nlohmann::json stats;
    box_json(stats, c.change);
    j["scenes"].push_back(
        {{"scene", c.scene}, {"change", stats}, {"medians_differ", c.medians_differ}});
  }
  j["mean_change"] = s.mean_change;
  j["warnings"] = s.warnings;
  return j;
}

void to_json(nlohmann::json& j, const ValidationCondition& c) {
  j = nlohmann::json{{"scene", c.scene}, {"style", std::string(to_string(c.style))}};
}

void from_json(const nlohmann::json& j, ValidationCondition& c) {
  c.scene = j.at("scene").get<std::string>();
  const auto style = parse_style(j.at("style").get<std::string>());
  if (!style) throw DomainError("style must be ORG or FOV");
  c.style = *style;
  validate_scene_id(c.scene);
}

}  // namespace stereofov::validation
