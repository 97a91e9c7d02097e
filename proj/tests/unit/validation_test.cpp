#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/validation.hpp"

namespace val = stereofov::validation;
using stereofov::Choice;
using val::Style;

namespace {

val::IpdEstimate estimate(const std::string& who, const std::string& scene, Style style, double t,
                          bool valid = true) {
  val::IpdEstimate e;
  e.participant = who;
  e.condition = {scene, style};
  e.T_ipd = t;
  e.weight = 1.0;
  e.valid = valid;
  return e;
}

std::vector<val::IpdEstimate> sample_population() {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> t(1.0, 0.4);
  std::vector<val::IpdEstimate> out;
  for (int p = 0; p < 8; ++p) {
    for (const char* scene : {"forest-like", "kitchen-like"}) {
      out.push_back(estimate("P" + std::to_string(p), scene, Style::org, t(rng)));
      out.push_back(estimate("P" + std::to_string(p), scene, Style::fov, t(rng)));
    }
  }
  return out;
}

val::HarnessConfig small_harness() {
  val::HarnessConfig cfg;
  cfg.display = {.width_px = 256, .height_px = 192, .ppd = 6.0};
  cfg.n_boot = 20;
  return cfg;
}

}  // namespace

TEST(ChangeRate, LogRatioAndAntisymmetry) {
  const auto org = estimate("P1", "forest-like", Style::org, 4.0);
  const auto fov = estimate("P1", "forest-like", Style::fov, 2.0);
  EXPECT_DOUBLE_EQ(val::change_rate(org, fov), std::log(2.0));
  const auto org2 = estimate("P1", "forest-like", Style::org, 2.0);
  const auto fov2 = estimate("P1", "forest-like", Style::fov, 4.0);
  EXPECT_DOUBLE_EQ(val::change_rate(org2, fov2), -val::change_rate(org, fov));
}

TEST(ChangeRate, RejectsMismatchedPairs) {
  const auto org = estimate("P1", "forest-like", Style::org, 4.0);
  EXPECT_THROW(val::change_rate(org, estimate("P2", "forest-like", Style::fov, 2)),
               stereofov::DomainError);
  EXPECT_THROW(val::change_rate(org, estimate("P1", "kitchen-like", Style::fov, 2)),
               stereofov::DomainError);
  EXPECT_THROW(val::change_rate(org, estimate("P1", "forest-like", Style::org, 2)),
               stereofov::DomainError);
  EXPECT_THROW(val::change_rate(org, estimate("P1", "forest-like", Style::fov, 0)),
               stereofov::DomainError);
}

TEST(Stats, Quantile) {
  EXPECT_DOUBLE_EQ(val::quantile({3, 1, 2}, 0.25), 1.5);
  EXPECT_DOUBLE_EQ(val::quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(val::quantile({3, 1, 2}, 0.75), 2.5);
  EXPECT_DOUBLE_EQ(val::quantile({7}, 0.9), 7.0);
  EXPECT_THROW(val::quantile({}, 0.5), stereofov::DomainError);
  EXPECT_THROW(val::quantile({1, 2}, 1.5), stereofov::DomainError);
}

TEST(Stats, BoxStatsOracle) {
  const std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8, 100};
  const auto b = val::box_stats(v);
  EXPECT_EQ(b.n, 9);
  EXPECT_DOUBLE_EQ(b.median, 5);
  EXPECT_DOUBLE_EQ(b.q1, 3);
  EXPECT_DOUBLE_EQ(b.q3, 7);
  EXPECT_DOUBLE_EQ(b.whisker_lo, 1);
  EXPECT_DOUBLE_EQ(b.whisker_hi, 8);
  EXPECT_DOUBLE_EQ(b.notch_hi - b.median, 1.57 * 4 / 3);
  EXPECT_DOUBLE_EQ(b.weighted_mean, 136.0 / 9);
  double ss = 0;
  for (double x : v) ss += (x - 136.0 / 9) * (x - 136.0 / 9);
  EXPECT_NEAR(b.std_error, std::sqrt(ss / 8) / 3, 1e-12);
}

TEST(Stats, WeightsOnlyMoveTheMean) {
  const std::vector<double> v = {1, 2, 3};
  const std::vector<double> w = {1, 1, 2};
  const auto b = val::box_stats(v, w);
  EXPECT_DOUBLE_EQ(b.weighted_mean, 9.0 / 4);
  EXPECT_DOUBLE_EQ(b.median, 2);
  EXPECT_THROW(val::box_stats(v, std::vector<double>{1, 1}), stereofov::DomainError);
  EXPECT_THROW(val::box_stats({}), stereofov::DomainError);
}

TEST(Stats, EqualValuesGiveZeroWidthNotch) {
  const std::vector<double> v(5, 2.5);
  const auto b = val::box_stats(v);
  EXPECT_EQ(b.notch_lo, 2.5);
  EXPECT_EQ(b.notch_hi, 2.5);
  EXPECT_EQ(b.std_error, 0.0);
}

TEST(Stats, NotchOverlap) {
  val::BoxStats a, b;
  a.notch_lo = 0;
  a.notch_hi = 1;
  b.notch_lo = 1;
  b.notch_hi = 2;
  EXPECT_TRUE(val::notches_overlap(a, b));
  b.notch_lo = 1.01;
  EXPECT_FALSE(val::notches_overlap(a, b));
  EXPECT_FALSE(val::notches_overlap(b, a));
}

TEST(Summary, PairsParticipantsAndScenes) {
  const auto s = val::summarize(sample_population());
  EXPECT_EQ(s.conditions.size(), 4u);
  EXPECT_EQ(s.changes.size(), 16u);
  ASSERT_EQ(s.scenes.size(), 2u);
  double total = 0;
  for (const auto& c : s.changes) total += c.rate;
  EXPECT_NEAR(s.mean_change, total / 16, 1e-15);
  EXPECT_TRUE(s.warnings.empty());
}

TEST(Summary, IndependentOfInputOrder) {
  auto est = sample_population();
  const auto a = val::summarize(est);
  std::mt19937_64 rng(9);
  std::shuffle(est.begin(), est.end(), rng);
  const auto b = val::summarize(est);
  EXPECT_EQ(val::report_json(a).dump(), val::report_json(b).dump());
  EXPECT_EQ(val::results_csv(a), val::results_csv(b));
}

TEST(Summary, ChangeRatesIgnoreCommonScale) {
  auto est = sample_population();
  const auto a = val::summarize(est);
  for (auto& e : est) e.T_ipd *= 3.7;
  const auto b = val::summarize(est);
  ASSERT_EQ(a.changes.size(), b.changes.size());
  for (std::size_t i = 0; i < a.changes.size(); ++i) {
    EXPECT_NEAR(a.changes[i].rate, b.changes[i].rate, 1e-12);
  }
  EXPECT_NEAR(a.mean_change, b.mean_change, 1e-12);
}

TEST(Summary, InvalidEstimatesAreDropped) {
  std::vector<val::IpdEstimate> est = {
      estimate("P1", "forest-like", Style::org, 2),
      estimate("P1", "forest-like", Style::fov, 1),
      estimate("P2", "forest-like", Style::org, 3),
      estimate("P2", "forest-like", Style::fov, 1, false),
  };
  const auto s = val::summarize(est);
  ASSERT_EQ(s.changes.size(), 1u);
  EXPECT_EQ(s.changes[0].participant, "P1");
  EXPECT_EQ(s.conditions.size(), 1u);  // FOV has one valid estimate
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("FOV"), std::string::npos);
}

TEST(Summary, ReportFormats) {
  const auto s = val::summarize(sample_population());
  const std::string csv = val::results_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "kind,scene,style,participant,value,n,weighted_mean,std_error,median,q1,q3,"
            "whisker_lo,whisker_hi,notch_lo,notch_hi");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 + 2 + 16);
  const auto j = val::report_json(s);
  EXPECT_EQ(j.at("conditions").size(), 4u);
  EXPECT_EQ(j.at("changes").size(), 16u);
  EXPECT_DOUBLE_EQ(j.at("mean_change").get<double>(), s.mean_change);
}

TEST(Scenes, Identifiers) {
  EXPECT_NO_THROW(val::validate_scene_id("forest-like"));
  EXPECT_NO_THROW(val::validate_scene_id("kitchen-like"));
  EXPECT_NO_THROW(val::validate_scene_id("procedural-42"));
  EXPECT_THROW(val::validate_scene_id("procedural-"), stereofov::DomainError);
  EXPECT_THROW(val::validate_scene_id("procedural-4x"), stereofov::DomainError);
  EXPECT_THROW(val::validate_scene_id("beach"), stereofov::DomainError);
  val::ValidationCondition c;
  nlohmann::json j = val::ValidationCondition{"kitchen-like", Style::fov};
  EXPECT_EQ(j.get<val::ValidationCondition>(), (val::ValidationCondition{"kitchen-like", Style::fov}));
  EXPECT_THROW((nlohmann::json{{"scene", "forest-like"}, {"style", "BLUR"}}.get<val::ValidationCondition>()),
               stereofov::DomainError);
}

TEST(Responder, ChanceAtZeroDisparity) {
  auto r = val::simulated_responder({.threshold_arcmin = 1.0, .seed = 4});
  val::ValidationTrial t;
  const int n = 10000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    t.side_with_disparity = i % 2 ? Choice::left : Choice::right;
    hits += r(t) == t.side_with_disparity;
  }
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.5, 3 * 0.5 / std::sqrt(n));
}

TEST(Responder, GainActsOnFovTrials) {
  auto r = val::simulated_responder({.threshold_arcmin = 1.0, .fov_gain = 4.0, .seed = 5});
  val::ValidationTrial t;
  t.effective_disparity_arcmin = 1.0;
  const int n = 10000;
  int org = 0, fov = 0;
  for (int i = 0; i < n; ++i) {
    t.style = Style::org;
    org += r(t) == t.side_with_disparity;
    t.style = Style::fov;
    fov += r(t) == t.side_with_disparity;
  }
  const double se = 3 * std::sqrt(0.25 / n);
  EXPECT_NEAR(static_cast<double>(org) / n, 0.75, se);
  EXPECT_NEAR(static_cast<double>(fov) / n, 1 - 0.5 * std::exp(-std::pow(4.0, 1.5)), se);
  EXPECT_THROW(val::simulated_responder({.threshold_arcmin = 0}), stereofov::DomainError);
  EXPECT_THROW(val::simulated_responder({.lapse = 0.5}), stereofov::DomainError);
}

TEST(ValidationSession, SidesBalanceAndLogMatches) {
  const auto cfg = small_harness();
  int left = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<stereofov::staircase::TrialRecord> log;
    val::run_validation_session({"forest-like", Style::org},
                                val::simulated_responder({.seed = seed}), cfg, seed, "P", &log);
    ASSERT_EQ(log.size(), 60u);
    for (const auto& t : log) {
      EXPECT_TRUE(t.target == Choice::left || t.target == Choice::right);
      EXPECT_EQ(t.correct, t.response == t.target);
      left += t.target == Choice::left;
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(left) / total, 0.5, 3 * 0.5 / std::sqrt(total));
}

TEST(ValidationSession, ResponderSeesSceneDisparity) {
  const auto cfg = small_harness();
  const auto geometry = val::scene_geometry("kitchen-like", cfg);
  std::vector<double> seen;
  auto responder = [&](const val::ValidationTrial& t) {
    const double want = stereofov::stimulus::effective_disparity_arcmin(
        geometry, t.ipd_mm, t.side_with_disparity, cfg.display);
    EXPECT_DOUBLE_EQ(t.effective_disparity_arcmin, want);
    EXPECT_EQ(t.scene, nullptr);
    seen.push_back(t.ipd_mm);
    return t.side_with_disparity;
  };
  const auto e = val::run_validation_session({"kitchen-like", Style::fov}, responder, cfg, 11);
  EXPECT_EQ(seen.size(), 60u);
  EXPECT_EQ(e.condition.style, Style::fov);
}

TEST(ValidationSession, DeterministicUnderSeed) {
  const auto cfg = small_harness();
  const auto a = val::run_validation_session({"forest-like", Style::org},
                                             val::simulated_responder({.seed = 3}), cfg, 7);
  const auto b = val::run_validation_session({"forest-like", Style::org},
                                             val::simulated_responder({.seed = 3}), cfg, 7);
  EXPECT_EQ(a.T_ipd, b.T_ipd);
  EXPECT_EQ(a.T_sigma, b.T_sigma);
  EXPECT_EQ(a.valid, b.valid);
}

TEST(ValidationSession, RendersFoveatedPairsForFov) {
  auto cfg = small_harness();
  cfg.render_images = true;
  cfg.pest.max_trials = 2;
  for (Style style : {Style::org, Style::fov}) {
    int calls = 0;
    auto responder = [&](const val::ValidationTrial& t) {
      ++calls;
      EXPECT_NE(t.scene, nullptr);
      EXPECT_EQ(t.foveated_left != nullptr, style == Style::fov);
      EXPECT_EQ(t.foveated_right != nullptr, style == Style::fov);
      if (t.scene) EXPECT_EQ(t.scene->ipd_mm, t.ipd_mm);
      return Choice::left;
    };
    val::run_validation_session({"procedural-5", style}, responder, cfg, 1);
    EXPECT_EQ(calls, 2);
  }
}

TEST(Experiment, StyleBlindObserversShowNoSystematicChange) {
  const auto cfg = small_harness();
  val::ExperimentConfig exp;
  exp.participants = 40;
  exp.scenes = {"forest-like"};
  const auto est = val::run_validation_experiment(exp, cfg);
  ASSERT_EQ(est.size(), 80u);
  const auto s = val::summarize(est);
  EXPECT_GE(s.changes.size(), 25u);
  EXPECT_LT(std::abs(s.mean_change), 0.2);
}

TEST(Experiment, FovGainLowersFovThresholds) {
  const auto cfg = small_harness();
  val::ExperimentConfig exp;
  exp.participants = 40;
  exp.scenes = {"forest-like"};
  exp.fov_gain = 2.0;
  const auto s = val::summarize(val::run_validation_experiment(exp, cfg));
  EXPECT_NEAR(s.mean_change, std::log(2.0), 0.2);
}

TEST(Experiment, RejectsBadConfig) {
  val::ExperimentConfig exp;
  exp.participants = 0;
  EXPECT_THROW(val::run_validation_experiment(exp, small_harness()), stereofov::DomainError);
  exp.participants = 1;
  exp.scenes = {"moon"};
  EXPECT_THROW(val::run_validation_experiment(exp, small_harness()), stereofov::DomainError);
}
