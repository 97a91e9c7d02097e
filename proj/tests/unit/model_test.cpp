#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/model.hpp"
#include "temp_dir.hpp"

namespace sm = stereofov::model;
using stereofov::BlurSigma;
using stereofov::Eccentricity;

namespace {

// Hand-written surface, independent of the library's ExpCurve.
double oracle_threshold(double theta, double sigma) {
  const double p1 = 2.07e-11 * std::exp(0.87 * theta) + 0.003;
  const double p2 = 8.85 * std::exp(0.04 * theta) - 7.5;
  const double p3 = 0.04 * std::exp(0.15 * theta) + 0.12;
  return p1 * (sigma - p2) * (sigma - p2) + p3;
}

double oracle_p2(double theta) { return 8.85 * std::exp(0.04 * theta) - 7.5; }

}  // namespace

TEST(DefaultModel, HasPrintedCoefficients) {
  const auto m = sm::default_paper_model();
  EXPECT_EQ(m.p1, (sm::ExpCurve{2.07e-11, 0.87, 0.003}));
  EXPECT_EQ(m.p2, (sm::ExpCurve{8.85, 0.04, -7.5}));
  EXPECT_EQ(m.p3, (sm::ExpCurve{0.04, 0.15, 0.12}));
  EXPECT_EQ(m.p1_constant, 0.0034);
  EXPECT_EQ(m.theta_range, (sm::Interval{0.0, 20.0}));
  EXPECT_EQ(m.sigma_range, (sm::Interval{0.0, 15.0}));
}

TEST(EvalThreshold, MatchesHandArithmeticOnGrid) {
  const auto m = sm::default_paper_model();
  for (int i = 0; i <= 4; ++i) {
    for (int j = 0; j <= 4; ++j) {
      const double theta = 5.0 * i;
      const double sigma = 3.75 * j;
      EXPECT_NEAR(sm::eval_threshold(m, Eccentricity{theta}, BlurSigma{sigma}).value,
                  oracle_threshold(theta, sigma), 1e-9)
          << theta << " " << sigma;
    }
  }
}

TEST(EvalThreshold, VertexValues) {
  const auto m = sm::default_paper_model();
  EXPECT_NEAR(sm::eval_threshold(m, Eccentricity{0}, BlurSigma{1.35}).value, 0.16, 1e-12);
  EXPECT_NEAR(sm::eval_threshold(m, Eccentricity{0}, BlurSigma{0}).value, 0.16547, 1e-5);
  const double p2_20 = oracle_p2(20.0);
  EXPECT_NEAR(sm::eval_threshold(m, Eccentricity{20}, BlurSigma{p2_20}, {.extrapolate = true})
                  .value,
              0.04 * std::exp(3.0) + 0.12, 1e-12);
}

TEST(EvalThreshold, ParabolaMinimumAtP2) {
  const auto m = sm::default_paper_model();
  for (double theta : {0.0, 4.0, 10.0, 17.0}) {
    const double p2 = oracle_p2(theta);
    const double at = sm::eval_threshold(m, Eccentricity{theta}, BlurSigma{p2}).value;
    for (double d : {-0.5, 0.5}) {
      const double s = p2 + d;
      if (s < 0 || s > 15) continue;
      EXPECT_GT(sm::eval_threshold(m, Eccentricity{theta}, BlurSigma{s}).value, at);
    }
  }
}

TEST(EvalThreshold, ConstantModeDifference) {
  const auto m = sm::default_paper_model();
  for (double theta : {0.0, 10.0, 20.0}) {
    for (double sigma : {0.0, 5.0, 12.0}) {
      const double printed = sm::eval_threshold(m, Eccentricity{theta}, BlurSigma{sigma}).value;
      const double constant =
          sm::eval_threshold(m, Eccentricity{theta}, BlurSigma{sigma},
                             {.p1_mode = sm::P1Mode::constant})
              .value;
      const double p1 = 2.07e-11 * std::exp(0.87 * theta) + 0.003;
      const double off = sigma - oracle_p2(theta);
      EXPECT_NEAR(printed - constant, (p1 - 0.0034) * off * off, 1e-12);
    }
  }
}

TEST(EvalThreshold, OutOfRangeNeedsExtrapolation) {
  const auto m = sm::default_paper_model();
  EXPECT_THROW(sm::eval_threshold(m, Eccentricity{21}, BlurSigma{0}), stereofov::RangeError);
  EXPECT_THROW(sm::eval_threshold(m, Eccentricity{0}, BlurSigma{26.6}), stereofov::RangeError);
  EXPECT_NO_THROW(sm::eval_threshold(m, Eccentricity{20}, BlurSigma{26.6}, {.extrapolate = true}));
  EXPECT_THROW(sm::eval_threshold(m, Eccentricity{-1}, BlurSigma{0}, {.extrapolate = true}),
               stereofov::DomainError);
  EXPECT_THROW(sm::eval_threshold(m, Eccentricity{std::numeric_limits<double>::quiet_NaN()},
                                  BlurSigma{0}),
               stereofov::DomainError);
}

TEST(OptimalBlur, CoefficientValues) {
  const auto m = sm::default_paper_model();
  EXPECT_NEAR(sm::optimal_blur(m, Eccentricity{0}).value, 1.35, 1e-12);
  EXPECT_NEAR(sm::optimal_blur(m, Eccentricity{10}).value, 5.70, 0.005);
  EXPECT_NEAR(sm::optimal_blur(m, Eccentricity{20}).value, 12.20, 0.005);
  EXPECT_THROW(sm::optimal_blur(m, Eccentricity{25}), stereofov::RangeError);
}

TEST(OptimalBlur, ClampsNegativeVertexToZero) {
  auto m = sm::default_paper_model();
  m.p2 = {1.0, 0.0, -3.0};
  EXPECT_EQ(sm::optimal_blur(m, Eccentricity{5}).value, 0.0);
}

TEST(OptimalBlur, IncreasingInEccentricity) {
  const auto m = sm::default_paper_model();
  double prev = -1.0;
  for (double t = 0; t <= 20.0; t += 0.5) {
    const double v = sm::optimal_blur(m, Eccentricity{t}).value;
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(SigmaFromCutoff, Values) {
  EXPECT_NEAR(sm::sigma_from_cutoff(4.1).value, 6.99, 0.01);
  EXPECT_NEAR(sm::sigma_from_cutoff(3.0 / (2.0 * M_PI)).value, 60.0, 1e-12);
  for (double f : {0.1, 1.0, 4.1, 17.0, 300.0}) {
    EXPECT_NEAR(sm::sigma_from_cutoff(f).value * f, 90.0 / M_PI, 1e-12);
  }
  EXPECT_LT(sm::sigma_from_cutoff(1e9).value, 1e-7);
  EXPECT_THROW(sm::sigma_from_cutoff(0.0), stereofov::DomainError);
  EXPECT_THROW(sm::sigma_from_cutoff(-2.0), stereofov::DomainError);
}

TEST(BudgetMap, GazeAndClampedPeriphery) {
  const auto m = sm::default_paper_model();
  stereofov::display::DisplayModel d{.width_px = 1301, .height_px = 21, .ppd = 30.0};
  const stereofov::Pixel gaze{50, 10};
  const auto map = sm::blur_budget_map(m, d, gaze);
  EXPECT_NEAR(map.at(50, 10), 1.35, 1e-12);
  EXPECT_NEAR(map.at(50 + 300, 10), oracle_p2(10.0), 1e-12);
  EXPECT_NEAR(map.at(50 + 1200, 10), oracle_p2(20.0), 1e-12);
  EXPECT_EQ(map.at(50 + 1200, 10), map.at(50 + 600, 10));
}

TEST(BudgetMap, RadiallySymmetric) {
  const auto m = sm::default_paper_model();
  stereofov::display::DisplayModel d{.width_px = 101, .height_px = 101, .ppd = 4.0};
  const auto map = sm::blur_budget_map(m, d, {50, 50});
  for (int y = 0; y < 101; ++y) {
    for (int x = 0; x < 101; ++x) {
      EXPECT_EQ(map.at(x, y), map.at(100 - x, y));
      EXPECT_EQ(map.at(x, y), map.at(y, x));
    }
  }
}

TEST(ModelJson, RoundTrip) {
  auto m = sm::default_paper_model();
  m.p1_constant = 0.00325;
  nlohmann::json j = m;
  EXPECT_TRUE(j.contains("p1"));
  EXPECT_EQ(j["p2"]["c"], -7.5);
  EXPECT_EQ(j.get<sm::SurfaceModel>(), m);

  stereofov::testing::TempDir dir;
  sm::save_model((dir / "m.json").string(), m);
  EXPECT_EQ(sm::load_model((dir / "m.json").string()), m);
}
