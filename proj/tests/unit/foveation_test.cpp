#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stereofov/errors.hpp"
#include "stereofov/foveation.hpp"

namespace fov = stereofov::foveation;
using stereofov::GrayImage;
using stereofov::Pixel;

namespace {

const stereofov::display::DisplayModel kDisplay{.width_px = 256, .height_px = 256, .ppd = 6.0};

GrayImage noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  GrayImage img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

// Mean squared difference between horizontal neighbours within an annulus.
double local_energy(const GrayImage& img, Pixel gaze, double r_lo_deg, double r_hi_deg) {
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      const double r = std::hypot(x - gaze.x, y - gaze.y) / kDisplay.ppd;
      if (r < r_lo_deg || r >= r_hi_deg) continue;
      const double d = img.at(x + 1, y) - img.at(x, y);
      sum += d * d;
      ++n;
    }
  }
  return sum / n;
}

// Oracle: blend the bracketing levels, then remap to the input's range.
GrayImage expected_constant_budget(const fov::BlurPyramid& pyr, double s) {
  const auto& levels = pyr.levels;
  std::size_t hi = 0;
  while (hi < levels.size() && levels[hi].sigma.value < s) ++hi;
  GrayImage out(levels[0].image.width(), levels[0].image.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (hi == levels.size()) {
      out.pixels()[i] = levels.back().image.pixels()[i];
    } else if (hi == 0 || levels[hi].sigma.value == s) {
      out.pixels()[i] = levels[hi].image.pixels()[i];
    } else {
      const double w = (s - levels[hi - 1].sigma.value) /
                       (levels[hi].sigma.value - levels[hi - 1].sigma.value);
      out.pixels()[i] = (1 - w) * levels[hi - 1].image.pixels()[i] + w * levels[hi].image.pixels()[i];
    }
  }
  const auto want = stereofov::value_range(levels[0].image);
  const auto have = stereofov::value_range(out);
  for (double& v : out.pixels()) {
    v = want.min + (v - have.min) * (want.max - want.min) / (have.max - have.min);
  }
  return out;
}

}  // namespace

TEST(Pyramid, LevelZeroIsTheInput) {
  const GrayImage img = noise_image(64, 48, 1);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  ASSERT_EQ(pyr.levels.size(), fov::kDefaultLevels.size());
  EXPECT_EQ(pyr.levels[0].image, img);
  for (std::size_t i = 0; i < pyr.levels.size(); ++i) {
    EXPECT_EQ(pyr.levels[i].sigma.value, fov::kDefaultLevels[i]);
  }
}

TEST(Pyramid, VarianceFallsWithSigma) {
  const auto pyr = fov::build_pyramid(noise_image(128, 128, 2), fov::kDefaultLevels, kDisplay);
  const Pixel c{63.5, 63.5};
  for (std::size_t i = 1; i < pyr.levels.size(); ++i) {
    EXPECT_LT(local_energy(pyr.levels[i].image, c, 0, 8),
              local_energy(pyr.levels[i - 1].image, c, 0, 8));
  }
}

TEST(Pyramid, RejectsBadLevels) {
  const GrayImage img = noise_image(16, 16, 3);
  EXPECT_THROW(fov::build_pyramid(img, {}, kDisplay), stereofov::DomainError);
  EXPECT_THROW(fov::build_pyramid(img, {1.0, 2.0}, kDisplay), stereofov::DomainError);
  EXPECT_THROW(fov::build_pyramid(img, {0.0, 4.0, 2.0}, kDisplay), stereofov::DomainError);
  EXPECT_THROW(fov::build_pyramid(img, {0.0, 2.0, 2.0}, kDisplay), stereofov::DomainError);
}

TEST(Budget, FromModelMatchesOptimalBlur) {
  const auto b = fov::BudgetCurve::from_model(stereofov::model::default_paper_model());
  EXPECT_NEAR(b(0), 1.35, 0.005);
  EXPECT_NEAR(b(10), 5.70, 0.005);
  EXPECT_NEAR(b(20), 12.20, 0.005);
  EXPECT_EQ(b(35), b(20));
  EXPECT_LT(b(5), b(15));
}

TEST(Budget, TableInterpolatesAndClamps) {
  const auto b = fov::BudgetCurve::from_table({{20, 10}, {0, 2}, {10, 4}});
  EXPECT_EQ(b(-3), 2.0);
  EXPECT_DOUBLE_EQ(b(5), 3.0);
  EXPECT_DOUBLE_EQ(b(15), 7.0);
  EXPECT_EQ(b(40), 10.0);
  EXPECT_THROW(fov::BudgetCurve::from_table({}), stereofov::DomainError);
  EXPECT_THROW(fov::BudgetCurve::from_table({{0, -1}}), stereofov::DomainError);
  EXPECT_THROW(fov::BudgetCurve::constant(-0.5), stereofov::DomainError);
}

TEST(Budget, FromJson) {
  const auto b = fov::budget_from_json(nlohmann::json::parse(R"({"budget": [[0, 1], [10, 3]]})"));
  EXPECT_DOUBLE_EQ(b(5), 2.0);
  EXPECT_THROW(fov::budget_from_json(nlohmann::json::parse(R"({"levels": []})")),
               stereofov::DomainError);
  EXPECT_THROW(fov::budget_from_json(nlohmann::json::parse(R"({"budget": [[0, 1, 2]]})")),
               stereofov::DomainError);
}

TEST(Foveate, ZeroBudgetReturnsInput) {
  const GrayImage img = noise_image(64, 64, 4);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  EXPECT_EQ(fov::foveate(pyr, {31.5, 31.5}, fov::BudgetCurve::constant(0.0), kDisplay), img);
}

TEST(Foveate, ConstantBudgetBlendsLevels) {
  const GrayImage img = noise_image(64, 64, 5);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  for (double s : {3.0, 8.0, 100.0}) {
    const auto got = fov::foveate(pyr, {10, 50}, fov::BudgetCurve::constant(s), kDisplay);
    const auto want = expected_constant_budget(pyr, s);
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_NEAR(got.pixels()[i], want.pixels()[i], 1e-12) << s << " at " << i;
    }
  }
}

TEST(Foveate, KeepsInputRange) {
  const GrayImage img = noise_image(kDisplay.width_px, kDisplay.height_px, 6);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  const auto out = fov::foveate(pyr, kDisplay.center(),
                                fov::BudgetCurve::from_model(stereofov::model::default_paper_model()),
                                kDisplay);
  const auto a = stereofov::value_range(img);
  const auto b = stereofov::value_range(out);
  EXPECT_NEAR(a.min, b.min, 1.0 / 255);
  EXPECT_NEAR(a.max, b.max, 1.0 / 255);
}

TEST(Foveate, BlackBackgroundStaysBlack) {
  GrayImage img(64, 64, 0.0);
  for (int y = 16; y < 48; ++y)
    for (int x = 16; x < 48; ++x) img.at(x, y) = (x + y) % 2 ? 0.9 : 0.2;
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  const auto out = fov::foveate(pyr, {31.5, 31.5}, fov::BudgetCurve::constant(4.0), kDisplay);
  const auto inner = stereofov::value_range(out);
  EXPECT_NEAR(inner.max, 0.9, 1e-12);
}

TEST(Foveate, DetailFallsWithEccentricity) {
  const GrayImage img = noise_image(kDisplay.width_px, kDisplay.height_px, 7);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  const Pixel gaze = kDisplay.center();
  const auto out = fov::foveate(
      pyr, gaze, fov::BudgetCurve::from_model(stereofov::model::default_paper_model()), kDisplay);
  const double near = local_energy(out, gaze, 0, 3);
  const double mid = local_energy(out, gaze, 8, 11);
  const double far = local_energy(out, gaze, 17, 20);
  EXPECT_GT(near, mid);
  EXPECT_GT(mid, far);
}

TEST(Foveate, QuadrantsAgree) {
  const GrayImage img = noise_image(kDisplay.width_px, kDisplay.height_px, 8);
  const auto pyr = fov::build_pyramid(img, fov::kDefaultLevels, kDisplay);
  const Pixel gaze = kDisplay.center();
  const auto out = fov::foveate(
      pyr, gaze, fov::BudgetCurve::from_model(stereofov::model::default_paper_model()), kDisplay);
  double q[4] = {0, 0, 0, 0};
  for (int y = 0; y + 1 < out.height(); ++y) {
    for (int x = 0; x + 1 < out.width(); ++x) {
      const int k = (x < gaze.x ? 0 : 1) + (y < gaze.y ? 0 : 2);
      q[k] += std::abs(out.at(x + 1, y) - out.at(x, y)) + std::abs(out.at(x, y + 1) - out.at(x, y));
    }
  }
  const double mean = (q[0] + q[1] + q[2] + q[3]) / 4;
  for (double v : q) EXPECT_NEAR(v / mean, 1.0, 0.1);
}

TEST(Foveate, BadGaze) {
  const auto pyr = fov::build_pyramid(noise_image(32, 32, 9), {0.0, 2.0}, kDisplay);
  EXPECT_THROW(fov::foveate(pyr, {-1, 5}, fov::BudgetCurve::constant(1), kDisplay),
               stereofov::DomainError);
  EXPECT_THROW(fov::foveate(pyr, {5, 32}, fov::BudgetCurve::constant(1), kDisplay),
               stereofov::DomainError);
  EXPECT_THROW(fov::foveate({}, {5, 5}, fov::BudgetCurve::constant(1), kDisplay),
               stereofov::DomainError);
}
