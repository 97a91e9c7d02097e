#include "oracles.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "spectral.hpp"

namespace stereofov::testing {

GrayImage confined_noise(int size, int inner, std::uint64_t seed) {
  GrayImage img(size, size, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const int start = (size - inner) / 2;
  for (int y = start; y < start + inner; ++y)
    for (int x = start; x < start + inner; ++x) img.at(x, y) = u(rng);
  return img;
}

TransferCheck gaussian_transfer(const GrayImage& input, const GrayImage& output,
                                double sigma_px, double f_max, double floor) {
  if (!input.same_shape(output) || input.width() != input.height()) {
    throw std::invalid_argument("square images of equal size required");
  }
  const int n = input.width();
  const auto X = dft2(input);
  const auto Y = dft2(output);
  const int bins = static_cast<int>(std::floor(f_max * n));
  std::vector<double> cross(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> power(cross.size(), 0.0);
  std::vector<double> expected(cross.size(), 0.0);
  const double k = 2.0 * M_PI * M_PI * sigma_px * sigma_px;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double fx = dft_frequency(x, n);
      const double fy = dft_frequency(y, n);
      const double r = std::hypot(fx, fy);
      const int bin = static_cast<int>(r * n);
      if (bin < 1 || bin >= bins) continue;
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      const double p = std::norm(X[i]);
      cross[static_cast<std::size_t>(bin)] += (Y[i] * std::conj(X[i])).real();
      power[static_cast<std::size_t>(bin)] += p;
      expected[static_cast<std::size_t>(bin)] += p * std::exp(-k * r * r);
    }
  }
  TransferCheck out;
  for (int b = 1; b < bins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (power[i] <= 0.0) continue;
    const double measured = cross[i] / power[i];
    const double analytic = expected[i] / power[i];
    if (analytic >= floor) {
      out.worst_relative = std::max(out.worst_relative, std::abs(measured / analytic - 1.0));
    } else {
      out.worst_absolute = std::max(out.worst_absolute, std::abs(measured - analytic));
    }
    ++out.annuli;
  }
  return out;
}

double cubic_sample(std::span<const double> row, double x) {
  const int n = static_cast<int>(row.size());
  const double fx = std::floor(x);
  const double t = x - fx;
  auto at = [&](int i) { return row[static_cast<std::size_t>(std::clamp(i, 0, n - 1))]; };
  const int i = static_cast<int>(fx);
  const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  const double a = -0.5;
  auto w = [a](double d) {
    d = std::abs(d);
    if (d <= 1.0) return (a + 2.0) * d * d * d - (a + 3.0) * d * d + 1.0;
    if (d < 2.0) return a * d * d * d - 5.0 * a * d * d + 8.0 * a * d - 4.0 * a;
    return 0.0;
  };
  return p0 * w(1.0 + t) + p1 * w(t) + p2 * w(1.0 - t) + p3 * w(2.0 - t);
}

double best_shift_px(std::span<const double> ref, std::span<const double> moved, int x0, int x1,
                     double s_lo, double s_hi) {
  auto cost = [&](double s) {
    double acc = 0.0;
    for (int x = x0; x < x1; ++x) {
      const double d = moved[static_cast<std::size_t>(x)] - cubic_sample(ref, x + s);
      acc += d * d;
    }
    return acc;
  };
  double best = s_lo;
  double best_cost = cost(s_lo);
  for (double s = s_lo; s <= s_hi; s += 0.02) {
    const double c = cost(s);
    if (c < best_cost) {
      best_cost = c;
      best = s;
    }
  }
  double lo = best - 0.02;
  double hi = best + 0.02;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (cost(m1) < cost(m2)) hi = m2; else lo = m1;
  }
  return 0.5 * (lo + hi);
}

double measured_peak_disparity_arcmin(const stimulus::StereoStimulus& stim,
                                      const stimulus::DepthMap& depth,
                                      const stimulus::RingSpec& spec,
                                      const display::DisplayModel& dm, double min_depth) {
  const int n = stim.left.width();
  const double c = 0.5 * (n - 1);
  const double r_px = (spec.outer_radius_deg() - 0.5) * dm.ppd;
  double sum = 0.0;
  int rows = 0;
  for (int y = 0; y < n; ++y) {
    const double id = depth.values.at(static_cast<int>(c), y);
    if (id < min_depth) continue;
    const double dy = y - c;
    if (std::abs(dy) >= r_px) continue;
    const double half = std::sqrt(r_px * r_px - dy * dy);
    const int x0 = static_cast<int>(std::ceil(c - half));
    const int x1 = static_cast<int>(std::floor(c + half));
    if (x1 - x0 < 20) continue;
    const double s = best_shift_px(stim.left.row(y), stim.right.row(y), x0, x1, -8.0, 8.0);
    sum += s / id;
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("no peak rows inside the ring");
  return display::px_to_arcmin(dm, sum / rows);
}

double information_bound_log_t(double lambda, double k, std::span<const double> xs, int n) {
  double i11 = 0, i12 = 0, i22 = 0;
  for (double x : xs) {
    const double z = std::pow(x / lambda, k);
    const double p = 1.0 - 0.5 * std::exp(-z);
    const double dens = 0.5 * std::exp(-z) * z;
    const double g1 = -k * dens;                        // dF/d log lambda
    const double g2 = dens * k * std::log(x / lambda);  // dF/d log k
    const double w = n / (p * (1 - p));
    i11 += w * g1 * g1;
    i12 += w * g1 * g2;
    i22 += w * g2 * g2;
  }
  const double det = i11 * i22 - i12 * i12;
  const double j2 = -std::log(std::log(2.0)) / k;  // d log T / d log k
  return std::sqrt((i22 - 2 * j2 * i12 + j2 * j2 * i11) / det);
}

}  // namespace stereofov::testing
