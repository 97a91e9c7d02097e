#include "spectral.hpp"

#include <cmath>
#include <stdexcept>

#include <fftw3.h>

namespace stereofov::testing {

std::vector<std::complex<double>> dft2(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::complex<double>> out(img.size());
  auto* in = fftw_alloc_complex(img.size());
  auto* res = fftw_alloc_complex(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    in[i][0] = img.pixels()[i];
    in[i][1] = 0.0;
  }
  fftw_plan plan = fftw_plan_dft_2d(h, w, in, res, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = {res[i][0], res[i][1]};
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(res);
  return out;
}

double dft_frequency(int k, int n) {
  return (k <= n / 2 ? k : k - n) / static_cast<double>(n);
}

std::vector<double> radial_power(const GrayImage& img) {
  if (img.width() != img.height()) throw std::invalid_argument("square image required");
  const int n = img.width();
  double mean = 0.0;
  for (double v : img.pixels()) mean += v;
  mean /= static_cast<double>(img.size());
  GrayImage centered = img;
  for (double& v : centered.pixels()) v -= mean;
  const auto f = dft2(centered);
  std::vector<double> sum(static_cast<std::size_t>(n / 2 + 1), 0.0);
  std::vector<int> count(sum.size(), 0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double r = std::hypot(dft_frequency(x, n), dft_frequency(y, n)) * n;
      const auto bin = static_cast<std::size_t>(r);
      if (bin >= sum.size()) continue;
      sum[bin] += std::norm(f[static_cast<std::size_t>(y) * n + x]);
      ++count[bin];
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i]) sum[i] /= count[i];
  }
  return sum;
}

}  // namespace stereofov::testing
