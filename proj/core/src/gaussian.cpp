#include <cmath>
#include <vector>

#include "stereofov/errors.hpp"
#include "stereofov/stimulus.hpp"

namespace stereofov::stimulus {
namespace {

// Symmetric reflection (abc|cba) valid for any offset.
int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma_px, double radius_in_sigmas) {
  const int radius = std::max(1, static_cast<int>(std::ceil(radius_in_sigmas * sigma_px)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, double sigma_px, double radius_in_sigmas) {
  if (sigma_px < 0.0 || !std::isfinite(sigma_px)) throw DomainError("blur sigma must be >= 0");
  if (sigma_px == 0.0 || img.empty()) return img;

  const auto kernel = gaussian_kernel(sigma_px, radius_in_sigmas);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width();
  const int h = img.height();

  GrayImage tmp(w, h);
  std::vector<double> padded(static_cast<std::size_t>(w + 2 * radius));
  for (int y = 0; y < h; ++y) {
    const auto src = img.row(y);
    for (int i = -radius; i < w + radius; ++i) {
      padded[static_cast<std::size_t>(i + radius)] = src[static_cast<std::size_t>(reflect(i, w))];
    }
    auto dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      const double* p = padded.data() + x;
      for (std::size_t t = 0; t < kernel.size(); ++t) acc += kernel[t] * p[t];
      dst[static_cast<std::size_t>(x)] = acc;
    }
  }

  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (int t = -radius; t <= radius; ++t) {
      const double kv = kernel[static_cast<std::size_t>(t + radius)];
      const auto src = tmp.row(reflect(y + t, h));
      for (int x = 0; x < w; ++x) {
        dst[static_cast<std::size_t>(x)] += kv * src[static_cast<std::size_t>(x)];
      }
    }
  }
  return out;
}

GrayImage preblur(const GrayImage& img, BlurSigma sigma, const display::DisplayModel& d,
                  const Mask* contrast_region, PreblurOptions opts) {
  if (sigma.value < 0.0) throw DomainError("blur sigma must be >= 0");
  if (sigma.value == 0.0) return img;
  const ValueRange whole = value_range(img);
  if (whole.min == whole.max) return img;

  GrayImage blurred =
      gaussian_blur(img, display::arcmin_to_px(d, sigma.value), opts.radius_in_sigmas);
  if (!opts.recover_contrast) return blurred;

  const ValueRange before = value_range(img, contrast_region);
  const ValueRange after = value_range(blurred, contrast_region);
  if (after.max <= after.min) return blurred;
  const double gain = (before.max - before.min) / (after.max - after.min);
  for (double& v : blurred.pixels()) v = (v - after.min) * gain + before.min;
  return blurred;
}

}  // namespace stereofov::stimulus
