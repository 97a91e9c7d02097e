#include "stereofov/image.hpp"

#include <algorithm>
#include <limits>

namespace stereofov {

ValueRange value_range(const GrayImage& img, const Mask* mask) {
  if (mask != nullptr && !mask->same_shape(img)) {
    throw std::invalid_argument("mask shape does not match image");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (mask != nullptr && mask->pixels()[i] == 0) continue;
    lo = std::min(lo, px[i]);
    hi = std::max(hi, px[i]);
  }
  if (lo > hi) throw std::invalid_argument("value_range: no pixel selected");
  return {lo, hi};
}

GrayImage side_by_side(const GrayImage& left, const GrayImage& right) {
  if (!left.same_shape(right)) throw std::invalid_argument("side_by_side: shape mismatch");
  GrayImage out(left.width() * 2, left.height());
  for (int y = 0; y < left.height(); ++y) {
    auto dst = out.row(y);
    std::ranges::copy(left.row(y), dst.begin());
    std::ranges::copy(right.row(y), dst.begin() + left.width());
  }
  return out;
}

}  // namespace stereofov
