#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace stereofov {

/// Dense row-major 2D grid.
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative raster size");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int x, int y) noexcept {
    assert(contains(x, y));
    return data_[index(x, y)];
  }
  const T& at(int x, int y) const noexcept {
    assert(contains(x, y));
    return data_[index(x, y)];
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  std::span<T> row(int y) noexcept {
    return std::span<T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
  }
  std::span<const T> row(int y) const noexcept {
    return std::span<const T>(data_).subspan(index(0, y), static_cast<std::size_t>(width_));
  }

  template <class U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities, nominally in [0, 1].
using GrayImage = Raster<double>;
/// Per-pixel membership flags (0 or 1).
using Mask = Raster<std::uint8_t>;
/// Generic per-pixel scalar quantity (e.g. blur sigma in arcmin).
using ScalarField = Raster<double>;

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

/// Min/max over the pixels selected by `mask` (all pixels when mask is null).
/// Throws std::invalid_argument when no pixel is selected.
ValueRange value_range(const GrayImage& img, const Mask* mask = nullptr);

/// Horizontal concatenation of two equally sized images.
GrayImage side_by_side(const GrayImage& left, const GrayImage& right);

}  // namespace stereofov
