#pragma once

// Raster and geometry primitives shared by every stage.
//
// Coordinates: origin top-left, x to the right, y downward.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sma/error.hpp"

namespace sma {

/// Half-sample symmetric reflection (a b c | c b a), valid for any offset.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::parameter, "image dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  GrayImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 ||
        data_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorKind::parameter, "image data does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  double operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  /// Sample with reflect padding outside the raster.
  double at_reflect(int x, int y) const {
    return (*this)(reflect_index(x, width_), reflect_index(y, height_));
  }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }

  std::span<double> row(int y) {
    return {data_.data() + static_cast<std::size_t>(y) * width_,
            static_cast<std::size_t>(width_)};
  }
  std::span<const double> row(int y) const {
    return {data_.data() + static_cast<std::size_t>(y) * width_,
            static_cast<std::size_t>(width_)};
  }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct RectRegion {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  bool fits(int width, int height) const noexcept {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= width &&
           y + h <= height;
  }
  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool operator==(const RectRegion&) const = default;
};

/// Rect `inner`, given relative to `outer`, expressed in the coordinates
/// `outer` is relative to.
inline RectRegion compose(const RectRegion& outer, const RectRegion& inner) {
  return {outer.x + inner.x, outer.y + inner.y, inner.w, inner.h};
}

inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }
inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

/// Signed line angle in degrees: positive when the line rises toward the
/// left of the image (y grows with x), range (-90, 90).
inline double angle_from_slope(double slope) { return rad_to_deg(std::atan(slope)); }
inline double slope_from_angle(double degrees) { return std::tan(deg_to_rad(degrees)); }

struct StraightLine {
  double slope = 0.0;
  double intercept = 0.0;
  double x_min = 0.0;
  double x_max = 1.0;

  double y_at(double x) const noexcept { return slope * x + intercept; }
  double angle_deg() const noexcept { return angle_from_slope(slope); }
  bool in_domain(double x) const noexcept { return x >= x_min && x <= x_max; }
};

inline GrayImage crop(const GrayImage& img, const RectRegion& r) {
  if (!r.fits(img.width(), img.height())) {
    throw Error(ErrorKind::bounds,
                "crop rectangle (" + std::to_string(r.x) + "," +
                    std::to_string(r.y) + "," + std::to_string(r.w) + "," +
                    std::to_string(r.h) + ") exceeds image " +
                    std::to_string(img.width()) + "x" +
                    std::to_string(img.height()));
  }
  GrayImage out(r.w, r.h);
  for (int j = 0; j < r.h; ++j) {
    auto src = img.row(r.y + j).subspan(static_cast<std::size_t>(r.x), r.w);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

inline GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    auto src = img.row(y);
    std::reverse_copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

/// Ranges below this are rounding residue on a unit-intensity scale.
inline constexpr double kFlatRange = 1e-9;

/// Linear min-max rescale to [0,1]; a flat image maps to all zeros.
inline GrayImage rescale_to_unit(const GrayImage& img) {
  auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  GrayImage out(img.width(), img.height());
  const double range = *hi - *lo;
  if (!(range > kFlatRange)) return out;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) dst[i] = (px[i] - *lo) / range;
  return out;
}

inline GrayImage clamp_to_unit(GrayImage img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace sma
