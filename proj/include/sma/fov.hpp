#pragma once

// Locating the ultrasound field of view inside the vendor frame.

#include <algorithm>
#include <vector>

#include "sma/filters.hpp"
#include "sma/image.hpp"

namespace sma {

enum class FovMethod { automatic, manual };

struct FovResult {
  RectRegion rect;
  FovMethod method = FovMethod::automatic;
};

struct FovParams {
  int box_size = 5;
  int median_radius = 3;
  int threshold_window = 63;
  int close_radius = 3;
  int shrink = 2;
  double min_area_fraction = 0.25;
};

namespace detail {

/// Bounding box of the largest 8-connected foreground component, or an
/// empty rect (w == 0) when there is no foreground.
inline RectRegion largest_component_bbox(const GrayImage& binary) {
  const int w = binary.width();
  const int h = binary.height();
  std::vector<int> label(binary.size(), -1);
  std::vector<int> stack;
  long long best_count = 0;
  RectRegion best{0, 0, 0, 0};
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      const std::size_t seed = static_cast<std::size_t>(sy) * w + sx;
      if (binary.pixels()[seed] <= 0.5 || label[seed] >= 0) continue;
      long long count = 0;
      int x0 = sx, x1 = sx, y0 = sy, y1 = sy;
      label[seed] = 1;
      stack.assign(1, static_cast<int>(seed));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w, y = idx / w;
        ++count;
        x0 = std::min(x0, x); x1 = std::max(x1, x);
        y0 = std::min(y0, y); y1 = std::max(y1, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
            if (binary.pixels()[n] > 0.5 && label[n] < 0) {
              label[n] = 1;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      if (count > best_count) {
        best_count = count;
        best = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
      }
    }
  }
  return best;
}

/// Square structuring element of radius r; pixels outside the image are
/// ignored, so a foreground region touching the border keeps its extent.
inline GrayImage binary_extremum(const GrayImage& binary, int r, bool dilate) {
  auto pass = [&](const GrayImage& src, bool along_x) {
    GrayImage out(src.width(), src.height());
    const int w = src.width(), h = src.height();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool hit = !dilate;
        for (int t = -r; t <= r; ++t) {
          const int xi = along_x ? x + t : x, yi = along_x ? y : y + t;
          if (xi < 0 || yi < 0 || xi >= w || yi >= h) continue;
          const bool on = src(xi, yi) > 0.5;
          if (dilate ? on : !on) {
            hit = dilate;
            break;
          }
        }
        out(x, y) = hit ? 1.0 : 0.0;
      }
    return out;
  };
  return pass(pass(binary, true), false);
}

inline GrayImage binary_close(const GrayImage& binary, int r) {
  if (r <= 0) return binary;
  return binary_extremum(binary_extremum(binary, r, true), r, false);
}

}  // namespace detail

/// Box blur, median and local-median binarization suppress the frame text;
/// a small closing joins the speckle grains of the field of view into one
/// blob. The field of view is the bounding box of the largest blob, less the
/// box-blur spread, pulled in by `shrink` pixels. The input image is not
/// modified.
inline FovResult detect_field_of_view(const GrayImage& img, const FovParams& params = {}) {
  if (params.box_size < 1 || params.box_size % 2 == 0 || params.median_radius < 1 ||
      params.close_radius < 0 || params.shrink < 0 ||
      !(params.min_area_fraction >= 0.0 && params.min_area_fraction <= 1.0)) {
    throw Error(ErrorKind::parameter, "FoV parameters out of range");
  }
  const GrayImage smoothed = median_filter(convolve(img, Kernel2D::box(params.box_size)),
                                           params.median_radius);
  const GrayImage binary = detail::binary_close(
      local_median_threshold(smoothed, params.threshold_window), params.close_radius);
  RectRegion r = detail::largest_component_bbox(binary);
  const double image_area = static_cast<double>(img.width()) * img.height();
  if (r.w == 0 || static_cast<double>(r.area()) < params.min_area_fraction * image_area) {
    throw Error(ErrorKind::detection_failed,
                "field of view not found; supply a manual crop (--crop x,y,w,h)");
  }
  // The box blur spreads the field of view by half its size into the frame;
  // that spread is undone only on sides that do not touch the image border.
  const int spread = params.box_size / 2;
  const int x0 = r.x > 0 ? r.x + spread : 0;
  const int y0 = r.y > 0 ? r.y + spread : 0;
  const int x1 = r.x + r.w < img.width() ? r.x + r.w - spread : img.width();
  const int y1 = r.y + r.h < img.height() ? r.y + r.h - spread : img.height();
  if (x1 - x0 > 0 && y1 - y0 > 0) r = {x0, y0, x1 - x0, y1 - y0};
  const int s = params.shrink;
  if (r.w > 2 * s && r.h > 2 * s) r = {r.x + s, r.y + s, r.w - 2 * s, r.h - 2 * s};
  return {r, FovMethod::automatic};
}

}  // namespace sma
