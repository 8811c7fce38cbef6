#pragma once

// Regions of interest between the aponeuroses and the dominant fascicle
// orientation inside them, from the gradient structure tensor.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sma/aponeurosis.hpp"
#include "sma/filters.hpp"
#include "sma/frequency.hpp"
#include "sma/image.hpp"

namespace sma {

enum class Aggregation { max, mean, median };
enum class RoiAnchor { deep, centered };

inline const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::max: return "max";
    case Aggregation::mean: return "mean";
    case Aggregation::median: return "median";
  }
  return "max";
}

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "mean") return Aggregation::mean;
  if (s == "median") return Aggregation::median;
  throw Error(ErrorKind::parameter, "unknown aggregation '" + s + "' (max|mean|median)");
}

inline const char* to_string(RoiAnchor a) { return a == RoiAnchor::deep ? "deep" : "centered"; }

/// Gradient used by the structure tensor. The Gaussian derivative (sigma 1)
/// damps the harmonics that tubeness clipping adds to fascicle stripes; the
/// cubic spline derivative is exact on band-limited input.
enum class GradientOperator { gaussian, cubic_spline };

inline const char* to_string(GradientOperator g) {
  return g == GradientOperator::gaussian ? "gaussian" : "cubic-spline";
}

inline GradientOperator gradient_from_string(const std::string& s) {
  if (s == "gaussian") return GradientOperator::gaussian;
  if (s == "cubic-spline") return GradientOperator::cubic_spline;
  throw Error(ErrorKind::parameter, "unknown gradient '" + s + "' (gaussian|cubic-spline)");
}

struct OrientationConfig {
  int n_rois = 3;
  double roi_width_pct = 60.0;
  double roi_height_pct = 90.0;
  SpectrumThreshold spectrum = AutoThreshold{};
  double log_sigma = 4.0;
  double window_sigma = 3.0;
  GradientOperator gradient = GradientOperator::gaussian;
  Aggregation aggregation = Aggregation::mean;
  RoiAnchor anchor = RoiAnchor::deep;
  double guard_px = 3.0;
  double min_gap_px = 20.0;
  double low_coherence = 0.2;
  FilterParams filters{};
};

inline void validate(const OrientationConfig& c) {
  if (c.n_rois < 2) throw Error(ErrorKind::parameter, "at least two ROIs are required");
  if (!(c.roi_width_pct > 0.0 && c.roi_width_pct <= 100.0) ||
      !(c.roi_height_pct > 0.0 && c.roi_height_pct <= 100.0)) {
    throw Error(ErrorKind::parameter, "ROI width/height percentages must lie in (0, 100]");
  }
  if (!(c.log_sigma > 0.0) || !(c.window_sigma > 0.0)) {
    throw Error(ErrorKind::parameter, "orientation sigmas must be positive");
  }
  validate(c.filters);
}

struct OrientationEstimate {
  std::vector<double> roi_angles;
  std::vector<double> roi_coherences;
  double aggregated_angle = 0.0;
  Aggregation method_used = Aggregation::max;
};

/// `n_rois` rectangles of equal width laid out from x = 0 with an integer
/// stride, each spanning `roi_height_pct` of the local aponeurosis gap and
/// kept clear of both lines by `guard_px`.
inline std::vector<RectRegion> build_rois(int fov_width, int fov_height,
                                          const AponeurosisPair& pair,
                                          const OrientationConfig& cfg) {
  validate(cfg);
  const int w = static_cast<int>(std::lround(cfg.roi_width_pct / 100.0 * fov_width));
  if (static_cast<long long>(cfg.n_rois) * w <= fov_width) {
    throw Error(ErrorKind::parameter, "ROIs must overlap: n_rois * roi width must exceed the FoV width");
  }
  const int stride = (fov_width - w) / (cfg.n_rois - 1);

  for (int x = 0; x < fov_width; ++x) {
    if (pair.deep.y_at(x) - pair.superficial.y_at(x) < cfg.min_gap_px) {
      throw Error(ErrorKind::roi_too_small, "aponeurosis gap below " +
                                                std::to_string(cfg.min_gap_px) + " px");
    }
  }

  std::vector<RectRegion> rois;
  for (int i = 0; i < cfg.n_rois; ++i) {
    const int x0 = i * stride;
    double deep_top = std::numeric_limits<double>::infinity();
    double sup_bottom = -std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (int x = x0; x < x0 + w; ++x) {
      deep_top = std::min(deep_top, pair.deep.y_at(x));
      sup_bottom = std::max(sup_bottom, pair.superficial.y_at(x));
      gap = std::min(gap, pair.deep.y_at(x) - pair.superficial.y_at(x));
    }
    const int limit_top = std::max(0, static_cast<int>(std::ceil(sup_bottom + cfg.guard_px)));
    const int limit_bottom = std::min(fov_height, static_cast<int>(std::floor(deep_top - cfg.guard_px)));
    const int height = static_cast<int>(std::lround(cfg.roi_height_pct / 100.0 * gap));
    int y0 = 0, y1 = 0;
    if (cfg.anchor == RoiAnchor::deep) {
      y1 = limit_bottom;
      y0 = y1 - height;
    } else {
      const double mid = 0.5 * (sup_bottom + deep_top);
      y0 = static_cast<int>(std::lround(mid - 0.5 * height));
      y1 = y0 + height;
    }
    y0 = std::max(y0, limit_top);
    y1 = std::min(y1, limit_bottom);
    if (y1 - y0 < 16) {
      throw Error(ErrorKind::roi_too_small, "ROI " + std::to_string(i) + " is under 16 px tall");
    }
    rois.push_back({x0, y0, std::min(w, fov_width - x0), y1 - y0});
  }
  return rois;
}

/// Median, non-local means, spectrum threshold, inverse FFT, tubeness.
inline GrayImage preprocess_roi(const GrayImage& roi, const OrientationConfig& cfg) {
  validate(cfg);
  GrayImage img = median_filter(roi, cfg.filters.median_radius);
  img = nlm_denoise(img, cfg.filters);
  img = ifft2(threshold_spectrum(fft2(img), cfg.spectrum));
  return tubeness(img, cfg.log_sigma);
}

namespace detail {

/// Interpolating cubic B-spline coefficients along one line (mirror
/// boundaries, single pole z = sqrt(3) - 2).
inline void bspline_prefilter(std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  if (n < 2) return;
  const double z = std::sqrt(3.0) - 2.0;
  for (double& v : c) v *= 6.0;
  // Causal initialization over the mirrored signal, truncated once z^k is negligible.
  const int horizon = std::min(n, static_cast<int>(std::ceil(std::log(1e-12) / std::log(std::abs(z)))));
  double zk = z;
  double sum = c[0];
  for (int k = 1; k < horizon; ++k) {
    sum += zk * c[k];
    zk *= z;
  }
  c[0] = sum;
  for (int k = 1; k < n; ++k) c[k] += z * c[k - 1];
  c[n - 1] = (z / (z * z - 1.0)) * (z * c[n - 2] + c[n - 1]);
  for (int k = n - 2; k >= 0; --k) c[k] = z * (c[k + 1] - c[k]);
}

inline GrayImage bspline_coefficients(const GrayImage& img) {
  GrayImage out = img;
  std::vector<double> line(static_cast<std::size_t>(img.width()));
  for (int y = 0; y < img.height(); ++y) {
    auto r = out.row(y);
    std::copy(r.begin(), r.end(), line.begin());
    bspline_prefilter(line);
    std::copy(line.begin(), line.end(), r.begin());
  }
  line.resize(static_cast<std::size_t>(img.height()));
  for (int x = 0; x < img.width(); ++x) {
    for (int y = 0; y < img.height(); ++y) line[y] = out(x, y);
    bspline_prefilter(line);
    for (int y = 0; y < img.height(); ++y) out(x, y) = line[y];
  }
  return out;
}

}  // namespace detail

struct CubicSplineGradient {
  GrayImage fx;
  GrayImage fy;
};

/// Exact derivative of the interpolating cubic spline at the sample points:
/// prefilter, then (1/2, 0, -1/2) along the derivative axis and
/// (1/6, 4/6, 1/6) along the other.
inline CubicSplineGradient cubic_spline_gradient(const GrayImage& img) {
  const GrayImage c = detail::bspline_coefficients(img);
  static constexpr std::array<double, 3> deriv{0.5, 0.0, -0.5};
  static constexpr std::array<double, 3> smooth{1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  return {detail::convolve_separable(c, deriv, smooth),
          detail::convolve_separable(c, smooth, deriv)};
}

/// Derivative-of-Gaussian gradient: d/dx of a sampled Gaussian along the
/// derivative axis, the Gaussian itself along the other. Scaled so that a
/// unit ramp has unit slope.
inline CubicSplineGradient gaussian_gradient(const GrayImage& img, double sigma = 1.0) {
  const std::vector<double> g = gaussian_kernel(sigma);
  const int r = static_cast<int>(g.size() / 2);
  std::vector<double> d(g.size());
  double moment = 0.0;
  for (int i = -r; i <= r; ++i) {
    d[static_cast<std::size_t>(i + r)] = -i * g[static_cast<std::size_t>(i + r)];
    moment += static_cast<double>(i) * i * g[static_cast<std::size_t>(i + r)];
  }
  for (double& v : d) v /= moment;
  return {detail::convolve_separable(img, d, g), detail::convolve_separable(img, g, d)};
}

struct DominantOrientation {
  double angle = 0.0;      // degrees, (-90, 90]
  double coherence = 0.0;  // [0, 1]
};

inline constexpr double kHistogramBin = 0.5;

/// Energy-weighted orientation histogram of the structure tensor field; the
/// angle is the histogram mode refined by a parabola through the peak bin
/// and its neighbours. Coherence comes from the energy-weighted mean tensor.
inline DominantOrientation dominant_orientation(
    const GrayImage& img, double window_sigma,
    GradientOperator op = GradientOperator::gaussian) {
  if (img.width() < 16 || img.height() < 16) {
    throw Error(ErrorKind::parameter, "orientation needs an image of at least 16x16");
  }
  if (!(window_sigma > 0.0)) throw Error(ErrorKind::parameter, "window sigma must be positive");
  const auto grad =
      op == GradientOperator::gaussian ? gaussian_gradient(img) : cubic_spline_gradient(img);
  GrayImage jxx(img.width(), img.height()), jyy(img.width(), img.height()),
      jxy(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double gx = grad.fx.pixels()[i];
    const double gy = grad.fy.pixels()[i];
    jxx.pixels()[i] = gx * gx;
    jyy.pixels()[i] = gy * gy;
    jxy.pixels()[i] = gx * gy;
  }
  jxx = gaussian_blur(jxx, window_sigma);
  jyy = gaussian_blur(jyy, window_sigma);
  jxy = gaussian_blur(jxy, window_sigma);

  // Pixels whose window reaches past the border see mirrored structure.
  const int margin_x = std::min(static_cast<int>(std::ceil(2.0 * window_sigma)), (img.width() - 8) / 2);
  const int margin_y = std::min(static_cast<int>(std::ceil(2.0 * window_sigma)), (img.height() - 8) / 2);

  constexpr int bins = static_cast<int>(180.0 / kHistogramBin);
  std::vector<double> hist(bins, 0.0);
  double sxx = 0.0, syy = 0.0, sxy = 0.0, total = 0.0;
  for (int y = margin_y; y < img.height() - margin_y; ++y) {
    for (int x = margin_x; x < img.width() - margin_x; ++x) {
      const double a = jxx(x, y), b = jxy(x, y), c = jyy(x, y);
      const double energy = a + c;
      if (!(energy > 0.0)) continue;
      // Structure direction is perpendicular to the dominant gradient; the
      // sign flip maps image y-down onto the line-angle convention.
      const double theta = 0.5 * rad_to_deg(std::atan2(-2.0 * b, c - a));
      const double pos = (theta + 90.0) / kHistogramBin;
      const double fl = std::floor(pos);
      const double frac = pos - fl;
      const int i0 = ((static_cast<int>(fl) % bins) + bins) % bins;
      hist[i0] += energy * (1.0 - frac);
      hist[(i0 + 1) % bins] += energy * frac;
      sxx += energy * a;
      syy += energy * c;
      sxy += energy * b;
      total += energy;
    }
  }
  if (!(total > 1e-20)) {
    throw Error(ErrorKind::undefined_orientation, "image has no gradient; orientation undefined");
  }

  const int peak = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  const double hm = hist[(peak + bins - 1) % bins];
  const double h0 = hist[peak];
  const double hp = hist[(peak + 1) % bins];
  const double curvature = hm - 2.0 * h0 + hp;
  const double delta = curvature < 0.0 ? 0.5 * (hm - hp) / curvature : 0.0;
  double angle = -90.0 + (peak + delta) * kHistogramBin;
  while (angle <= -90.0) angle += 180.0;
  while (angle > 90.0) angle -= 180.0;

  const double mean_xx = sxx / total, mean_yy = syy / total, mean_xy = sxy / total;
  const double tr = mean_xx + mean_yy;
  const double diff = std::hypot(mean_xx - mean_yy, 2.0 * mean_xy);
  const double coherence = tr > 0.0 ? std::clamp(diff / tr, 0.0, 1.0) : 0.0;
  return {angle, coherence};
}

inline double aggregate_orientations(const std::vector<double>& angles, Aggregation method) {
  if (angles.empty()) throw Error(ErrorKind::parameter, "no ROI angles to aggregate");
  switch (method) {
    case Aggregation::max:
      return *std::max_element(angles.begin(), angles.end());
    case Aggregation::mean:
      return std::accumulate(angles.begin(), angles.end(), 0.0) / static_cast<double>(angles.size());
    case Aggregation::median: {
      std::vector<double> s = angles;
      std::sort(s.begin(), s.end());
      const std::size_t n = s.size();
      return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    }
  }
  return angles.front();
}

}  // namespace sma
