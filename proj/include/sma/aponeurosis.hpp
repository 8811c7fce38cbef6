#pragma once

// Enhancement, edge detection and straight-line registration of the
// superficial and deep aponeuroses.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "sma/filters.hpp"
#include "sma/frequency.hpp"
#include "sma/image.hpp"

namespace sma {

struct AponeurosisConfig {
  double tube_sigma = 10.0;
  double canny_sigma = 2.0;
  double canny_low = 0.05;
  double canny_high = 0.15;
  double wedge_center = 20.0;      // expected fascicle angle, degrees
  double wedge_half_width = 25.0;
  double horizontal_keep = 10.0;   // orientations within this of 0 deg are never suppressed
  double spectrum_k = 2.0;
  double min_separation = 20.0;
  double min_span = 0.5;           // fraction of FoV width
  double max_fit_rms = 3.0;
  double pad_sigmas = 3.0;         // mirror margin before the FFT, in tube sigmas
  FilterParams filters{};
};

inline void validate(const AponeurosisConfig& c) {
  if (!(c.tube_sigma > 0.0) || !(c.canny_sigma > 0.0)) {
    throw Error(ErrorKind::parameter, "aponeurosis sigmas must be positive");
  }
  if (!(c.canny_low >= 0.0 && c.canny_low < c.canny_high && c.canny_high <= 1.0)) {
    throw Error(ErrorKind::parameter, "canny thresholds must satisfy 0 <= low < high <= 1");
  }
  if (!(c.wedge_half_width > 0.0 && c.wedge_half_width < 90.0) || c.horizontal_keep < 0.0) {
    throw Error(ErrorKind::parameter, "wedge angles out of range");
  }
  if (c.pad_sigmas < 0.0) throw Error(ErrorKind::parameter, "FFT margin must be >= 0");
  if (!(c.min_span > 0.0 && c.min_span <= 1.0) || c.min_separation < 0.0) {
    throw Error(ErrorKind::parameter, "aponeurosis span/separation out of range");
  }
  validate(c.filters);
}

struct AponeurosisPair {
  StraightLine superficial;
  StraightLine deep;
  double superficial_angle = 0.0;
  double deep_angle = 0.0;
  double superficial_rms = 0.0;
  double deep_rms = 0.0;
};

inline AponeurosisPair make_pair(const StraightLine& superficial, const StraightLine& deep,
                                 double superficial_rms = 0.0, double deep_rms = 0.0) {
  return {superficial, deep, superficial.angle_deg(), deep.angle_deg(), superficial_rms, deep_rms};
}

/// Fascicle-oriented spectral energy is removed, except for orientations
/// within `horizontal_keep` of horizontal, which always carry the
/// aponeuroses. Returns the suppressed interval as (center, half width), or
/// nothing when it is empty.
inline std::optional<std::pair<double, double>> fascicle_suppression_wedge(
    const AponeurosisConfig& cfg) {
  double lo = cfg.wedge_center - cfg.wedge_half_width;
  double hi = cfg.wedge_center + cfg.wedge_half_width;
  if (cfg.wedge_center >= 0.0) {
    lo = std::max(lo, cfg.horizontal_keep);
  } else {
    hi = std::min(hi, -cfg.horizontal_keep);
  }
  if (hi - lo <= 1e-9) return std::nullopt;
  return std::pair{0.5 * (lo + hi), 0.5 * (hi - lo)};
}

/// Mirror-extends by `margin` pixels on every side.
inline GrayImage reflect_pad(const GrayImage& img, int margin) {
  GrayImage out(img.width() + 2 * margin, img.height() + 2 * margin);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = img.at_reflect(x - margin, y - margin);
  return out;
}

/// CLAHE, non-local means, tubeness, spectrum threshold, fascicle wedge
/// suppression, inverse FFT. Output in [0,1].
///
/// The tubeness image is mirror-extended before the transform: a tilted
/// band does not meet itself across the periodic boundary, and the leakage
/// from that seam would otherwise leave ringing near the left and right
/// edges of the field of view.
inline GrayImage preprocess_for_aponeuroses(const GrayImage& fov, const AponeurosisConfig& cfg) {
  validate(cfg);
  GrayImage img = clahe(fov, cfg.filters);
  img = nlm_denoise(img, cfg.filters);
  img = tubeness(img, cfg.tube_sigma);
  const int margin = static_cast<int>(std::ceil(cfg.pad_sigmas * cfg.tube_sigma));
  Spectrum spec = threshold_spectrum(fft2(reflect_pad(img, margin)), AutoThreshold{cfg.spectrum_k});
  if (const auto wedge = fascicle_suppression_wedge(cfg)) {
    spec = wedge_mask(std::move(spec), wedge->first, wedge->second, false);
  }
  const RawInverse raw = ifft2_raw(spec);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      out(x, y) = raw.real[static_cast<std::size_t>(y + margin) * raw.width + (x + margin)];
  return rescale_to_unit(out);
}

struct LineFit {
  StraightLine line;
  double rms = 0.0;
  std::size_t kept = 0;
};

namespace detail {

struct Point2 {
  double x, y;
};

inline std::pair<double, double> least_squares(const std::vector<Point2>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    sx += p.x; sy += p.y; sxx += p.x * p.x; sxy += p.x * p.y;
  }
  const double n = static_cast<double>(pts.size());
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-12) {
    throw Error(ErrorKind::registration_failed, "degenerate aponeurosis point set");
  }
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

inline double median_of(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

}  // namespace detail

/// Least squares with a single outlier-rejection pass: points whose residual
/// exceeds twice the median absolute residual are dropped before refitting.
inline LineFit fit_line_robust(const std::vector<detail::Point2>& pts, double x_min,
                               double x_max) {
  if (pts.size() < 2) {
    throw Error(ErrorKind::registration_failed, "too few aponeurosis points");
  }
  auto [slope, intercept] = detail::least_squares(pts);
  std::vector<double> abs_res(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    abs_res[i] = std::abs(pts[i].y - (slope * pts[i].x + intercept));
  const double cutoff = std::max(2.0 * detail::median_of(abs_res), 1e-9);
  std::vector<detail::Point2> kept;
  kept.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (abs_res[i] <= cutoff) kept.push_back(pts[i]);
  if (kept.size() >= 2) std::tie(slope, intercept) = detail::least_squares(kept);
  else kept = pts;
  double ss = 0.0;
  for (const auto& p : kept) {
    const double r = p.y - (slope * p.x + intercept);
    ss += r * r;
  }
  return {{slope, intercept, x_min, x_max}, std::sqrt(ss / static_cast<double>(kept.size())), kept.size()};
}

/// Registers the two aponeuroses from a binary edge map. The superficial
/// candidate of each column is the topmost edge pixel and the deep candidate
/// the bottommost one. A bright band yields an edge on each flank; when the
/// next edge lies within `flank_gap` pixels of the outermost one the two are
/// taken as the flanks of one band and their midpoint is used, so that both
/// lines follow band centerlines.
inline AponeurosisPair register_aponeuroses(const GrayImage& edges, const AponeurosisConfig& cfg) {
  validate(cfg);
  const int w = edges.width();
  const int h = edges.height();
  const double flank_gap = 3.0 * cfg.tube_sigma;

  std::vector<detail::Point2> top, bottom;
  std::vector<int> ys;
  for (int x = 0; x < w; ++x) {
    ys.clear();
    for (int y = 0; y < h; ++y)
      if (edges(x, y) > 0.5) ys.push_back(y);
    if (ys.empty()) continue;
    // Skip the adjacent pixel(s) of a slanted edge when looking for the partner.
    auto partner_below = [&](std::size_t i) -> std::optional<int> {
      std::size_t j = i;
      while (j + 1 < ys.size() && ys[j + 1] - ys[j] <= 1) ++j;
      if (j + 1 < ys.size() && ys[j + 1] - ys[i] <= flank_gap) return ys[j + 1];
      return std::nullopt;
    };
    auto partner_above = [&](std::size_t i) -> std::optional<int> {
      std::size_t j = i;
      while (j > 0 && ys[j] - ys[j - 1] <= 1) --j;
      if (j > 0 && ys[i] - ys[j - 1] <= flank_gap) return ys[j - 1];
      return std::nullopt;
    };
    const int y_top = ys.front();
    const int y_bottom = ys.back();
    const auto below = partner_below(0);
    const auto above = partner_above(ys.size() - 1);
    // A single band seen by both searches is not two aponeuroses.
    if (below && above && *below >= y_bottom && *above <= y_top) continue;
    const double sup_y = below ? 0.5 * (y_top + *below) : y_top;
    const double deep_y = above ? 0.5 * (y_bottom + *above) : y_bottom;
    if (deep_y - sup_y < cfg.min_separation) continue;
    top.push_back({static_cast<double>(x), sup_y});
    bottom.push_back({static_cast<double>(x), deep_y});
  }

  const double needed = cfg.min_span * w;
  if (static_cast<double>(top.size()) < needed) {
    throw Error(ErrorKind::registration_failed,
                "aponeurosis edges found in too few columns; try a lower tube sigma (e.g. 8)");
  }
  const LineFit sup = fit_line_robust(top, 0.0, w - 1.0);
  const LineFit deep = fit_line_robust(bottom, 0.0, w - 1.0);
  if (static_cast<double>(sup.kept) < needed || static_cast<double>(deep.kept) < needed) {
    throw Error(ErrorKind::registration_failed,
                "aponeurosis lines do not span the field of view; try a lower tube sigma (e.g. 8)");
  }
  for (const double x : {0.0, w - 1.0}) {
    const double gap = deep.line.y_at(x) - sup.line.y_at(x);
    if (gap < cfg.min_separation) {
      throw Error(ErrorKind::registration_failed,
                  "aponeuroses overlap or are closer than the minimum separation");
    }
  }
  if (sup.rms > cfg.max_fit_rms || deep.rms > cfg.max_fit_rms) {
    throw Error(ErrorKind::registration_failed, "aponeurosis edges are not straight enough");
  }
  return make_pair(sup.line, deep.line, sup.rms, deep.rms);
}

struct ExtrapolatedPoint {
  double y;
  bool extrapolated;
};

inline ExtrapolatedPoint extrapolate(const StraightLine& line, double x) {
  return {line.y_at(x), !line.in_domain(x)};
}

}  // namespace sma
