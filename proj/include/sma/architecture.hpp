#pragma once

// Pennation angle, fascicle length and muscle thickness from the registered
// aponeuroses and the dominant fascicle angle.
//
// Angles follow the line-angle convention of image.hpp: positive when the
// line rises toward the left of the image. With the proximal end on the
// left, fascicles are positive and a deep aponeurosis that is horizontal or
// descends to the left is <= 0, so the pennation angle (fascicle angle minus
// deep angle) is the sum of the two magnitudes.

#include <cmath>
#include <optional>
#include <string>

#include "sma/aponeurosis.hpp"
#include "sma/image.hpp"

namespace sma {

enum class ThicknessMode { perpendicular, vertical };

inline const char* to_string(ThicknessMode m) {
  return m == ThicknessMode::perpendicular ? "perpendicular" : "vertical";
}

struct GeometryConfig {
  double anchor_fraction = 0.95;  // composite fascicle anchored on the deep line at this x/W
  ThicknessMode thickness_mode = ThicknessMode::perpendicular;
  int thickness_samples = 100;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct ArchitectureResult {
  double pennation_deg = 0.0;
  double fascicle_len_px = 0.0;
  double thickness_px = 0.0;
  std::optional<double> fascicle_len_mm;
  std::optional<double> thickness_mm;
  std::optional<double> scale_mm_per_px;
  std::optional<double> depth_mm;
  bool extrapolated = false;
  StraightLine fascicle_line;
  Point fascicle_start;  // on the deep aponeurosis
  Point fascicle_end;    // on the (possibly extrapolated) superficial aponeurosis
  ThicknessMode thickness_mode = ThicknessMode::perpendicular;
};

/// Millimetres per pixel, given directly or from a scale bar of known length.
class ScaleSpec {
 public:
  static ScaleSpec from_mm_per_px(double mm_per_px) {
    if (!(mm_per_px > 0.0) || !std::isfinite(mm_per_px)) {
      throw Error(ErrorKind::parameter, "mm per pixel must be positive");
    }
    return ScaleSpec(mm_per_px);
  }
  static ScaleSpec from_scale_bar(double bar_px, double bar_mm) {
    if (!(bar_px > 0.0) || !(bar_mm > 0.0)) {
      throw Error(ErrorKind::parameter, "scale bar length must be positive in px and mm");
    }
    return ScaleSpec(bar_mm / bar_px);
  }
  double mm_per_px() const noexcept { return mm_per_px_; }

 private:
  explicit ScaleSpec(double v) : mm_per_px_(v) {}
  double mm_per_px_;
};

inline double pennation_angle(double fascicle_deg, const StraightLine& deep) {
  const double deep_deg = deep.angle_deg();
  if (!(std::abs(fascicle_deg) < 90.0)) {
    throw Error(ErrorKind::geometry, "fascicle angle must lie in (-90, 90) degrees");
  }
  const double p = fascicle_deg - deep_deg;
  if (!(p > 0.0 && p < 90.0)) {
    throw Error(ErrorKind::geometry,
                "pennation angle " + std::to_string(p) +
                    " deg outside (0, 90): fascicle parallel to or crossing under the deep aponeurosis");
  }
  return p;
}

struct FascicleLength {
  double length = 0.0;
  StraightLine line;
  bool extrapolated = false;
  Point start;
  Point end;
};

/// Straight composite fascicle from the deep line at x = anchor_fraction * W,
/// at the given angle, up to the superficial line (extended linearly if the
/// crossing falls outside the field of view).
inline FascicleLength fascicle_length(const AponeurosisPair& pair, double fascicle_deg,
                                      double fov_width, double anchor_fraction = 0.95) {
  const double m = slope_from_angle(fascicle_deg);
  const StraightLine& sup = pair.superficial;
  const Point p{anchor_fraction * fov_width, pair.deep.y_at(anchor_fraction * fov_width)};
  const double den = m - sup.slope;
  if (std::abs(den) < 1e-12) {
    throw Error(ErrorKind::geometry, "fascicle parallel to the superficial aponeurosis");
  }
  const double qx = (sup.intercept - p.y + m * p.x) / den;
  const auto q = extrapolate(sup, qx);
  FascicleLength out;
  out.start = p;
  out.end = {qx, q.y};
  out.length = std::hypot(qx - p.x, q.y - p.y);
  out.extrapolated = q.extrapolated;
  out.line = {m, p.y - m * p.x, std::min(p.x, qx), std::max(p.x, qx)};
  return out;
}

/// Mean distance between the aponeuroses over `samples` evenly spaced
/// columns spanning the field of view.
inline double muscle_thickness(const AponeurosisPair& pair, double fov_width, int samples = 100,
                               ThicknessMode mode = ThicknessMode::perpendicular) {
  if (samples < 1) throw Error(ErrorKind::parameter, "thickness needs at least one sample");
  const StraightLine& sup = pair.superficial;
  const double norm = std::sqrt(1.0 + sup.slope * sup.slope);
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double x = samples == 1 ? 0.5 * (fov_width - 1.0)
                                  : k * (fov_width - 1.0) / (samples - 1);
    const double yd = pair.deep.y_at(x);
    sum += mode == ThicknessMode::perpendicular ? std::abs(sup.slope * x - yd + sup.intercept) / norm
                                                : yd - sup.y_at(x);
  }
  return sum / samples;
}

inline ArchitectureResult compute_architecture(const AponeurosisPair& pair, double fascicle_deg,
                                               double fov_width, const GeometryConfig& cfg = {}) {
  ArchitectureResult r;
  r.pennation_deg = pennation_angle(fascicle_deg, pair.deep);
  const FascicleLength fl = fascicle_length(pair, fascicle_deg, fov_width, cfg.anchor_fraction);
  r.fascicle_len_px = fl.length;
  r.fascicle_line = fl.line;
  r.fascicle_start = fl.start;
  r.fascicle_end = fl.end;
  r.extrapolated = fl.extrapolated;
  r.thickness_px = muscle_thickness(pair, fov_width, cfg.thickness_samples, cfg.thickness_mode);
  r.thickness_mode = cfg.thickness_mode;
  return r;
}

/// Lengths converted to millimetres; angles untouched.
inline ArchitectureResult apply_scale(ArchitectureResult r, const ScaleSpec& scale,
                                      std::optional<double> depth_mm = std::nullopt) {
  const double k = scale.mm_per_px();
  if (!(k > 0.0)) throw Error(ErrorKind::parameter, "scale must be positive");
  r.fascicle_len_mm = r.fascicle_len_px * k;
  r.thickness_mm = r.thickness_px * k;
  r.scale_mm_per_px = k;
  r.depth_mm = depth_mm;
  return r;
}

}  // namespace sma
