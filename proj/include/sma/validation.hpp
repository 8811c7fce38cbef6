#pragma once

// Synthetic B-mode phantoms with closed-form ground truth, and Bland-Altman
// agreement statistics.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "sma/architecture.hpp"
#include "sma/filters.hpp"
#include "sma/image.hpp"

namespace sma {

struct PhantomSpec {
  int width = 512;
  int height = 512;
  double sup_angle = 0.0;
  double deep_angle = 0.0;
  double gap_at_right = 150.0;  // vertical band separation at x = 0.95 W
  double band_thickness = 8.0;
  double fascicle_angle = 20.0;
  double fascicle_spacing = 12.0;
  double fascicle_contrast = 0.3;
  double speckle_sigma = 0.2;
  double psf_sigma = 1.5;
  std::uint64_t seed = 1;
};

inline constexpr double kBandIntensity = 0.9;
inline constexpr double kBackground = 0.35;
inline constexpr double kPhantomAnchor = 0.95;
// Mean of ((1 + cos)/2)^3 over a period; the stripes are centered on the
// background so the muscle has the same mean level as the tissue around it.
inline constexpr double kStripeMean = 5.0 / 16.0;

/// Ground-truth aponeurosis centerlines of a phantom.
inline AponeurosisPair phantom_lines(const PhantomSpec& s) {
  const double xa = kPhantomAnchor * s.width;
  const double ys = 0.5 * (s.height - s.gap_at_right);
  const double yd = 0.5 * (s.height + s.gap_at_right);
  const double ms = slope_from_angle(s.sup_angle);
  const double md = slope_from_angle(s.deep_angle);
  const StraightLine sup{ms, ys - ms * xa, 0.0, s.width - 1.0};
  const StraightLine deep{md, yd - md * xa, 0.0, s.width - 1.0};
  return make_pair(sup, deep);
}

inline void validate(const PhantomSpec& s) {
  if (s.width < 32 || s.height < 32) throw Error(ErrorKind::parameter, "phantom canvas too small");
  if (!(s.band_thickness > 0.0) || !(s.fascicle_spacing > 1.0) || s.psf_sigma < 0.0 ||
      s.speckle_sigma < 0.0 || s.fascicle_contrast < 0.0 || s.fascicle_contrast > 1.0) {
    throw Error(ErrorKind::parameter, "phantom texture parameters out of range");
  }
  const double pennation = s.fascicle_angle - s.deep_angle;
  if (!(pennation > 5.0 && pennation < 45.0)) {
    throw Error(ErrorKind::parameter, "phantom pennation must lie in (5, 45) degrees");
  }
  const AponeurosisPair p = phantom_lines(s);
  const double margin = 0.5 * s.band_thickness + 2.0;
  for (const double x : {0.0, s.width - 1.0}) {
    if (p.superficial.y_at(x) - margin < 0.0 || p.deep.y_at(x) + margin > s.height - 1.0) {
      throw Error(ErrorKind::parameter, "phantom aponeuroses do not fit inside the canvas");
    }
    if (p.deep.y_at(x) - p.superficial.y_at(x) < 2.0 * margin) {
      throw Error(ErrorKind::parameter, "phantom aponeuroses overlap");
    }
  }
}

struct Phantom {
  GrayImage image;
  ArchitectureResult truth;
  AponeurosisPair lines;
  double clamped_fraction = 0.0;
};

/// Two bright bands along the aponeurosis lines, a periodic stripe texture
/// between them at the fascicle angle, Gaussian PSF, then multiplicative
/// log-normal speckle with unit mean. Stripe peaks are `fascicle_contrast`
/// above the troughs.
inline Phantom generate_phantom(const PhantomSpec& s) {
  validate(s);
  Phantom out;
  out.lines = phantom_lines(s);
  GeometryConfig geometry;
  geometry.anchor_fraction = kPhantomAnchor;
  out.truth = compute_architecture(out.lines, s.fascicle_angle, s.width, geometry);

  const auto& sup = out.lines.superficial;
  const auto& deep = out.lines.deep;
  const double sup_norm = std::sqrt(1.0 + sup.slope * sup.slope);
  const double deep_norm = std::sqrt(1.0 + deep.slope * deep.slope);
  const double phi = deg_to_rad(s.fascicle_angle);
  const double nx = -std::sin(phi), ny = std::cos(phi);
  const double half = 0.5 * s.band_thickness;

  GrayImage img(s.width, s.height);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double ds = (y - sup.y_at(x)) / sup_norm;
      const double dd = (y - deep.y_at(x)) / deep_norm;
      double base = kBackground;
      if (ds > 0.0 && dd < 0.0) {
        const double phase = 2.0 * std::numbers::pi * (nx * x + ny * y) / s.fascicle_spacing;
        const double stripe = std::pow(0.5 * (1.0 + std::cos(phase)), 3.0);
        base = kBackground + s.fascicle_contrast * (stripe - kStripeMean);
      }
      const double cover = std::max(std::clamp(half - std::abs(ds) + 0.5, 0.0, 1.0),
                                    std::clamp(half - std::abs(dd) + 0.5, 0.0, 1.0));
      img(x, y) = base * (1.0 - cover) + kBandIntensity * cover;
    }
  }
  if (s.psf_sigma > 0.0) img = gaussian_blur(img, s.psf_sigma);

  std::size_t clamped = 0;
  if (s.speckle_sigma > 0.0) {
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shift = 0.5 * s.speckle_sigma * s.speckle_sigma;
    for (double& v : img.pixels()) {
      v *= std::exp(s.speckle_sigma * normal(rng) - shift);
      if (v > 1.0 || v < 0.0) ++clamped;
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  out.clamped_fraction = static_cast<double>(clamped) / static_cast<double>(img.size());
  out.image = std::move(img);
  return out;
}

struct AgreementStats {
  double bias = 0.0;
  double sd_diff = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  std::size_t n = 0;
  double proportional_slope = 0.0;
};

inline constexpr double kLimitsOfAgreementZ = 1.96;

/// Differences a - b against means (a + b) / 2.
inline AgreementStats bland_altman(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw Error(ErrorKind::parameter, "Bland-Altman needs at least two pairs");
  const double n = static_cast<double>(pairs.size());
  double sd = 0.0, sm = 0.0;
  for (const auto& [a, b] : pairs) {
    sd += a - b;
    sm += 0.5 * (a + b);
  }
  const double bias = sd / n;
  const double mean_avg = sm / n;
  double var = 0.0, cov = 0.0, var_avg = 0.0;
  for (const auto& [a, b] : pairs) {
    const double d = a - b - bias;
    const double m = 0.5 * (a + b) - mean_avg;
    var += d * d;
    cov += d * m;
    var_avg += m * m;
  }
  AgreementStats s;
  s.n = pairs.size();
  s.bias = bias;
  s.sd_diff = std::sqrt(var / (n - 1.0));
  s.loa_low = bias - kLimitsOfAgreementZ * s.sd_diff;
  s.loa_high = bias + kLimitsOfAgreementZ * s.sd_diff;
  s.proportional_slope = var_avg > 0.0 ? cov / var_avg : 0.0;
  return s;
}

}  // namespace sma
