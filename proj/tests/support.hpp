#pragma once

// Synthetic inputs and brute-force reference implementations shared by the
// unit tests. The references deliberately avoid the library's fast paths.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sma/image.hpp"

namespace sma::test {

/// 0.5 + 0.5 cos of the phase across stripes running at `angle_deg`
/// (line-angle convention: positive rises toward the left).
inline GrayImage grating(int w, int h, double angle_deg, double period, double phase = 0.0) {
  GrayImage g(w, h);
  const double a = deg_to_rad(angle_deg);
  const double nx = -std::sin(a), ny = std::cos(a);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g(x, y) = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (nx * x + ny * y) / period + phase);
  return g;
}

inline GrayImage noise_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  GrayImage img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

inline GrayImage add_gaussian_noise(GrayImage img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : img.pixels()) v = std::clamp(v + n(rng), 0.0, 1.0);
  return img;
}

inline double mean_of(const GrayImage& img) {
  double s = 0.0;
  for (double v : img.pixels()) s += v;
  return s / static_cast<double>(img.size());
}

inline double variance_of(const GrayImage& img) {
  const double m = mean_of(img);
  double s = 0.0;
  for (double v : img.pixels()) s += (v - m) * (v - m);
  return s / static_cast<double>(img.size());
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Median of the (2r+1)^2 reflect-padded window, by full sort.
inline double window_median(const GrayImage& img, int x, int y, int r) {
  std::vector<double> v;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) v.push_back(img.at_reflect(x + dx, y + dy));
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

/// Global histogram equalization on 256 levels: cumulative fraction of
/// pixels whose 8-bit level does not exceed the pixel's own.
inline GrayImage global_equalization(const GrayImage& img) {
  auto level = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int li = level(img.pixels()[i]);
    std::size_t below = 0;
    for (double v : img.pixels()) below += level(v) <= li;
    out.pixels()[i] = static_cast<double>(below) / static_cast<double>(img.size());
  }
  return out;
}

inline double histogram_entropy(const GrayImage& img) {
  std::vector<double> h(256, 0.0);
  for (double v : img.pixels()) h[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))] += 1;
  double e = 0.0;
  for (double c : h) {
    if (c <= 0) continue;
    const double p = c / static_cast<double>(img.size());
    e -= p * std::log2(p);
  }
  return e;
}

/// Bilinear sample with zero outside the image.
inline double bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int xi, int yi) {
    return xi >= 0 && yi >= 0 && xi < img.width() && yi < img.height() ? img(xi, yi) : 0.0;
  };
  return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
         fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
}

/// Orientation oracle independent of any gradient or tensor math: rotates a
/// central disc of the image by each candidate angle and scores how well
/// the rotated rows agree with themselves shifted along the row (row
/// autocorrelation at a lag of a few pixels). Stripes aligned with the rows
/// maximize it. Coarse 0.5 deg search, then 0.01 deg refinement.
inline double rotation_search_orientation(const GrayImage& img, double lo = -89.5, double hi = 90.0) {
  const double cx = 0.5 * (img.width() - 1), cy = 0.5 * (img.height() - 1);
  const double radius = 0.5 * std::min(img.width(), img.height()) - 3.0;
  const int half = static_cast<int>(radius / std::sqrt(2.0));
  constexpr int lag = 3;
  auto score = [&](double angle_deg) {
    // A line at angle a rises toward the left: direction (cos a, sin a) in y-down coordinates.
    const double a = deg_to_rad(angle_deg);
    const double ux = std::cos(a), uy = std::sin(a);
    const double vx = -uy, vy = ux;
    double s = 0.0, n = 0.0;
    for (int j = -half; j <= half; ++j) {
      for (int i = -half; i <= half - lag; ++i) {
        const double p = bilinear(img, cx + i * ux + j * vx, cy + i * uy + j * vy);
        const double q = bilinear(img, cx + (i + lag) * ux + j * vx, cy + (i + lag) * uy + j * vy);
        s += -(p - q) * (p - q);
        n += 1.0;
      }
    }
    return s / n;
  };
  double best = lo, best_score = -1e300;
  for (double a = lo; a <= hi; a += 0.5) {
    const double sc = score(a);
    if (sc > best_score) { best_score = sc; best = a; }
  }
  const double c = best;
  for (double a = c - 0.5; a <= c + 0.5; a += 0.01) {
    const double sc = score(a);
    if (sc > best_score) { best_score = sc; best = a; }
  }
  return best;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("sma_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sma::test
