#pragma once

// 2-D FFT on power-of-two grids, power-spectrum thresholding and directional
// (wedge) masking.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

#include "sma/image.hpp"

namespace sma {

using cplx = std::complex<double>;

/// Centered spectrum: the DC bin sits at (width/2, height/2).
struct Spectrum {
  int width = 0;
  int height = 0;
  std::vector<cplx> bins;
  bool dc_centered = true;
  int source_width = 0;   // image dimensions before zero padding
  int source_height = 0;

  cplx& operator()(int u, int v) { return bins[static_cast<std::size_t>(v) * width + u]; }
  const cplx& operator()(int u, int v) const {
    return bins[static_cast<std::size_t>(v) * width + u];
  }

  /// Frequency (cycles per pixel) of bin (u, v).
  double freq_x(int u) const { return static_cast<double>(u - width / 2) / width; }
  double freq_y(int v) const { return static_cast<double>(v - height / 2) / height; }

  /// Bin holding the complex conjugate partner of (u, v).
  int conj_u(int u) const { return (width - u) % width; }
  int conj_v(int v) const { return (height - v) % height; }

  double energy() const {
    double e = 0.0;
    for (const auto& c : bins) e += std::norm(c);
    return e;
  }
};

namespace detail {

inline int next_pow2(int n) { return static_cast<int>(std::bit_ceil(static_cast<unsigned>(n))); }

/// In-place iterative radix-2 transform of a contiguous line. `twiddle`
/// holds exp(-2 pi i k / n) for k < n / 2.
inline void fft1d(cplx* data, int n, const std::vector<cplx>& twiddle, bool inverse) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? -1.0 : 1.0;
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    const int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < half; ++k) {
        const cplx t = twiddle[static_cast<std::size_t>(k) * step];
        const double wr = t.real(), wi = sign * t.imag();
        const cplx b = data[i + k + half];
        const cplx bw(b.real() * wr - b.imag() * wi, b.real() * wi + b.imag() * wr);
        const cplx a = data[i + k];
        data[i + k] = a + bw;
        data[i + k + half] = a - bw;
      }
    }
  }
}

inline std::vector<cplx> twiddles(int n) {
  std::vector<cplx> t(static_cast<std::size_t>(std::max(1, n / 2)));
  for (int k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * k / n;
    t[static_cast<std::size_t>(k)] = {std::cos(a), std::sin(a)};
  }
  return t;
}

inline void fft2d(std::vector<cplx>& grid, int w, int h, bool inverse) {
  const auto tw = twiddles(w);
  for (int y = 0; y < h; ++y) fft1d(grid.data() + static_cast<std::ptrdiff_t>(y) * w, w, tw, inverse);
  const auto th = twiddles(h);
  std::vector<cplx> column(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) column[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
    fft1d(column.data(), h, th, inverse);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = column[static_cast<std::size_t>(y)];
  }
}

/// Swaps quadrants; for even dimensions this is its own inverse.
inline void shift_quadrants(std::vector<cplx>& grid, int w, int h) {
  std::vector<cplx> out(grid.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[static_cast<std::size_t>((y + h / 2) % h) * w + (x + w / 2) % w] =
          grid[static_cast<std::size_t>(y) * w + x];
  grid.swap(out);
}

/// Angular distance between two orientations (mod 180), degrees.
inline double orientation_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

}  // namespace detail

/// Mean-subtracts, zero-pads to the next power of two on each axis and
/// returns the centered DFT (unnormalized forward transform).
inline Spectrum fft2(const GrayImage& img) {
  Spectrum s;
  s.width = detail::next_pow2(img.width());
  s.height = detail::next_pow2(img.height());
  s.source_width = img.width();
  s.source_height = img.height();
  s.bins.assign(static_cast<std::size_t>(s.width) * s.height, cplx{});
  double mean = 0.0;
  for (double v : img.pixels()) mean += v;
  mean /= static_cast<double>(img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) s(x, y) = img(x, y) - mean;
  detail::fft2d(s.bins, s.width, s.height, false);
  detail::shift_quadrants(s.bins, s.width, s.height);
  return s;
}

/// Inverse transform cropped back to the source dimensions, before any
/// intensity rescale. `imag_energy` is the energy left in the imaginary part.
struct RawInverse {
  std::vector<double> real;
  int width = 0;
  int height = 0;
  double real_energy = 0.0;
  double imag_energy = 0.0;
};

inline RawInverse ifft2_raw(const Spectrum& spec) {
  std::vector<cplx> grid = spec.bins;
  detail::shift_quadrants(grid, spec.width, spec.height);
  detail::fft2d(grid, spec.width, spec.height, true);
  const double scale = 1.0 / (static_cast<double>(spec.width) * spec.height);
  RawInverse out;
  out.width = spec.source_width;
  out.height = spec.source_height;
  out.real.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const cplx c = grid[static_cast<std::size_t>(y) * spec.width + x] * scale;
      out.real[static_cast<std::size_t>(y) * out.width + x] = c.real();
      out.real_energy += c.real() * c.real();
      out.imag_energy += c.imag() * c.imag();
    }
  }
  return out;
}

/// Real part of the inverse transform, cropped and rescaled to [0,1].
inline GrayImage ifft2(const Spectrum& spec) {
  RawInverse raw = ifft2_raw(spec);
  return rescale_to_unit(GrayImage(raw.width, raw.height, std::move(raw.real)));
}

struct AutoThreshold {
  double k = 2.0;  // T = mean + k * stddev of log-magnitudes
};
struct ManualThreshold {
  double percentile = 50.0;  // in [0, 100]
};
using SpectrumThreshold = std::variant<AutoThreshold, ManualThreshold>;

/// Zeroes bins whose log-magnitude falls below the threshold; the DC bin is
/// always zeroed. Conjugate partners are decided jointly.
inline Spectrum threshold_spectrum(Spectrum spec, const SpectrumThreshold& mode) {
  if (const auto* m = std::get_if<ManualThreshold>(&mode)) {
    if (!(m->percentile >= 0.0 && m->percentile <= 100.0)) {
      throw Error(ErrorKind::parameter, "manual spectrum threshold must be a percentile in [0,100]");
    }
  }
  const int dcu = spec.width / 2;
  const int dcv = spec.height / 2;
  spec(dcu, dcv) = cplx{};

  std::vector<double> mag(spec.bins.size());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const cplx c = spec.bins[i];
    mag[i] = std::sqrt(c.real() * c.real() + c.imag() * c.imag());
  }
  // Log of the mean magnitude of each conjugate pair, so both members share a fate.
  std::vector<double> pair_log(spec.bins.size());
  std::vector<double> logs;
  logs.reserve(spec.bins.size());
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * spec.width + u;
      const std::size_t j = static_cast<std::size_t>(spec.conj_v(v)) * spec.width + spec.conj_u(u);
      const double m = 0.5 * (mag[i] + mag[j]);
      pair_log[i] = m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
      if (m > 0.0) logs.push_back(pair_log[i]);
    }
  if (logs.empty()) return spec;

  double threshold = 0.0;
  bool zero_all = false;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AutoThreshold>) {
          double mean = 0.0;
          for (double l : logs) mean += l;
          mean /= static_cast<double>(logs.size());
          double var = 0.0;
          for (double l : logs) var += (l - mean) * (l - mean);
          var /= static_cast<double>(logs.size());
          threshold = mean + m.k * std::sqrt(var);
        } else {
          if (m.percentile >= 100.0) {
            zero_all = true;
            return;
          }
          std::sort(logs.begin(), logs.end());
          const double pos = m.percentile / 100.0 * static_cast<double>(logs.size() - 1);
          const auto lo = static_cast<std::size_t>(std::floor(pos));
          const std::size_t hi = std::min(lo + 1, logs.size() - 1);
          threshold = logs[lo] + (pos - static_cast<double>(lo)) * (logs[hi] - logs[lo]);
        }
      },
      mode);

  if (zero_all) {
    std::fill(spec.bins.begin(), spec.bins.end(), cplx{});
    return spec;
  }
  std::vector<char> drop(spec.bins.size(), 0);
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u)
      drop[static_cast<std::size_t>(v) * spec.width + u] =
          pair_log[static_cast<std::size_t>(v) * spec.width + u] < threshold;
  for (std::size_t i = 0; i < drop.size(); ++i)
    if (drop[i]) spec.bins[i] = cplx{};
  return spec;
}

/// Spatial orientation (degrees, line-angle convention) whose energy lands
/// in bin (u, v). A structure at angle a puts its energy along a + 90 deg.
inline double bin_structure_angle(const Spectrum& spec, int u, int v) {
  const double fx = spec.freq_x(u);
  const double fy = spec.freq_y(v);
  double a = rad_to_deg(std::atan2(fy, fx)) - 90.0;
  while (a <= -90.0) a += 180.0;
  while (a > 90.0) a -= 180.0;
  return a;
}

/// Keeps (keep = true) or zeroes (keep = false) the bins carrying spatial
/// structures oriented within +/- half_width of center_angle. An optional
/// raised-cosine taper of `taper` degrees softens the wedge edge. The DC bin
/// counts as outside the wedge.
inline Spectrum wedge_mask(Spectrum spec, double center_angle, double half_width, bool keep,
                           double taper = 0.0) {
  if (!(half_width > 0.0 && half_width < 90.0)) {
    throw Error(ErrorKind::parameter, "wedge half width must lie in (0, 90) degrees");
  }
  const int dcu = spec.width / 2;
  const int dcv = spec.height / 2;
  auto weight = [&](int u, int v) {
    if (u == dcu && v == dcv) return 0.0;
    const double d = detail::orientation_distance(bin_structure_angle(spec, u, v), center_angle);
    if (taper > 0.0) {
      const double t = std::clamp((d - (half_width - 0.5 * taper)) / taper, 0.0, 1.0);
      return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
    return d <= half_width ? 1.0 : 0.0;
  };
  for (int v = 0; v < spec.height; ++v) {
    for (int u = 0; u < spec.width; ++u) {
      // Nyquist rows/columns have no +/- twin on the grid, so both members of
      // a conjugate pair take the weight of the lower-indexed member.
      const int cu = spec.conj_u(u);
      const int cv = spec.conj_v(v);
      const bool canonical = v < cv || (v == cv && u <= cu);
      const double inside = canonical ? weight(u, v) : weight(cu, cv);
      spec(u, v) *= keep ? inside : 1.0 - inside;
    }
  }
  return spec;
}

}  // namespace sma
