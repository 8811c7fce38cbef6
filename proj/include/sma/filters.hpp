#pragma once

// Spatial-domain filters. All of them use reflect padding at the borders
// and preserve image dimensions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "sma/image.hpp"

namespace sma {

struct FilterParams {
  double nlm_h = 0.08;
  int nlm_patch = 5;
  int nlm_search = 11;
  int median_radius = 2;
  int clahe_tile = 128;
  double clahe_clip = 3.0;
};

inline void validate(const FilterParams& p) {
  if (!(p.nlm_h > 0.0) || p.nlm_patch < 1 || p.nlm_search < 1 || p.median_radius < 1 ||
      p.clahe_tile < 8 || !(p.clahe_clip >= 1.0)) {
    throw Error(ErrorKind::parameter, "filter parameters out of range");
  }
  if (p.nlm_patch % 2 == 0 || p.nlm_search % 2 == 0) {
    throw Error(ErrorKind::parameter, "NLM patch and search sizes must be odd");
  }
  if (p.nlm_patch >= p.nlm_search) {
    throw Error(ErrorKind::parameter, "NLM patch must be smaller than the search window");
  }
}

/// Dense 2-D weight grid with odd dimensions, origin at its center.
struct Kernel2D {
  int width = 1;
  int height = 1;
  std::vector<double> weights{1.0};

  double operator()(int i, int j) const {
    return weights[static_cast<std::size_t>(j) * width + i];
  }

  static Kernel2D box(int size) {
    return {size, size,
            std::vector<double>(static_cast<std::size_t>(size) * size,
                                1.0 / (static_cast<double>(size) * size))};
  }
};

/// True discrete convolution (kernel flipped), reflect borders.
inline GrayImage convolve(const GrayImage& img, const Kernel2D& kernel,
                          bool normalize = false) {
  if (kernel.width % 2 == 0 || kernel.height % 2 == 0) {
    throw Error(ErrorKind::parameter, "kernel dimensions must be odd");
  }
  if (kernel.weights.size() != static_cast<std::size_t>(kernel.width) * kernel.height) {
    throw Error(ErrorKind::parameter, "kernel weight count does not match its dimensions");
  }
  const int cx = kernel.width / 2;
  const int cy = kernel.height / 2;
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int j = 0; j < kernel.height; ++j) {
        for (int i = 0; i < kernel.width; ++i) {
          acc += kernel(i, j) * img.at_reflect(x - (i - cx), y - (j - cy));
        }
      }
      out(x, y) = normalize ? std::clamp(acc, 0.0, 1.0) : acc;
    }
  }
  return out;
}

namespace detail {

/// Convolves every row with `k` (odd length, symmetric or not), reflect borders.
inline GrayImage convolve_rows(const GrayImage& img, std::span<const double> k) {
  const int r = static_cast<int>(k.size()) / 2;
  const int w = img.width();
  GrayImage out(w, img.height());
  std::vector<double> padded(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < img.height(); ++y) {
    auto src = img.row(y);
    for (int i = -r; i < w + r; ++i) padded[i + r] = src[reflect_index(i, w)];
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[r + t] * padded[x - t + r];
      dst[x] = acc;
    }
  }
  return out;
}

inline GrayImage convolve_cols(const GrayImage& img, std::span<const double> k) {
  const int r = static_cast<int>(k.size()) / 2;
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  std::vector<double> acc(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int t = -r; t <= r; ++t) {
      const double kw = k[r + t];
      auto src = img.row(reflect_index(y - t, h));
      for (int x = 0; x < w; ++x) acc[x] += kw * src[x];
    }
    std::copy(acc.begin(), acc.end(), out.row(y).begin());
  }
  return out;
}

inline GrayImage convolve_separable(const GrayImage& img, std::span<const double> kx,
                                    std::span<const double> ky) {
  return convolve_cols(convolve_rows(img, kx), ky);
}

/// Running box sum over a (2r+1)^2 window of a buffer already padded by r.
inline std::vector<double> box_sum_padded(const std::vector<double>& padded, int pw,
                                          int ph, int r) {
  const int w = pw - 2 * r;
  const int h = ph - 2 * r;
  std::vector<double> rows(static_cast<std::size_t>(w) * ph);
  for (int y = 0; y < ph; ++y) {
    const double* src = padded.data() + static_cast<std::size_t>(y) * pw;
    double s = 0.0;
    for (int i = 0; i < 2 * r + 1; ++i) s += src[i];
    double* dst = rows.data() + static_cast<std::size_t>(y) * w;
    dst[0] = s;
    for (int x = 1; x < w; ++x) {
      s += src[x + 2 * r] - src[x - 1];
      dst[x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    for (int t = 0; t < 2 * r + 1; ++t) {
      const double* src = rows.data() + static_cast<std::size_t>(y + t) * w;
      for (int x = 0; x < w; ++x) dst[x] += src[x];
    }
  }
  return out;
}

inline int quantize8(double v) {
  return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Sampled Gaussian truncated at 3 sigma, normalized to unit sum.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::parameter, "sigma must be positive");
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  return detail::convolve_separable(img, k, k);
}

inline GrayImage median_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw Error(ErrorKind::parameter, "median radius must be >= 1");
  const int n = 2 * radius + 1;
  std::vector<double> window(static_cast<std::size_t>(n) * n);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::size_t k = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) window[k++] = img.at_reflect(x + dx, y + dy);
      std::nth_element(window.begin(), mid, window.end());
      out(x, y) = *mid;
    }
  }
  return out;
}

/// Binarizes against the local median: 1 where the pixel is strictly above the
/// median of its window, 0 otherwise (ties go to 0). Intensities are compared
/// on the 8-bit grid so the window median can be tracked with a sliding
/// 256-bin histogram.
inline GrayImage local_median_threshold(const GrayImage& img, int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorKind::parameter, "threshold window must be odd and >= 3");
  }
  const int r = window / 2;
  const int w = img.width();
  const int h = img.height();
  const int rank = (window * window - 1) / 2;

  std::vector<std::uint8_t> q(img.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    q[i] = static_cast<std::uint8_t>(detail::quantize8(img.pixels()[i]));
  auto qat = [&](int x, int y) {
    return q[static_cast<std::size_t>(reflect_index(y, h)) * w + reflect_index(x, w)];
  };

  GrayImage out(w, h);
  std::array<int, 256> hist{};
  for (int y = 0; y < h; ++y) {
    hist.fill(0);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) ++hist[qat(dx, y + dy)];
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        for (int dy = -r; dy <= r; ++dy) {
          --hist[qat(x - 1 - r, y + dy)];
          ++hist[qat(x + r, y + dy)];
        }
      }
      int cum = 0;
      int median = 0;
      for (int b = 0; b < 256; ++b) {
        cum += hist[b];
        if (cum > rank) {
          median = b;
          break;
        }
      }
      out(x, y) = q[static_cast<std::size_t>(y) * w + x] > median ? 1.0 : 0.0;
    }
  }
  return out;
}

/// Contrast-limited adaptive histogram equalization on a grid of tiles of
/// roughly `clahe_tile` pixels, 256 bins, clip at `clahe_clip` times the
/// uniform bin height with the excess spread evenly, bilinear blending of
/// the per-tile mappings between tile centers.
inline GrayImage clahe(const GrayImage& img, const FilterParams& params) {
  if (params.clahe_tile < 8 || !(params.clahe_clip >= 1.0)) {
    throw Error(ErrorKind::parameter, "CLAHE tile must be >= 8 and clip >= 1");
  }
  constexpr int bins = 256;
  const int w = img.width();
  const int h = img.height();
  const int nx = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) / params.clahe_tile)));
  const int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) / params.clahe_tile)));
  auto tile_edge = [](int i, int n, int size) {
    return static_cast<int>(static_cast<long long>(i) * size / n);
  };

  std::vector<std::array<double, bins>> maps(static_cast<std::size_t>(nx) * ny);
  for (int ty = 0; ty < ny; ++ty) {
    for (int tx = 0; tx < nx; ++tx) {
      const int x0 = tile_edge(tx, nx, w), x1 = tile_edge(tx + 1, nx, w);
      const int y0 = tile_edge(ty, ny, h), y1 = tile_edge(ty + 1, ny, h);
      std::array<double, bins> hist{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) hist[detail::quantize8(img(x, y))] += 1.0;
      const double count = static_cast<double>(x1 - x0) * (y1 - y0);
      const double limit = params.clahe_clip * count / bins;
      double excess = 0.0;
      for (double& v : hist) {
        if (v > limit) {
          excess += v - limit;
          v = limit;
        }
      }
      const double share = excess / bins;
      auto& map = maps[static_cast<std::size_t>(ty) * nx + tx];
      double cum = 0.0;
      for (int b = 0; b < bins; ++b) {
        cum += hist[b] + share;
        map[b] = cum / count;
      }
    }
  }

  // Tile centers along each axis, for the bilinear blend.
  auto centers = [&](int n, int size) {
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      c[i] = 0.5 * (tile_edge(i, n, size) + tile_edge(i + 1, n, size) - 1);
    return c;
  };
  const auto cxs = centers(nx, w);
  const auto cys = centers(ny, h);
  auto locate = [](const std::vector<double>& c, double p, int& i0, int& i1, double& t) {
    const int n = static_cast<int>(c.size());
    if (p <= c.front()) { i0 = i1 = 0; t = 0.0; return; }
    if (p >= c.back()) { i0 = i1 = n - 1; t = 0.0; return; }
    i0 = 0;
    while (i0 + 1 < n && c[i0 + 1] <= p) ++i0;
    i1 = i0 + 1;
    t = (p - c[i0]) / (c[i1] - c[i0]);
  };

  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    int ty0, ty1;
    double fy;
    locate(cys, y, ty0, ty1, fy);
    for (int x = 0; x < w; ++x) {
      int tx0, tx1;
      double fx;
      locate(cxs, x, tx0, tx1, fx);
      const int b = detail::quantize8(img(x, y));
      auto m = [&](int tx, int ty) { return maps[static_cast<std::size_t>(ty) * nx + tx][b]; };
      const double top = (1 - fx) * m(tx0, ty0) + fx * m(tx1, ty0);
      const double bottom = (1 - fx) * m(tx0, ty1) + fx * m(tx1, ty1);
      out(x, y) = std::clamp((1 - fy) * top + fy * bottom, 0.0, 1.0);
    }
  }
  return out;
}

/// Median over the image of the unbiased 3x3 local variance. Used as the
/// noise-variance offset in non-local means.
inline double estimate_noise_variance(const GrayImage& img) {
  std::vector<double> vars(img.size());
  std::size_t k = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double s = 0.0, s2 = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = img.at_reflect(x + dx, y + dy);
          s += v;
          s2 += v * v;
        }
      vars[k++] = std::max(0.0, (s2 - s * s / 9.0) / 8.0);
    }
  }
  auto mid = vars.begin() + static_cast<std::ptrdiff_t>(vars.size() / 2);
  std::nth_element(vars.begin(), mid, vars.end());
  return *mid;
}

/// Pixelwise non-local means. For every offset in the search window the
/// squared difference image is box-filtered over the patch, so each offset
/// costs O(pixels).
inline GrayImage nlm_denoise(const GrayImage& img, const FilterParams& params) {
  validate(params);
  const int w = img.width();
  const int h = img.height();
  const int pr = params.nlm_patch / 2;
  const int sr = params.nlm_search / 2;
  const double offset = 2.0 * estimate_noise_variance(img);
  const double inv_h2 = 1.0 / (params.nlm_h * params.nlm_h);
  const double inv_patch = 1.0 / (static_cast<double>(params.nlm_patch) * params.nlm_patch);

  // The patch distance of offset -o at q equals that of +o at q - o, so
  // only half of the offsets are evaluated, over the image grown by the
  // search radius, and each weight is credited to both pixels of the pair.
  const int m = 2 * sr + pr;
  const int sw = w + 2 * m;
  std::vector<double> src(static_cast<std::size_t>(sw) * (h + 2 * m));
  for (int y = -m; y < h + m; ++y)
    for (int x = -m; x < w + m; ++x)
      src[static_cast<std::size_t>(y + m) * sw + (x + m)] = img.at_reflect(x, y);
  auto at = [&](int x, int y) { return src[static_cast<std::size_t>(y + m) * sw + (x + m)]; };

  const int ew = w + 2 * sr;  // weight grid covers [-sr, w + sr) x [-sr, h + sr)
  const int eh = h + 2 * sr;
  const int pw = ew + 2 * pr;
  const int ph = eh + 2 * pr;
  std::vector<double> diff(static_cast<std::size_t>(pw) * ph);
  std::vector<double> wgt(static_cast<std::size_t>(ew) * eh);
  // Self weight is exp(0) = 1.
  std::vector<double> weight_sum(img.size(), 1.0);
  std::vector<double> value_sum(img.pixels().begin(), img.pixels().end());
  // exp(-36) is below double rounding next to the unit self weight.
  constexpr double kNegligible = 36.0;

  for (int oy = 0; oy <= sr; ++oy) {
    for (int ox = -sr; ox <= sr; ++ox) {
      if (oy == 0 && ox <= 0) continue;
      for (int y = -sr - pr; y < h + sr + pr; ++y) {
        double* dst = diff.data() + static_cast<std::size_t>(y + sr + pr) * pw;
        for (int x = -sr - pr; x < w + sr + pr; ++x) {
          const double d = at(x, y) - at(x + ox, y + oy);
          dst[x + sr + pr] = d * d;
        }
      }
      const auto patch = detail::box_sum_padded(diff, pw, ph, pr);
      for (std::size_t i = 0; i < wgt.size(); ++i) {
        const double arg = std::max(patch[i] * inv_patch - offset, 0.0) * inv_h2;
        wgt[i] = arg < kNegligible ? std::exp(-arg) : 0.0;
      }
      for (int y = 0; y < h; ++y) {
        const double* fwd = wgt.data() + static_cast<std::size_t>(y + sr) * ew + sr;
        const double* back = wgt.data() + static_cast<std::size_t>(y + sr - oy) * ew + sr - ox;
        double* ws = weight_sum.data() + static_cast<std::size_t>(y) * w;
        double* vs = value_sum.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          ws[x] += fwd[x] + back[x];
          vs[x] += fwd[x] * at(x + ox, y + oy) + back[x] * at(x - ox, y - oy);
        }
      }
    }
  }
  GrayImage out(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels()[i] = value_sum[i] / weight_sum[i];
  return out;
}

/// Per-pixel Hessian eigen-decomposition, |lambda1| <= |lambda2|.
/// `ridge_angle` is the direction (degrees, image coordinates) of the
/// eigenvector belonging to lambda2, i.e. across a ridge.
struct HessianField {
  GrayImage lambda1;
  GrayImage lambda2;
  GrayImage ridge_angle;
};

struct Eigen2 {
  double small;       // smaller magnitude
  double large;       // larger magnitude
  double large_angle; // radians, eigenvector of `large`
};

/// Symmetric 2x2 [[a, b], [b, c]].
inline Eigen2 eigen_symmetric(double a, double b, double c) {
  const double mean = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  const double hi = mean + rad;
  const double lo = mean - rad;
  const double hi_angle = 0.5 * std::atan2(2.0 * b, a - c);
  if (std::abs(hi) >= std::abs(lo)) return {lo, hi, hi_angle};
  return {hi, lo, hi_angle + std::numbers::pi / 2};
}

/// Second derivatives by central differences of the sigma-blurred image,
/// scaled by sigma^2.
inline HessianField hessian_at_scale(const GrayImage& img, double sigma) {
  const GrayImage g = gaussian_blur(img, sigma);
  const int w = img.width();
  const int h = img.height();
  const double norm = sigma * sigma;
  HessianField f{GrayImage(w, h), GrayImage(w, h), GrayImage(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = g(x, y);
      const double dxx = g.at_reflect(x + 1, y) - 2 * c + g.at_reflect(x - 1, y);
      const double dyy = g.at_reflect(x, y + 1) - 2 * c + g.at_reflect(x, y - 1);
      const double dxy = 0.25 * (g.at_reflect(x + 1, y + 1) - g.at_reflect(x + 1, y - 1) -
                                 g.at_reflect(x - 1, y + 1) + g.at_reflect(x - 1, y - 1));
      const Eigen2 e = eigen_symmetric(norm * dxx, norm * dxy, norm * dyy);
      f.lambda1(x, y) = e.small;
      f.lambda2(x, y) = e.large;
      f.ridge_angle(x, y) = rad_to_deg(e.large_angle);
    }
  }
  return f;
}

/// Bright-ridge score |lambda2| where lambda2 < 0, rescaled by its maximum.
inline GrayImage tubeness(const GrayImage& img, double sigma) {
  const HessianField hf = hessian_at_scale(img, sigma);
  GrayImage out(img.width(), img.height());
  double peak = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double l2 = hf.lambda2.pixels()[i];
    const double v = l2 < 0.0 ? -l2 : 0.0;
    out.pixels()[i] = v;
    peak = std::max(peak, v);
  }
  // Responses at rounding level are treated as flat.
  if (peak <= 1e-12) return GrayImage(img.width(), img.height());
  for (double& v : out.pixels()) v /= peak;
  return out;
}

/// Canny edges: Gaussian smoothing, Sobel gradient, non-maximum suppression
/// along the gradient quantized to 4 directions, hysteresis with 8-connected
/// linking. `low`/`high` are fractions of the maximum gradient magnitude.
inline GrayImage canny_edges(const GrayImage& img, double sigma, double low, double high) {
  if (!(low >= 0.0 && low < high && high <= 1.0)) {
    throw Error(ErrorKind::parameter, "canny thresholds must satisfy 0 <= low < high <= 1");
  }
  const int w = img.width();
  const int h = img.height();
  const GrayImage g = gaussian_blur(img, sigma);

  GrayImage mag(w, h);
  std::vector<std::uint8_t> dir(img.size());
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto p = [&](int dx, int dy) { return g.at_reflect(x + dx, y + dy); };
      const double gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1) - p(-1, -1) - 2 * p(-1, 0) - p(-1, 1)) / 8.0;
      const double gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1) - p(-1, -1) - 2 * p(0, -1) - p(1, -1)) / 8.0;
      const double m = std::hypot(gx, gy);
      mag(x, y) = m;
      peak = std::max(peak, m);
      double a = rad_to_deg(std::atan2(gy, gx));
      if (a < 0) a += 180.0;
      dir[static_cast<std::size_t>(y) * w + x] =
          a < 22.5 || a >= 157.5 ? 0 : a < 67.5 ? 1 : a < 112.5 ? 2 : 3;
    }
  }
  GrayImage edges(w, h);
  if (peak <= 1e-12) return edges;

  static constexpr std::array<std::array<int, 2>, 4> step{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}}};
  std::vector<std::uint8_t> state(img.size(), 0);  // 0 none, 1 weak, 2 strong
  std::deque<std::pair<int, int>> queue;
  const double lo = low * peak;
  const double hi = high * peak;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (m <= 0.0 || m < lo) continue;
      const auto [sx, sy] = step[dir[static_cast<std::size_t>(y) * w + x]];
      const double before = mag(reflect_index(x - sx, w), reflect_index(y - sy, h));
      const double after = mag(reflect_index(x + sx, w), reflect_index(y + sy, h));
      // Asymmetric comparison keeps exactly one pixel of a two-pixel plateau.
      if (!(m > before && m >= after)) continue;
      const bool strong = m >= hi;
      state[static_cast<std::size_t>(y) * w + x] = strong ? 2 : 1;
      if (strong) queue.emplace_back(x, y);
    }
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    edges(x, y) = 1.0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        auto& s = state[static_cast<std::size_t>(ny) * w + nx];
        if (s == 1) {
          s = 2;
          queue.emplace_back(nx, ny);
        }
      }
    }
  }
  return edges;
}

}  // namespace sma
