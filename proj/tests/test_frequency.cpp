#include <gtest/gtest.h>

#include "sma/frequency.hpp"
#include "support.hpp"

using namespace sma;

namespace {

/// cos(2 pi (ku x / W + kv y / H)): energy exactly on bins (+/-ku, +/-kv).
GrayImage bin_grating(int w, int h, int ku, int kv, double amp = 0.5) {
  GrayImage g(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g(x, y) = 0.5 + amp * std::cos(2.0 * std::numbers::pi * (static_cast<double>(ku) * x / w +
                                                               static_cast<double>(kv) * y / h));
  return g;
}

std::vector<double> centered(const GrayImage& img) {
  const double m = test::mean_of(img);
  std::vector<double> v(img.pixels().begin(), img.pixels().end());
  for (double& x : v) x -= m;
  return v;
}

double padded_energy(const GrayImage& img) {
  double e = 0.0;
  for (double v : centered(img)) e += v * v;
  return e;
}

}  // namespace

TEST(Fft, ConstantGivesZeroSpectrum) {
  const Spectrum s = fft2(GrayImage(40, 24, 0.6));
  EXPECT_EQ(s.width, 64);
  EXPECT_EQ(s.height, 32);
  for (const auto& c : s.bins) EXPECT_LT(std::abs(c), 1e-9);
}

TEST(Fft, ImpulseGivesFlatMagnitude) {
  GrayImage img(64, 64);
  img(32, 32) = 1.0;
  const Spectrum s = fft2(img);
  for (int v = 0; v < 64; ++v)
    for (int u = 0; u < 64; ++u) {
      if (u == 32 && v == 32) {
        EXPECT_NEAR(std::abs(s(u, v)), 0.0, 1e-12);
      } else {
        EXPECT_NEAR(std::abs(s(u, v)), 1.0, 1e-12);
      }
    }
}

TEST(Fft, GratingPeaks) {
  const int f = 6;
  const Spectrum s = fft2(bin_grating(64, 32, f, 0));
  const double peak = 0.5 * 64 * 32 * 0.5;
  EXPECT_NEAR(std::abs(s(32 + f, 16)), peak, 1e-9);
  EXPECT_NEAR(std::abs(s(32 - f, 16)), peak, 1e-9);
  double rest = 0.0;
  for (int v = 0; v < 32; ++v)
    for (int u = 0; u < 64; ++u)
      if (!(v == 16 && (u == 32 + f || u == 32 - f))) rest += std::norm(s(u, v));
  EXPECT_LT(rest, 1e-12 * peak * peak);
}

TEST(Fft, RoundTripAndParseval) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const GrayImage img = test::noise_image(37 + static_cast<int>(seed) * 9, 50, seed);
    const Spectrum s = fft2(img);
    const double bins = static_cast<double>(s.width) * s.height;
    EXPECT_NEAR(s.energy(), bins * padded_energy(img), 1e-6 * s.energy());

    const RawInverse back = ifft2_raw(s);
    ASSERT_EQ(back.width, img.width());
    ASSERT_EQ(back.height, img.height());
    const auto want = centered(img);
    EXPECT_GE(test::correlation(back.real, want), 0.9999);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(back.real[i], want[i], 1e-12);
    EXPECT_LT(back.imag_energy, 1e-20 * back.real_energy);
  }
}

TEST(Ifft, ZeroedSpectrumIsConstant) {
  Spectrum s = fft2(test::noise_image(32, 32, 5));
  std::fill(s.bins.begin(), s.bins.end(), cplx{});
  const GrayImage out = ifft2(s);
  for (double v : out.pixels()) EXPECT_EQ(v, out(0, 0));
}

TEST(Ifft, ConjugatePairGivesGrating) {
  Spectrum s = fft2(GrayImage(64, 64, 0.5));
  const int ku = 5, kv = -3;
  s(32 + ku, 32 + kv) = cplx(1000.0, 0.0);
  s(32 - ku, 32 - kv) = cplx(1000.0, 0.0);
  const GrayImage out = ifft2(s);
  const GrayImage want = bin_grating(64, 64, ku, kv);
  EXPECT_GT(test::correlation(out.pixels(), want.pixels()), 0.999999);
  // The pair sits at the structure angle the grating helper would use.
  const double angle = bin_structure_angle(s, 32 + ku, 32 + kv);
  double expected = rad_to_deg(std::atan2(static_cast<double>(kv), ku)) - 90.0;
  while (expected <= -90.0) expected += 180.0;
  EXPECT_NEAR(angle, expected, 1e-9);
  EXPECT_NEAR(angle, 59.036, 1e-3);
}

TEST(Threshold, AutoKeepsGratingPeaks) {
  // Log-magnitudes of Gaussian noise bins follow a log-Rayleigh law, so
  // mean + 2 sd passes a noise bin with probability exp(-exp(2 pi / sqrt(6)
  // - gamma)) ~ 7e-4. Over many seeds the peaks always survive and stray
  // survivors stay at that rate.
  const int ku = 7, kv = 4;
  int stray = 0, total_bins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GrayImage img = test::add_gaussian_noise(bin_grating(64, 64, ku, kv, 0.3), 0.02, seed);
    const Spectrum full = fft2(img);
    const Spectrum s = threshold_spectrum(full, AutoThreshold{});
    double peak_energy = 0.0, stray_energy = 0.0;
    for (int v = 0; v < 64; ++v)
      for (int u = 0; u < 64; ++u) {
        ++total_bins;
        if (std::abs(s(u, v)) == 0.0) continue;
        const bool near_plus = std::abs(u - (32 + ku)) <= 1 && std::abs(v - (32 + kv)) <= 1;
        const bool near_minus = std::abs(u - (32 - ku)) <= 1 && std::abs(v - (32 - kv)) <= 1;
        if (near_plus || near_minus) {
          peak_energy += std::norm(s(u, v));
        } else {
          ++stray;
          stray_energy += std::norm(s(u, v));
        }
      }
    EXPECT_EQ(s(32 + ku, 32 + kv), full(32 + ku, 32 + kv));
    EXPECT_EQ(s(32 - ku, 32 - kv), full(32 - ku, 32 - kv));
    EXPECT_LT(stray_energy, 1e-3 * peak_energy);
  }
  const double expected = std::exp(-std::exp(2.0 * std::numbers::pi / std::sqrt(6.0) - std::numbers::egamma));
  EXPECT_LT(static_cast<double>(stray) / total_bins, 3.0 * expected);
}

TEST(Threshold, ManualExtremes) {
  const Spectrum s = fft2(test::noise_image(48, 40, 7));
  const Spectrum none = threshold_spectrum(s, ManualThreshold{0.0});
  for (std::size_t i = 0; i < s.bins.size(); ++i) {
    if (i == static_cast<std::size_t>(s.height / 2) * s.width + s.width / 2) {
      EXPECT_EQ(none.bins[i], cplx{});
    } else {
      EXPECT_EQ(none.bins[i], s.bins[i]);
    }
  }
  const Spectrum all = threshold_spectrum(s, ManualThreshold{100.0});
  for (const auto& c : all.bins) EXPECT_EQ(c, cplx{});
  EXPECT_THROW(threshold_spectrum(s, ManualThreshold{101.0}), Error);
  EXPECT_THROW(threshold_spectrum(s, ManualThreshold{-1.0}), Error);
}

TEST(Threshold, PreservesHermitianSymmetry) {
  const GrayImage img = test::add_gaussian_noise(test::grating(50, 45, 25.0, 8.0), 0.1, 8);
  for (const SpectrumThreshold mode : {SpectrumThreshold{AutoThreshold{}}, SpectrumThreshold{ManualThreshold{70.0}}}) {
    const RawInverse r = ifft2_raw(threshold_spectrum(fft2(img), mode));
    ASSERT_GT(r.real_energy, 0.0);
    EXPECT_LT(r.imag_energy, 1e-9 * r.real_energy);
  }
}

TEST(Wedge, SuppressesGratingEnergy) {
  // Bins (-7, 12) carry a structure at 30.26 deg.
  const Spectrum s = fft2(bin_grating(128, 128, -7, 12));
  EXPECT_NEAR(bin_structure_angle(s, 64 - 7, 64 + 12), 30.26, 0.01);
  const Spectrum out = wedge_mask(s, 30.0, 10.0, false);
  EXPECT_LT(out.energy(), 0.01 * s.energy());
}

TEST(Wedge, KeepHorizontalBars) {
  const int n = 128;
  GrayImage bars(n, n), mix(n, n);
  const GrayImage oblique = test::grating(n, n, 60.0, 9.0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      bars(x, y) = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * y / 16.0);
      mix(x, y) = 0.5 * bars(x, y) + 0.5 * oblique(x, y);
    }
  const RawInverse r = ifft2_raw(wedge_mask(fft2(mix), 0.0, 15.0, true));
  EXPECT_GE(test::correlation(r.real, bars.pixels()), 0.95);
}

TEST(Wedge, KeepAndSuppressAreComplementary) {
  const Spectrum s = fft2(test::noise_image(64, 64, 9));
  for (double center : {-40.0, 0.0, 25.0, 70.0}) {
    const double kept = wedge_mask(s, center, 20.0, true).energy();
    const double removed = wedge_mask(s, center, 20.0, false).energy();
    EXPECT_NEAR(kept + removed, s.energy(), 1e-9 * s.energy());
  }
}

TEST(Wedge, HermitianSymmetry) {
  const GrayImage img = test::noise_image(60, 50, 10);
  for (double center : {-60.0, -20.0, 0.0, 20.0, 45.0, 89.0})
    for (double taper : {0.0, 2.0})
      for (bool keep : {false, true}) {
        const RawInverse r = ifft2_raw(wedge_mask(fft2(img), center, 25.0, keep, taper));
        EXPECT_LT(r.imag_energy, 1e-9 * r.real_energy) << center << " " << taper << " " << keep;
      }
}

TEST(Wedge, RejectsBadHalfWidth) {
  const Spectrum s = fft2(GrayImage(16, 16));
  EXPECT_THROW(wedge_mask(s, 0.0, 0.0, true), Error);
  EXPECT_THROW(wedge_mask(s, 0.0, 90.0, true), Error);
}
