#include <gtest/gtest.h>

#include <random>

#include "sma/validation.hpp"
#include "support.hpp"

using namespace sma;

TEST(Phantom, GroundTruthExample) {
  PhantomSpec spec;
  spec.speckle_sigma = 0.0;
  spec.psf_sigma = 0.0;
  const Phantom ph = generate_phantom(spec);
  EXPECT_NEAR(ph.truth.thickness_px, 150.0, 1e-9);
  EXPECT_NEAR(ph.truth.pennation_deg, 20.0, 1e-9);
  EXPECT_NEAR(ph.truth.fascicle_len_px, 150.0 / std::sin(deg_to_rad(20.0)), 1e-9);
  EXPECT_NEAR(ph.truth.fascicle_len_px, 438.57, 0.01);
  EXPECT_EQ(ph.clamped_fraction, 0.0);
}

TEST(Phantom, SeededDeterminism) {
  PhantomSpec spec;
  spec.seed = 42;
  const Phantom a = generate_phantom(spec);
  const Phantom b = generate_phantom(spec);
  ASSERT_EQ(a.image.size(), b.image.size());
  EXPECT_TRUE(std::equal(a.image.pixels().begin(), a.image.pixels().end(), b.image.pixels().begin()));
  spec.seed = 43;
  const Phantom c = generate_phantom(spec);
  EXPECT_FALSE(std::equal(a.image.pixels().begin(), a.image.pixels().end(), c.image.pixels().begin()));
}

TEST(Phantom, TiltedDeepPennation) {
  PhantomSpec spec;
  spec.deep_angle = -3.0;
  spec.fascicle_angle = 18.0;
  EXPECT_NEAR(generate_phantom(spec).truth.pennation_deg, 21.0, 1e-9);
}

TEST(Phantom, GapMeasuredAtAnchor) {
  PhantomSpec spec;
  spec.sup_angle = 2.0;
  spec.deep_angle = -4.0;
  const AponeurosisPair p = phantom_lines(spec);
  const double xa = 0.95 * spec.width;
  EXPECT_NEAR(p.deep.y_at(xa) - p.superficial.y_at(xa), spec.gap_at_right, 1e-9);
  EXPECT_NEAR(p.superficial.angle_deg(), 2.0, 1e-9);
  EXPECT_NEAR(p.deep.angle_deg(), -4.0, 1e-9);
}

TEST(Phantom, ParallelBandsSinIdentity) {
  for (double tilt : {-5.0, 0.0, 4.0})
    for (double fascicle : {12.0, 25.0, 35.0}) {
      PhantomSpec spec;
      spec.sup_angle = spec.deep_angle = tilt;
      spec.fascicle_angle = fascicle;
      const ArchitectureResult t = generate_phantom(spec).truth;
      EXPECT_NEAR(t.fascicle_len_px * std::sin(deg_to_rad(t.pennation_deg)), t.thickness_px,
                  1e-9 * t.thickness_px);
    }
}

TEST(Phantom, ClampFractionSmall) {
  for (double sigma : {0.1, 0.2, 0.3}) {
    PhantomSpec spec;
    spec.speckle_sigma = sigma;
    spec.seed = 9;
    const Phantom ph = generate_phantom(spec);
    std::size_t at_limit = 0;
    for (double v : ph.image.pixels()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      if (v == 1.0 || v == 0.0) ++at_limit;
    }
    EXPECT_NEAR(ph.clamped_fraction, static_cast<double>(at_limit) / ph.image.size(), 1e-12);
    EXPECT_LT(ph.clamped_fraction, 0.01) << sigma;
  }
}

TEST(Phantom, BandsBrighterThanMuscle) {
  PhantomSpec spec;
  spec.speckle_sigma = 0.0;
  const Phantom ph = generate_phantom(spec);
  const int x = 256;
  const int ys = static_cast<int>(std::lround(ph.lines.superficial.y_at(x)));
  const int yd = static_cast<int>(std::lround(ph.lines.deep.y_at(x)));
  EXPECT_GT(ph.image(x, ys), 0.8);
  EXPECT_GT(ph.image(x, yd), 0.8);
  EXPECT_LT(ph.image(x, (ys + yd) / 2), 0.7);
}

TEST(Phantom, InvalidSpecsRejected) {
  PhantomSpec spec;
  spec.gap_at_right = 600.0;
  EXPECT_THROW(generate_phantom(spec), Error);
  spec = {};
  spec.fascicle_angle = 60.0;
  EXPECT_THROW(generate_phantom(spec), Error);
  spec = {};
  spec.fascicle_angle = 3.0;
  EXPECT_THROW(generate_phantom(spec), Error);
}

TEST(BlandAltman, HandExample) {
  const AgreementStats s = bland_altman({{1.0, 2.0}, {2.0, 2.0}, {3.0, 4.0}});
  EXPECT_EQ(s.n, 3u);
  EXPECT_NEAR(s.bias, -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.bias, -0.6667, 1e-4);
  EXPECT_NEAR(s.sd_diff, std::sqrt(1.0 / 3.0), 1e-12);
  EXPECT_NEAR(s.sd_diff, 0.5774, 1e-4);
  EXPECT_NEAR(s.loa_low, -1.7983, 1e-4);
  EXPECT_NEAR(s.loa_high, 0.4650, 1e-4);
}

TEST(BlandAltman, IdenticalSeries) {
  const AgreementStats s = bland_altman({{1.0, 1.0}, {4.0, 4.0}, {2.5, 2.5}});
  EXPECT_EQ(s.bias, 0.0);
  EXPECT_EQ(s.sd_diff, 0.0);
  EXPECT_EQ(s.loa_low, 0.0);
  EXPECT_EQ(s.loa_high, 0.0);
}

TEST(BlandAltman, ConstantOffset) {
  std::vector<std::pair<double, double>> pairs;
  for (double a : {3.0, 7.5, 11.0, 20.0, 14.25}) pairs.emplace_back(a, a + 1.5);
  const AgreementStats s = bland_altman(pairs);
  EXPECT_NEAR(s.bias, -1.5, 1e-12);
  EXPECT_NEAR(s.proportional_slope, 0.0, 1e-12);
  EXPECT_NEAR(s.sd_diff, 0.0, 1e-12);
}

TEST(BlandAltman, ProportionalSlopeOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 40; ++i) {
    const double t = 10.0 + 2.0 * n(rng);
    pairs.emplace_back(1.1 * t + 0.1 * n(rng), t + 0.1 * n(rng));
  }
  // Least-squares slope of d on m, written out.
  double sm = 0.0, sd = 0.0, smm = 0.0, smd = 0.0;
  const double k = static_cast<double>(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double m = 0.5 * (a + b), d = a - b;
    sm += m;
    sd += d;
    smm += m * m;
    smd += m * d;
  }
  const double slope = (k * smd - sm * sd) / (k * smm - sm * sm);
  EXPECT_NEAR(bland_altman(pairs).proportional_slope, slope, 1e-9);
}

TEST(BlandAltman, Antisymmetric) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::vector<std::pair<double, double>> ab, ba;
  for (int i = 0; i < 12; ++i) {
    const double a = u(rng), b = u(rng);
    ab.emplace_back(a, b);
    ba.emplace_back(b, a);
  }
  const AgreementStats x = bland_altman(ab), y = bland_altman(ba);
  EXPECT_NEAR(x.bias, -y.bias, 1e-12);
  EXPECT_NEAR(x.sd_diff, y.sd_diff, 1e-12);
  EXPECT_NEAR(x.loa_low, -y.loa_high, 1e-12);
  EXPECT_NEAR(x.loa_high, -y.loa_low, 1e-12);
  EXPECT_LE(x.loa_low, x.bias);
  EXPECT_LE(x.bias, x.loa_high);
}

TEST(BlandAltman, NeedsTwoPairs) {
  try {
    bland_altman({{1.0, 2.0}});
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parameter);
  }
}
