#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "wrecksim/deformation.hpp"

using namespace wrecksim;
using wrecksim::testing::random_image;
using wrecksim::testing::random_mask;

namespace {

DeformParams params64() {
  DeformParams p;
  p.max_displacement = default_max_displacement(64, 64);
  return p;
}

DeformationField random_field(std::size_t w, std::size_t h, const DeformParams& p, Rng& rng) {
  DeformationField f = identity_field(w, h, p);
  for (auto& b : f.bins.data()) {
    b.magnitude = static_cast<std::uint8_t>(rng.uniform_int(0, p.magnitude_bins - 1));
    b.angle = static_cast<std::uint8_t>(rng.uniform_int(0, p.angle_bins - 1));
  }
  f.origin_u = static_cast<std::uint32_t>(rng.uniform_int(0, static_cast<std::int64_t>(w) - 1));
  f.origin_v = static_cast<std::uint32_t>(rng.uniform_int(0, static_cast<std::int64_t>(h) - 1));
  return f;
}

// Straightforward splat written independently of apply_field.
FracturedScan warp_oracle(const GrayImage& img, const LabelMask& mask, const ShadowMask& shadow,
                          const DeformationField& f) {
  const long long w = static_cast<long long>(img.width()), h = static_cast<long long>(img.height());
  FracturedScan out{GrayImage(img.width(), img.height()), LabelMask(img.width(), img.height()),
                    ShadowMask(img.width(), img.height())};
  const double r_step = f.params.magnitude_bins > 1 ? f.params.max_displacement / (f.params.magnitude_bins - 1) : 0;
  for (long long v = 0; v < h; ++v) {
    for (long long u = 0; u < w; ++u) {
      const DeformBin b = f.bins.at(u, v);
      const double r = b.magnitude * r_step;
      const double t = 2 * M_PI * b.angle / f.params.angle_bins;
      const long long tu = u + static_cast<long long>(std::floor(r * std::cos(t) + 0.5));
      const long long tv = v + static_cast<long long>(std::floor(r * std::sin(t) + 0.5));
      if (tu < 0 || tv < 0 || tu >= w || tv >= h) continue;
      if (mask.at(u, v)) {
        out.image.at(tu, tv) = std::max(out.image.at(tu, tv), img.at(u, v));
        out.mask.at(tu, tv) = 1;
      } else if (shadow.at(u, v)) {
        out.shadow.at(tu, tv) = 1;
      }
    }
  }
  for (long long v = 0; v < h; ++v) {
    for (long long u = 0; u < w; ++u) {
      if (out.mask.at(u, v)) out.shadow.at(u, v) = 0;
    }
  }
  return out;
}

LabelMask block_mask(std::size_t w, std::size_t h, std::size_t u0, std::size_t v0, std::size_t bw, std::size_t bh) {
  LabelMask m(w, h);
  for (std::size_t v = v0; v < v0 + bh; ++v) {
    for (std::size_t u = u0; u < u0 + bw; ++u) m.at(u, v) = 1;
  }
  return m;
}

}  // namespace

TEST(DeformBins, BinCentres) {
  DeformParams p;
  p.max_displacement = 18;
  EXPECT_EQ(bin_to_value(0, 0, p).r, 0);
  EXPECT_DOUBLE_EQ(bin_to_value(9, 0, p).r, 18);
  EXPECT_DOUBLE_EQ(bin_to_value(3, 0, p).r, 6);
  EXPECT_DOUBLE_EQ(bin_to_value(0, 5, p).theta, M_PI / 2);
  EXPECT_DOUBLE_EQ(bin_to_value(0, 10, p).theta, M_PI);
  EXPECT_THROW(bin_to_value(10, 0, p), DataError);
  EXPECT_THROW(bin_to_value(0, 20, p), DataError);
  p.magnitude_bins = 1;
  EXPECT_EQ(bin_to_value(0, 3, p).r, 0);
}

TEST(DeformBins, PixelOffsets) {
  DeformParams p;
  p.max_displacement = 9;
  EXPECT_EQ(pixel_offset({9, 0}, p), (std::pair<long long, long long>{9, 0}));
  EXPECT_EQ(pixel_offset({9, 5}, p), (std::pair<long long, long long>{0, 9}));
  EXPECT_EQ(pixel_offset({9, 10}, p), (std::pair<long long, long long>{-9, 0}));
  EXPECT_EQ(pixel_offset({9, 15}, p), (std::pair<long long, long long>{0, -9}));
  EXPECT_EQ(pixel_offset({0, 7}, p), (std::pair<long long, long long>{0, 0}));
}

TEST(DeformBins, DefaultMaxDisplacement) {
  EXPECT_FLOAT_EQ(default_max_displacement(1728, 1728), 259.2f);
  EXPECT_FLOAT_EQ(default_max_displacement(64, 100), 9.6f);
}

TEST(DeformBins, ParamsValidation) {
  DeformParams p;
  EXPECT_THROW(p.validate(), DataError);  // r_max not set
  p.max_displacement = 5;
  EXPECT_NO_THROW(p.validate());
  p.magnitude_bins = 0;
  EXPECT_THROW(p.validate(), DataError);
  p.magnitude_bins = 300;
  EXPECT_THROW(p.validate(), DataError);
  p.magnitude_bins = 10;
  p.min_magnitude_bin = 4;
  p.max_magnitude_bin = 3;
  EXPECT_THROW(p.validate(), DataError);
}

TEST(QuadrantField, OneBinPerQuadrantAboutRoundedCentroid) {
  const LabelMask m = block_mask(64, 64, 10, 20, 21, 11);  // centroid (20, 25)
  Rng rng(3);
  const auto f = generate_quadrant_field(m, params64(), rng);
  EXPECT_EQ(f.origin_u, 20u);
  EXPECT_EQ(f.origin_v, 25u);
  for (std::size_t v = 0; v < 64; ++v) {
    for (std::size_t u = 0; u < 64; ++u) {
      if (!m.at(u, v)) {
        EXPECT_EQ(f.bins.at(u, v), (DeformBin{0, 0}));
        continue;
      }
      const std::size_t ru = u >= 20 ? 30 : 10, rv = v >= 25 ? 30 : 20;
      EXPECT_EQ(f.bins.at(u, v), f.bins.at(ru, rv));
    }
  }
  // Replaying the draw order reproduces the quadrant values.
  Rng replay(3);
  const std::pair<std::size_t, std::size_t> corners[] = {{10, 20}, {30, 20}, {10, 30}, {30, 30}};
  for (auto [u, v] : corners) {
    const auto mag = replay.uniform_int(0, 9);
    const auto ang = replay.uniform_int(0, 19);
    EXPECT_EQ(f.bins.at(u, v), (DeformBin{static_cast<std::uint8_t>(mag), static_cast<std::uint8_t>(ang)}));
  }
}

TEST(QuadrantField, CentroidHalfRoundsUp) {
  const LabelMask m = block_mask(8, 8, 2, 2, 2, 2);  // centroid (2.5, 2.5)
  Rng rng(1);
  const auto f = generate_quadrant_field(m, params64(), rng);
  EXPECT_EQ(f.origin_u, 3u);
  EXPECT_EQ(f.origin_v, 3u);
}

TEST(QuadrantField, GoldenFieldSeedSeven) {
  const LabelMask m = block_mask(64, 64, 12, 18, 36, 22);
  Rng rng(7);
  const auto f = generate_quadrant_field(m, params64(), rng);
  EXPECT_EQ(fnv1a(encode_deff(f)), 5858145475125823468ull);
}

TEST(QuadrantField, EmptyMaskRejectedAndSeedsReproduce) {
  Rng rng(1);
  EXPECT_THROW(generate_quadrant_field(LabelMask(16, 16), params64(), rng), DataError);
  const LabelMask m = block_mask(32, 32, 4, 4, 20, 10);
  Rng a(42), b(42), c(43);
  const auto fa = generate_quadrant_field(m, params64(), a);
  EXPECT_EQ(fa, generate_quadrant_field(m, params64(), b));
  EXPECT_NE(fa, generate_quadrant_field(m, params64(), c));
}

TEST(QuadrantField, MagnitudeRangeIsRespected) {
  DeformParams p = params64();
  p.min_magnitude_bin = 0;
  p.max_magnitude_bin = 0;
  Rng rng(5);
  const auto f = generate_quadrant_field(block_mask(32, 32, 4, 4, 20, 10), p, rng);
  for (const auto& b : f.bins.data()) EXPECT_EQ(b.magnitude, 0);
}

TEST(OneHot, ChannelSumIsTwoAndRoundTrips) {
  Rng rng(17);
  const DeformParams p = params64();
  for (int i = 0; i < 50; ++i) {
    const auto f = random_field(24, 16, p, rng);
    const OneHotField oh = encode_onehot(f);
    ASSERT_EQ(oh.channels(), 30);
    for (std::size_t v = 0; v < 16; ++v) {
      for (std::size_t u = 0; u < 24; ++u) {
        float s = 0;
        for (int c = 0; c < oh.channels(); ++c) s += oh.at(u, v, c);
        ASSERT_EQ(s, 2.0f);
      }
    }
    EXPECT_EQ(decode_onehot(oh, p).bins, f.bins);
  }
}

TEST(OneHot, SoftDecodeTakesArgmaxLowestOnTies) {
  DeformParams p;
  p.magnitude_bins = 3;
  p.angle_bins = 2;
  p.max_displacement = 1;
  OneHotField oh{1, 1, 3, 2, {0.2f, 0.5f, 0.3f, 0.5f, 0.5f}};
  EXPECT_EQ(decode_onehot(oh, p).bins.at(0, 0), (DeformBin{1, 0}));
  p.angle_bins = 3;
  EXPECT_THROW(decode_onehot(oh, p), DataError);
}

TEST(Deff, RoundTripsRandomFields) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    DeformParams p;
    p.magnitude_bins = static_cast<int>(rng.uniform_int(1, 32));
    p.angle_bins = static_cast<int>(rng.uniform_int(1, 64));
    p.max_displacement = static_cast<float>(rng.uniform(0.5, 300));
    const auto f = random_field(static_cast<std::size_t>(rng.uniform_int(1, 40)),
                                static_cast<std::size_t>(rng.uniform_int(1, 40)), p, rng);
    ASSERT_EQ(decode_deff(encode_deff(f)), f);
  }
}

TEST(Deff, LayoutIsLittleEndian) {
  DeformParams p;
  p.max_displacement = 1.0;
  auto f = identity_field(3, 2, p);
  f.bins.at(2, 1) = {4, 7};
  const std::string b = encode_deff(f);
  ASSERT_EQ(b.size(), 32u + 12u);
  EXPECT_EQ(b.substr(0, 4), "DEFF");
  EXPECT_EQ(b[4], 3);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[12], 10);
  EXPECT_EQ(b[16], 20);
  EXPECT_EQ(static_cast<unsigned char>(b[23]), 0x3f);  // 1.0f = 0x3f800000
  EXPECT_EQ(b[42], 4);
  EXPECT_EQ(b[43], 7);
}

TEST(Deff, CorruptInputsRejected) {
  DeformParams p;
  p.max_displacement = 1.0;
  std::string b = encode_deff(identity_field(4, 4, p));
  EXPECT_THROW(decode_deff("XXXX" + b.substr(4)), DataError);
  EXPECT_THROW(decode_deff(b.substr(0, 20)), DataError);
  EXPECT_THROW(decode_deff(b.substr(0, b.size() - 1)), DataError);
  b[32] = 11;  // magnitude bin beyond N_r
  EXPECT_THROW(decode_deff(b), DataError);
  EXPECT_THROW(read_deff("/nonexistent/x.deff"), DataError);
}

TEST(Deff, FileRoundTrip) {
  wrecksim::testing::TempDir dir("deff");
  Rng rng(2);
  const auto f = random_field(10, 7, params64(), rng);
  write_deff(dir / "sub/f.deff", f);
  EXPECT_EQ(read_deff(dir / "sub/f.deff"), f);
}

TEST(Warp, IdentityFieldIsBitExact) {
  Rng rng(4);
  const GrayImage img = random_image(40, 30, rng);
  const LabelMask m = random_mask(40, 30, rng, 0.3);
  ShadowMask s(40, 30);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = !m[i] && rng.uniform() < 0.2;
  const auto out = apply_field(img, m, s, identity_field(40, 30, params64()));
  EXPECT_EQ(out.mask, m);
  EXPECT_EQ(out.shadow, s);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.image[i], m[i] ? img[i] : 0);
}

TEST(Warp, MatchesBruteForceOracle) {
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    const GrayImage img = random_image(64, 64, rng);
    const LabelMask m = random_mask(64, 64, rng, 0.4);
    ShadowMask s(64, 64);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = !m[k] && rng.uniform() < 0.3;
    const auto f = random_field(64, 64, params64(), rng);
    const auto got = apply_field(img, m, s, f);
    const auto want = warp_oracle(img, m, s, f);
    ASSERT_EQ(got.image, want.image) << i;
    ASSERT_EQ(got.mask, want.mask) << i;
    ASSERT_EQ(got.shadow, want.shadow) << i;
  }
}

TEST(Warp, UniformFieldTranslatesShip) {
  DeformParams p;
  p.max_displacement = 9;
  const LabelMask m = block_mask(32, 32, 5, 5, 6, 4);
  GrayImage img(32, 32);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(i % 251);
  auto f = identity_field(32, 32, p);
  for (std::size_t i = 0; i < f.bins.size(); ++i) {
    if (m[i]) f.bins[i] = {3, 0};  // r = 3 along +u
  }
  const auto out = apply_field(img, m, ShadowMask(32, 32), f);
  EXPECT_EQ(out.mask.count(), m.count());
  for (std::size_t v = 5; v < 9; ++v) {
    for (std::size_t u = 5; u < 11; ++u) EXPECT_EQ(out.image.at(u + 3, v), img.at(u, v));
  }
}

TEST(Warp, OffImagePixelsDropAndShapeChecked) {
  DeformParams p;
  p.max_displacement = 20;
  const LabelMask m = block_mask(16, 16, 12, 0, 4, 4);
  auto f = identity_field(16, 16, p);
  for (auto& b : f.bins.data()) b = {9, 0};
  const auto out = apply_field(GrayImage(16, 16), m, ShadowMask(16, 16), f);
  EXPECT_EQ(out.mask.count(), 0u);
  EXPECT_THROW(apply_field(GrayImage(16, 15), m, ShadowMask(16, 16), f), DataError);
}

TEST(Warp, QuadrantFractureNeverGrowsShip) {
  Rng rng(12);
  for (int i = 0; i < 30; ++i) {
    const LabelMask m = block_mask(64, 64, 16, 20, 30, 14);
    Rng frng(static_cast<std::uint64_t>(i));
    const auto f = generate_quadrant_field(m, params64(), frng);
    const auto out = apply_field(random_image(64, 64, rng), m, ShadowMask(64, 64), f);
    EXPECT_LE(out.mask.count(), m.count());
    EXPECT_GT(out.mask.count(), 0u);
  }
}
