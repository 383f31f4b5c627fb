#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "wrecksim/anomaly.hpp"
#include "wrecksim/evalkit.hpp"
#include "wrecksim/procedural.hpp"

using namespace wrecksim;
using wrecksim::testing::planted_anomaly;
using wrecksim::testing::random_image;

TEST(Cosine, BoundsOnRandomPairs) {
  Rng rng(1);
  std::vector<double> a(7), b(7);
  for (int i = 0; i < 1000000; ++i) {
    for (int c = 0; c < 7; ++c) {
      a[c] = rng.uniform(-1, 1);
      b[c] = rng.uniform(-1, 1);
    }
    const double d = cosine_distance(a, b);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 2.0);
  }
}

TEST(Cosine, ScaleInvarianceAndExamples) {
  Rng rng(2);
  std::vector<double> a(5), b(5), sb(5);
  for (int i = 0; i < 1000; ++i) {
    const double k = rng.uniform(1e-3, 1e3);
    for (int c = 0; c < 5; ++c) {
      a[c] = rng.uniform(-1, 1);
      b[c] = rng.uniform(-1, 1);
      sb[c] = k * b[c];
    }
    EXPECT_NEAR(cosine_distance(a, b), cosine_distance(a, sb), 1e-9);
  }
  const std::vector<double> x{1, 0}, y{0, 1}, nx{-1, 0}, zero{0, 0};
  EXPECT_NEAR(cosine_distance(x, x), 0, 1e-15);
  EXPECT_NEAR(cosine_distance(x, y), 1, 1e-15);
  EXPECT_NEAR(cosine_distance(x, nx), 2, 1e-15);
  EXPECT_EQ(cosine_distance(x, zero), 0);
  EXPECT_THROW(cosine_distance(zero, x), DataError);
  EXPECT_THROW(cosine_distance(x, std::vector<double>{1, 2, 3}), DataError);
}

TEST(Features, PyramidShapesAndErrors) {
  Rng rng(3);
  const auto pyr = feature_pyramid(random_image(64, 48, rng));
  ASSERT_EQ(pyr.levels.size(), 3u);
  EXPECT_EQ(pyr.levels[1].width, 32u);
  EXPECT_EQ(pyr.levels[2].height, 12u);
  EXPECT_EQ(pyr.levels[0].channels, 7u);
  EXPECT_EQ(feature_pyramid(random_image(8, 8, rng), {1, 3}).levels[0].channels, 3u);
  EXPECT_THROW(feature_pyramid(random_image(8, 8, rng), {0, 7}), DataError);
  EXPECT_THROW(feature_pyramid(random_image(8, 8, rng), {2, 8}), DataError);
  EXPECT_THROW(feature_pyramid(random_image(3, 8, rng), {3, 7}), DataError);
}

TEST(Features, FlatImageHasOnlyMeanChannel) {
  GrayImage flat(32, 32);
  flat.data().assign(flat.size(), 102);
  for (const auto& level : feature_pyramid(flat).levels) {
    for (std::size_t p = 0; p < level.positions(); ++p) {
      const auto f = level.at(p % level.width, p / level.width);
      EXPECT_NEAR(f[kLocalMean], 0.4, 1e-12);
      for (std::size_t c = 1; c < 7; ++c) EXPECT_NEAR(f[c], 0.0, 1e-12);
    }
  }
}

TEST(Features, VerticalStripesExciteHorizontalEdgeChannel) {
  GrayImage img(32, 32);
  for (std::size_t v = 0; v < 32; ++v) {
    for (std::size_t u = 0; u < 32; ++u) img.at(u, v) = (u / 2) % 2 ? 200 : 40;
  }
  const FeaturePyramid pyr = feature_pyramid(img, {1, 7});
  const auto f = pyr.levels[0].at(16, 16);
  EXPECT_GT(f[kEdge0], 0.1);
  EXPECT_NEAR(f[kEdge90], 0.0, 1e-12);
  EXPECT_GT(f[kLocalStd], 0.1);
}

TEST(Pooling, MeanAndTrimmedRemovesPlantedOutliers) {
  FeatureMap level{10, 10, 3, {}};
  for (std::size_t i = 0; i < 100; ++i) level.data.insert(level.data.end(), {0.2, 0.3, 0.1});
  const auto clean = pool_level(level, PoolingMode::kMean);
  for (std::size_t i : {3u, 17u, 50u, 77u, 99u}) {
    level.data[i * 3] = 5;
    level.data[i * 3 + 1] = 9;
  }
  const auto trimmed = pool_level(level, PoolingMode::kTrimmed, 0.1);
  const auto mean = pool_level(level, PoolingMode::kMean);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(trimmed[c], clean[c], 1e-15);
  EXPECT_GT(mean[0], clean[0] + 0.1);
  EXPECT_THROW(pool_level(level, PoolingMode::kTrimmed, 0.6), DataError);
  const auto zero_trim = pool_level(level, PoolingMode::kTrimmed, 0.0);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(zero_trim[c], mean[c]);
}

TEST(Pooling, TrimTiesDropHigherIndexFirst) {
  FeatureMap level{4, 1, 1, {1, 3, 3, 2}};
  // floor(0.25 * 4) = 1 drop; positions 1 and 2 tie on norm, index 2 goes.
  EXPECT_DOUBLE_EQ(pool_level(level, PoolingMode::kTrimmed, 0.25)[0], 2.0);
  FeatureMap one{2, 1, 2, {1, 1, 1, 1}};
  EXPECT_DOUBLE_EQ(pool_level(one, PoolingMode::kTrimmed, 0.5)[0], 1.0);
}

TEST(Upsample, HalfPixelAlignment) {
  Grid<double> g(2, 1);
  g[0] = 0;
  g[1] = 1;
  const auto up = upsample_bilinear(g, 4, 1);
  EXPECT_DOUBLE_EQ(up[0], 0.0);
  EXPECT_DOUBLE_EQ(up[1], 0.25);
  EXPECT_DOUBLE_EQ(up[2], 0.75);
  EXPECT_DOUBLE_EQ(up[3], 1.0);
  Grid<double> c(3, 5);
  c.data().assign(15, 0.7);
  const auto flat = upsample_bilinear(c, 12, 20);
  for (double x : flat.data()) EXPECT_DOUBLE_EQ(x, 0.7);
  EXPECT_THROW(upsample_bilinear(Grid<double>(), 4, 4), DataError);
}

TEST(Volume, ShapeRangeAndConstantImage) {
  Rng rng(4);
  const auto vol = anomaly_volume(random_image(48, 40, rng));
  EXPECT_EQ(vol.depth, 3u);
  EXPECT_EQ(vol.data.size(), 48u * 40u * 3u);
  for (double x : vol.data) {
    ASSERT_GE(x, 0);
    ASSERT_LE(x, 2);
  }
  GrayImage flat(32, 32);
  flat.data().assign(flat.size(), 90);
  for (double x : anomaly_volume(flat).data) EXPECT_NEAR(x, 0, 1e-12);
  GrayImage black(32, 32);
  EXPECT_THROW(anomaly_volume(black), DataError);  // zero prototype
}

TEST(Volume, ExternalPrototypeIsUsed) {
  const GrayImage terrain = procedural_terrain(64, 64, 5);
  AnomalyConfig cfg;
  cfg.prototype = terrain_prototype(feature_pyramid(terrain), PoolingMode::kMean);
  const auto a = anomaly_volume(terrain, cfg);
  const auto b = anomaly_volume(terrain);
  EXPECT_NE(a.data, b.data);
  cfg.prototype->levels.pop_back();
  EXPECT_THROW(anomaly_volume(terrain, cfg), DataError);
}

TEST(Volume, PlantedAnomalySeparates) {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = planted_anomaly(128, seed);
    const auto score = anomaly_volume(a.image).mean_score();
    double in = 0, out = 0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t p = 0; p < score.size(); ++p) {
      if (a.mask[p]) {
        in += score[p];
        ++n_in;
      } else {
        out += score[p];
        ++n_out;
      }
    }
    passes += in / n_in >= 2 * out / n_out;
  }
  EXPECT_GE(passes, 18);
}

TEST(Segmentation, OtsuSplitsBimodalScores) {
  Grid<double> s(100, 1);
  for (std::size_t i = 0; i < 100; ++i) s[i] = i < 70 ? 0.1 + 0.001 * i : 0.8 + 0.001 * i;
  const double t = otsu_threshold(s);
  EXPECT_GT(t, 0.17);
  EXPECT_LT(t, 0.87);
  Grid<double> flat(4, 4);
  flat.data().assign(16, 0.3);
  EXPECT_EQ(otsu_threshold(flat), 0.3);
  EXPECT_THROW(otsu_threshold(Grid<double>()), DataError);
}

TEST(Segmentation, BlobRemovalUsesEightConnectivity) {
  LabelMask m(6, 6);
  m.at(0, 0) = m.at(1, 1) = m.at(2, 2) = 1;  // diagonal chain of 3
  m.at(5, 0) = 1;                            // singleton
  m.at(4, 4) = m.at(5, 4) = 1;               // pair
  auto k = m;
  remove_small_blobs(k, 3);
  EXPECT_EQ(k.count(), 3u);
  EXPECT_EQ(k.at(2, 2), 1);
  k = m;
  remove_small_blobs(k, 1);
  EXPECT_EQ(k, m);
}

TEST(Segmentation, PlantedAnomalyIsRecovered) {
  const auto a = planted_anomaly(128, 3);
  const auto vol = anomaly_volume(a.image);
  const LabelMask pred = segment_from_anomaly(vol, otsu_threshold(vol.mean_score()), 16);
  const ConfusionCounts c = confusion(pred, a.mask);
  // Window and pyramid support put a halo around the target, so recall is
  // high while IOU stays moderate.
  EXPECT_GT(static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn), 0.75);
  EXPECT_GT(metrics(c).iou_ship, 0.3);
}

TEST(Segmentation, WritesVolumeAndMetadata) {
  wrecksim::testing::TempDir dir("anomaly");
  Rng rng(6);
  const AnomalyConfig cfg;
  write_anomaly_volume(dir.path(), anomaly_volume(random_image(32, 32, rng), cfg), cfg, 0.25);
  for (const char* f : {"level_1.png", "level_2.png", "level_3.png", "anomaly.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto meta = nlohmann::json::parse(wrecksim::testing::read_file(dir / "anomaly.json"));
  EXPECT_EQ(meta.at("depth"), 3);
  EXPECT_EQ(meta.at("tau"), 0.25);
}
