#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wrecksim/grid.hpp"

namespace wrecksim {

/// W x H x C real feature grid, channel-last.
struct FeatureMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  std::span<const double> at(std::size_t u, std::size_t v) const {
    return {data.data() + (v * width + u) * channels, channels};
  }
  std::span<double> at(std::size_t u, std::size_t v) {
    return {data.data() + (v * width + u) * channels, channels};
  }
  std::size_t positions() const { return width * height; }
};

/// Level 0 is full resolution; level i is the image blurred and decimated i times.
struct FeaturePyramid {
  std::vector<FeatureMap> levels;
};

/// Filter-bank channel order.
enum FeatureChannel : std::size_t {
  kLocalMean = 0,
  kLocalStd = 1,
  kGradientMagnitude = 2,
  kEdge0 = 3,    // horizontal derivative
  kEdge45 = 4,
  kEdge90 = 5,   // vertical derivative
  kEdge135 = 6,
  kFeatureChannels = 7,
};

struct PyramidConfig {
  std::size_t levels = 3;    // D_l
  std::size_t channels = 7;  // C, first C filter-bank channels
};

/// Deterministic multi-scale features: local mean, local std, gradient
/// magnitude and four oriented edge energies, each over a 5x5 window on a
/// binomial Gaussian pyramid of the image scaled to [0, 1].
FeaturePyramid feature_pyramid(const GrayImage& image, const PyramidConfig& config = {});

enum class PoolingMode { kMean, kTrimmed };

struct Prototype {
  std::vector<std::vector<double>> levels;  // one C-vector per level
  PoolingMode mode = PoolingMode::kMean;
};

/// Global average pooling per level. kTrimmed first drops the
/// floor(q * N) positions with the largest feature norm (ties: higher index
/// dropped first); q must lie in [0, 0.5].
Prototype terrain_prototype(const FeaturePyramid& pyramid, PoolingMode mode, double trim_fraction = 0.1);
std::vector<double> pool_level(const FeatureMap& level, PoolingMode mode, double trim_fraction = 0.1);

/// Cosine distance 1 - <p, f> / (|p| |f|), in [0, 2]. Zero-norm features
/// score 0. Throws DataError for a zero-norm prototype.
double cosine_distance(std::span<const double> prototype, std::span<const double> feature);

/// Per-position cosine distance of one level against its prototype.
Grid<double> anomaly_map(std::span<const double> prototype, const FeatureMap& level);

/// Bilinear resize with half-pixel-centre alignment (pixel centres at
/// i + 0.5, edges clamped).
Grid<double> upsample_bilinear(const Grid<double>& src, std::size_t width, std::size_t height);

struct AnomalyVolume {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t depth = 0;
  std::vector<double> data;  // (v * width + u) * depth + level

  double at(std::size_t u, std::size_t v, std::size_t level) const {
    return data[(v * width + u) * depth + level];
  }
  double& at(std::size_t u, std::size_t v, std::size_t level) {
    return data[(v * width + u) * depth + level];
  }
  Grid<double> level(std::size_t i) const;
  /// Mean over depth per pixel.
  Grid<double> mean_score() const;
};

struct AnomalyConfig {
  PyramidConfig pyramid;
  double trim_fraction = 0.1;
  /// Use a prototype supplied by the caller (e.g. pooled from a clean
  /// terrain tile) instead of trimmed pooling on the input image.
  std::optional<Prototype> prototype;
};

void to_json(nlohmann::json& j, const AnomalyConfig& c);

AnomalyVolume anomaly_volume(const GrayImage& image, const AnomalyConfig& config = {});

/// Otsu threshold of a score grid (256-bin histogram over [min, max]).
double otsu_threshold(const Grid<double>& scores);

/// mask = mean-over-depth score > tau, then 8-connected components smaller
/// than min_blob pixels are removed.
LabelMask segment_from_anomaly(const AnomalyVolume& volume, double tau, std::size_t min_blob);

/// Removes 8-connected foreground components with fewer than min_blob pixels.
void remove_small_blobs(LabelMask& mask, std::size_t min_blob);

/// One PNG per level (score * 127.5, clamped) plus anomaly.json holding
/// depth, tau and a hash of the config.
void write_anomaly_volume(const std::filesystem::path& dir, const AnomalyVolume& volume,
                          const AnomalyConfig& config, std::optional<double> tau);

}  // namespace wrecksim
