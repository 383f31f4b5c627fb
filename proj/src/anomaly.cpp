#include "wrecksim/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "wrecksim/image_io.hpp"
#include "wrecksim/rng.hpp"

namespace wrecksim {
namespace {

constexpr int kWindowRadius = 2;  // 5x5

std::size_t clamp_index(long long i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<long long>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

/// Separable 5-tap binomial blur followed by 2x decimation.
Grid<double> pyramid_down(const Grid<double>& src) {
  static constexpr double kTaps[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const std::size_t w = src.width(), h = src.height();
  Grid<double> tmp(w, h);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      double s = 0;
      for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * src.at(clamp_index(static_cast<long long>(u) + k, w), v);
      tmp.at(u, v) = s;
    }
  }
  Grid<double> out(std::max<std::size_t>(1, w / 2), std::max<std::size_t>(1, h / 2));
  for (std::size_t v = 0; v < out.height(); ++v) {
    for (std::size_t u = 0; u < out.width(); ++u) {
      double s = 0;
      for (int k = -2; k <= 2; ++k) {
        s += kTaps[k + 2] * tmp.at(2 * u, clamp_index(static_cast<long long>(2 * v) + k, h));
      }
      out.at(u, v) = s;
    }
  }
  return out;
}

/// 5x5 box mean with edge clamping.
Grid<double> box_mean(const Grid<double>& src) {
  const std::size_t w = src.width(), h = src.height();
  Grid<double> tmp(w, h), out(w, h);
  constexpr double kInv = 1.0 / (2 * kWindowRadius + 1);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      double s = 0;
      for (int k = -kWindowRadius; k <= kWindowRadius; ++k) s += src.at(clamp_index(static_cast<long long>(u) + k, w), v);
      tmp.at(u, v) = s * kInv;
    }
  }
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      double s = 0;
      for (int k = -kWindowRadius; k <= kWindowRadius; ++k) s += tmp.at(u, clamp_index(static_cast<long long>(v) + k, h));
      out.at(u, v) = s * kInv;
    }
  }
  return out;
}

FeatureMap level_features(const Grid<double>& img, std::size_t channels) {
  const std::size_t w = img.width(), h = img.height();
  auto px = [&](long long u, long long v) { return img.at(clamp_index(u, w), clamp_index(v, h)); };

  const Grid<double> mean = box_mean(img);
  // Two-pass variance so flat regions give exactly zero.
  Grid<double> sq(w, h);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      double s = 0;
      for (int dv = -kWindowRadius; dv <= kWindowRadius; ++dv) {
        for (int du = -kWindowRadius; du <= kWindowRadius; ++du) {
          const double d = px(static_cast<long long>(u) + du, static_cast<long long>(v) + dv) - mean.at(u, v);
          s += d * d;
        }
      }
      sq.at(u, v) = std::sqrt(s / 25.0);
    }
  }

  constexpr double kDiag = 0.35355339059327373;  // 1 / (2 sqrt 2)
  Grid<double> grad(w, h), e0(w, h), e45(w, h), e90(w, h), e135(w, h);
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const auto iu = static_cast<long long>(u), iv = static_cast<long long>(v);
      const double gx = 0.5 * (px(iu + 1, iv) - px(iu - 1, iv));
      const double gy = 0.5 * (px(iu, iv + 1) - px(iu, iv - 1));
      grad.at(u, v) = std::sqrt(gx * gx + gy * gy);
      e0.at(u, v) = std::abs(gx);
      e45.at(u, v) = kDiag * std::abs(px(iu + 1, iv + 1) - px(iu - 1, iv - 1));
      e90.at(u, v) = std::abs(gy);
      e135.at(u, v) = kDiag * std::abs(px(iu - 1, iv + 1) - px(iu + 1, iv - 1));
    }
  }
  const Grid<double> bank[kFeatureChannels] = {mean,           sq,           box_mean(grad), box_mean(e0),
                                               box_mean(e45), box_mean(e90), box_mean(e135)};

  FeatureMap out{w, h, channels, std::vector<double>(w * h * channels)};
  for (std::size_t i = 0; i < w * h; ++i) {
    for (std::size_t c = 0; c < channels; ++c) out.data[i * channels + c] = bank[c][i];
  }
  return out;
}

double norm(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

FeaturePyramid feature_pyramid(const GrayImage& image, const PyramidConfig& config) {
  if (config.levels < 1) throw DataError("pyramid needs at least one level");
  if (config.channels < 1 || config.channels > kFeatureChannels) {
    throw DataError("feature channels must be in [1, 7]");
  }
  const std::size_t min_side = std::size_t{1} << (config.levels - 1);
  if (image.width() < min_side || image.height() < min_side) {
    throw DataError("image too small for " + std::to_string(config.levels) + " pyramid levels");
  }
  Grid<double> level(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) level[i] = image[i] / 255.0;

  FeaturePyramid pyr;
  for (std::size_t l = 0; l < config.levels; ++l) {
    if (l > 0) level = pyramid_down(level);
    pyr.levels.push_back(level_features(level, config.channels));
  }
  return pyr;
}

std::vector<double> pool_level(const FeatureMap& level, PoolingMode mode, double trim_fraction) {
  if (mode == PoolingMode::kTrimmed && !(trim_fraction >= 0 && trim_fraction <= 0.5)) {
    throw DataError("trim fraction must lie in [0, 0.5]");
  }
  const std::size_t n = level.positions();
  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (mode == PoolingMode::kTrimmed) {
    const auto drop = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(n)));
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = norm({level.data.data() + i * level.channels, level.channels});
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    keep.resize(n - drop);
    std::sort(keep.begin(), keep.end());  // fixed summation order
  }
  std::vector<double> proto(level.channels, 0.0);
  for (std::size_t i : keep) {
    for (std::size_t c = 0; c < level.channels; ++c) proto[c] += level.data[i * level.channels + c];
  }
  for (double& p : proto) p /= static_cast<double>(keep.size());
  return proto;
}

Prototype terrain_prototype(const FeaturePyramid& pyramid, PoolingMode mode, double trim_fraction) {
  Prototype p;
  p.mode = mode;
  for (const auto& level : pyramid.levels) p.levels.push_back(pool_level(level, mode, trim_fraction));
  return p;
}

double cosine_distance(std::span<const double> prototype, std::span<const double> feature) {
  if (prototype.size() != feature.size()) throw DataError("prototype/feature channel mismatch");
  const double pn = norm(prototype);
  if (!(pn > 0)) throw DataError("zero-norm prototype: anomaly score undefined");
  const double fn = norm(feature);
  if (fn == 0) return 0.0;
  double d = 0;
  for (std::size_t c = 0; c < feature.size(); ++c) d += prototype[c] * feature[c];
  return std::clamp(1.0 - d / (pn * fn), 0.0, 2.0);
}

Grid<double> anomaly_map(std::span<const double> prototype, const FeatureMap& level) {
  if (prototype.size() != level.channels) throw DataError("prototype/feature channel mismatch");
  if (!(norm(prototype) > 0)) throw DataError("zero-norm prototype: anomaly score undefined");
  Grid<double> out(level.width, level.height);
  for (std::size_t v = 0; v < level.height; ++v) {
    for (std::size_t u = 0; u < level.width; ++u) out.at(u, v) = cosine_distance(prototype, level.at(u, v));
  }
  return out;
}

Grid<double> upsample_bilinear(const Grid<double>& src, std::size_t width, std::size_t height) {
  if (src.empty()) throw DataError("cannot resize an empty grid");
  Grid<double> out(width, height);
  const double sx = static_cast<double>(src.width()) / static_cast<double>(width);
  const double sy = static_cast<double>(src.height()) / static_cast<double>(height);
  auto coord = [](double x, std::size_t n, std::size_t& i0, std::size_t& i1, double& f) {
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(x));
    i1 = std::min(i0 + 1, n - 1);
    f = x - static_cast<double>(i0);
  };
  for (std::size_t v = 0; v < height; ++v) {
    std::size_t y0, y1;
    double fy;
    coord((static_cast<double>(v) + 0.5) * sy - 0.5, src.height(), y0, y1, fy);
    for (std::size_t u = 0; u < width; ++u) {
      std::size_t x0, x1;
      double fx;
      coord((static_cast<double>(u) + 0.5) * sx - 0.5, src.width(), x0, x1, fx);
      const double top = src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx;
      const double bottom = src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx;
      out.at(u, v) = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

Grid<double> AnomalyVolume::level(std::size_t i) const {
  Grid<double> out(width, height);
  for (std::size_t p = 0; p < width * height; ++p) out[p] = data[p * depth + i];
  return out;
}

Grid<double> AnomalyVolume::mean_score() const {
  Grid<double> out(width, height);
  for (std::size_t p = 0; p < width * height; ++p) {
    double s = 0;
    for (std::size_t l = 0; l < depth; ++l) s += data[p * depth + l];
    out[p] = s / static_cast<double>(depth);
  }
  return out;
}

void to_json(nlohmann::json& j, const AnomalyConfig& c) {
  j = nlohmann::json{{"levels", c.pyramid.levels},
                     {"channels", c.pyramid.channels},
                     {"trim_fraction", c.trim_fraction},
                     {"external_prototype", c.prototype.has_value()}};
  if (c.prototype) j["prototype"] = c.prototype->levels;
}

AnomalyVolume anomaly_volume(const GrayImage& image, const AnomalyConfig& config) {
  const FeaturePyramid pyr = feature_pyramid(image, config.pyramid);
  const Prototype proto =
      config.prototype ? *config.prototype : terrain_prototype(pyr, PoolingMode::kTrimmed, config.trim_fraction);
  if (proto.levels.size() != pyr.levels.size()) throw DataError("prototype level count mismatch");

  AnomalyVolume vol{image.width(), image.height(), pyr.levels.size(), {}};
  vol.data.assign(vol.width * vol.height * vol.depth, 0.0);
  for (std::size_t l = 0; l < vol.depth; ++l) {
    Grid<double> a = anomaly_map(proto.levels[l], pyr.levels[l]);
    if (!a.same_shape(vol.width, vol.height)) a = upsample_bilinear(a, vol.width, vol.height);
    for (std::size_t p = 0; p < vol.width * vol.height; ++p) {
      vol.data[p * vol.depth + l] = std::clamp(a[p], 0.0, 2.0);
    }
  }
  return vol;
}

double otsu_threshold(const Grid<double>& scores) {
  if (scores.empty()) throw DataError("otsu: empty score grid");
  const auto [lo_it, hi_it] = std::minmax_element(scores.data().begin(), scores.data().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return hi;
  constexpr std::size_t kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  const double scale = static_cast<double>(kBins) / (hi - lo);
  for (double s : scores.data()) {
    hist[std::min(kBins - 1, static_cast<std::size_t>((s - lo) * scale))] += 1;
  }
  const double total = static_cast<double>(scores.size());
  double sum_all = 0;
  for (std::size_t i = 0; i < kBins; ++i) sum_all += static_cast<double>(i) * hist[i];
  double w0 = 0, sum0 = 0, best = -1;
  std::size_t best_bin = 0;
  for (std::size_t t = 0; t + 1 < kBins; ++t) {
    w0 += hist[t];
    sum0 += static_cast<double>(t) * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return lo + static_cast<double>(best_bin + 1) / scale;
}

void remove_small_blobs(LabelMask& mask, std::size_t min_blob) {
  if (min_blob <= 1) return;
  const std::size_t w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::size_t> component, stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const std::size_t u = p % w, v = p / w;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const long long nu = static_cast<long long>(u) + du, nv = static_cast<long long>(v) + dv;
          if (nu < 0 || nv < 0 || nu >= static_cast<long long>(w) || nv >= static_cast<long long>(h)) continue;
          const std::size_t q = static_cast<std::size_t>(nv) * w + static_cast<std::size_t>(nu);
          if (mask[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    if (component.size() < min_blob) {
      for (std::size_t p : component) mask[p] = kTerrain;
    }
  }
}

LabelMask segment_from_anomaly(const AnomalyVolume& volume, double tau, std::size_t min_blob) {
  const Grid<double> score = volume.mean_score();
  LabelMask mask(volume.width, volume.height);
  for (std::size_t p = 0; p < score.size(); ++p) mask[p] = score[p] > tau ? kShipwreck : kTerrain;
  remove_small_blobs(mask, min_blob);
  return mask;
}

void write_anomaly_volume(const std::filesystem::path& dir, const AnomalyVolume& volume,
                          const AnomalyConfig& config, std::optional<double> tau) {
  std::filesystem::create_directories(dir);
  for (std::size_t l = 0; l < volume.depth; ++l) {
    GrayImage img(volume.width, volume.height);
    for (std::size_t p = 0; p < img.size(); ++p) {
      img[p] = static_cast<std::uint8_t>(std::clamp<long long>(round_half_up(volume.data[p * volume.depth + l] * 127.5), 0, 255));
    }
    write_png(dir / ("level_" + std::to_string(l + 1) + ".png"), img);
  }
  const nlohmann::json cfg = config;
  nlohmann::json side{{"depth", volume.depth},
                      {"width", volume.width},
                      {"height", volume.height},
                      {"config", cfg},
                      {"config_hash", fnv1a(cfg.dump())}};
  side["tau"] = tau ? nlohmann::json(*tau) : nlohmann::json(nullptr);
  std::ofstream out(dir / "anomaly.json");
  if (!out) throw DataError("cannot write anomaly sidecar in " + dir.string());
  out << side.dump(2) << '\n';
}

}  // namespace wrecksim
