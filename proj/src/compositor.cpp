#include "wrecksim/compositor.hpp"

#include <algorithm>
#include <array>
#include <iostream>

#include "wrecksim/image_io.hpp"

namespace wrecksim {

TerrainLibrary::TerrainLibrary(std::vector<TerrainTile> sources, std::size_t width, std::size_t height)
    : sources_(std::move(sources)), width_(width), height_(height) {
  if (sources_.empty()) throw DataError("terrain library is empty");
  for (const auto& s : sources_) {
    if (s.image.width() < width_ || s.image.height() < height_) {
      throw DataError("terrain '" + s.source_id + "' is smaller than the target size");
    }
  }
}

TerrainLibrary::Crop TerrainLibrary::sample_crop(Rng& rng) const {
  Crop c;
  c.source = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(sources_.size()) - 1));
  const GrayImage& img = sources_[c.source].image;
  c.u0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.width() - width_)));
  c.v0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.height() - height_)));
  return c;
}

TerrainTile TerrainLibrary::crop(const Crop& c) const {
  const TerrainTile& src = sources_.at(c.source);
  if (c.u0 + width_ > src.image.width() || c.v0 + height_ > src.image.height()) {
    throw DataError("terrain crop outside source image");
  }
  TerrainTile out{GrayImage(width_, height_), src.source_id, src.site};
  for (std::size_t v = 0; v < height_; ++v) {
    const auto in = src.image.row(c.v0 + v).subspan(c.u0, width_);
    std::copy(in.begin(), in.end(), out.image.row(v).begin());
  }
  return out;
}

TerrainLibrary load_terrain_library(const std::filesystem::path& dir, std::size_t width,
                                    std::size_t height) {
  if (!std::filesystem::is_directory(dir)) throw DataError("terrain directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<TerrainTile> tiles;
  std::vector<std::string> warnings;
  for (const auto& f : files) {
    GrayImage img;
    try {
      img = read_png(f);
    } catch (const DataError& e) {
      warnings.push_back(std::string("skipping unreadable terrain: ") + e.what());
      continue;
    }
    if (img.width() < width || img.height() < height) {
      warnings.push_back("skipping undersized terrain " + f.filename().string());
      continue;
    }
    const std::string stem = f.stem().string();
    tiles.push_back({std::move(img), stem, stem.substr(0, stem.find('_'))});
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  if (tiles.empty()) throw DataError("no usable terrain images in " + dir.string());
  TerrainLibrary lib(std::move(tiles), width, height);
  for (auto& w : warnings) lib.add_warning(std::move(w));
  return lib;
}

namespace {

/// Maps ship intensities onto the terrain's intensity distribution.
std::array<std::uint8_t, 256> histogram_lut(const GrayImage& fractured, const LabelMask& mask,
                                            const GrayImage& terrain) {
  std::array<double, 256> src{}, dst{};
  double ns = 0;
  for (std::size_t i = 0; i < fractured.size(); ++i) {
    if (mask[i]) {
      src[fractured[i]] += 1;
      ns += 1;
    }
  }
  for (std::size_t i = 0; i < terrain.size(); ++i) dst[terrain[i]] += 1;
  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  if (ns == 0) return lut;
  const double nt = static_cast<double>(terrain.size());
  double cs = 0, ct = 0;
  std::size_t j = 0;
  ct = dst[0] / nt;
  for (std::size_t i = 0; i < 256; ++i) {
    cs += src[i] / ns;
    while (j < 255 && ct < cs) {
      ++j;
      ct += dst[j] / nt;
    }
    lut[i] = static_cast<std::uint8_t>(j);
  }
  return lut;
}

}  // namespace

GrayImage composite(const GrayImage& fractured, const LabelMask& mask, const ShadowMask& shadow,
                    const TerrainTile& terrain, const CompositeOptions& opts) {
  require_same_shape(fractured, mask, "composite image/mask");
  require_same_shape(fractured, shadow, "composite image/shadow");
  require_same_shape(fractured, terrain.image, "composite image/terrain");
  if (!(opts.shadow_gain >= 0 && opts.shadow_gain <= 1)) throw DataError("shadow gain must lie in [0, 1]");

  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  if (opts.histogram_match) lut = histogram_lut(fractured, mask, terrain.image);

  const std::size_t w = fractured.width(), h = fractured.height();
  GrayImage out = terrain.image;
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const std::uint8_t t = terrain.image.at(u, v);
      if (mask.at(u, v)) {
        std::uint8_t s = lut[fractured.at(u, v)];
        if (opts.feather) {
          const bool edge = (u > 0 && !mask.at(u - 1, v)) || (u + 1 < w && !mask.at(u + 1, v)) ||
                            (v > 0 && !mask.at(u, v - 1)) || (v + 1 < h && !mask.at(u, v + 1));
          if (edge) s = static_cast<std::uint8_t>(round_half_up((s + t) / 2.0));
        }
        out.at(u, v) = s;
      } else if (shadow.at(u, v)) {
        out.at(u, v) = static_cast<std::uint8_t>(round_half_up(opts.shadow_gain * t));
      }
    }
  }
  return out;
}

std::vector<std::size_t> tile_offsets(std::size_t raw_height, std::size_t tile, std::size_t stride) {
  if (raw_height == 0) throw DataError("cannot tile an empty scan");
  if (tile == 0 || stride == 0) throw DataError("tile size and stride must be positive");
  if (raw_height < tile) return {0};
  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + tile <= raw_height; off += stride) offsets.push_back(off);
  return offsets;
}

std::vector<GrayImage> tile_scan(const GrayImage& raw, std::size_t tile, std::size_t stride) {
  if (raw.width() != tile) {
    throw DataError("tile_scan expects width " + std::to_string(tile) + ", got " +
                    std::to_string(raw.width()));
  }
  const std::size_t h = raw.height();
  std::vector<GrayImage> tiles;
  for (std::size_t off : tile_offsets(h, tile, stride)) {
    GrayImage t(tile, tile);
    for (std::size_t v = 0; v < tile; ++v) {
      // Symmetric mirror (..., r1, r0 | r0, r1, ...) with period 2h.
      std::size_t src = (off + v) % (2 * h);
      if (src >= h) src = 2 * h - 1 - src;
      const auto in = raw.row(src);
      std::copy(in.begin(), in.end(), t.row(v).begin());
    }
    tiles.push_back(std::move(t));
  }
  return tiles;
}

}  // namespace wrecksim
