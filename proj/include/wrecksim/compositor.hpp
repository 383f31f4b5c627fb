#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wrecksim/deformation.hpp"
#include "wrecksim/grid.hpp"
#include "wrecksim/rng.hpp"

namespace wrecksim {

struct TerrainTile {
  GrayImage image;
  std::string source_id;
  std::string site;
};

/// Real terrain scans served as deterministic random crops.
class TerrainLibrary {
 public:
  TerrainLibrary(std::vector<TerrainTile> sources, std::size_t width, std::size_t height);

  std::size_t size() const { return sources_.size(); }
  const std::vector<TerrainTile>& sources() const { return sources_; }
  /// Files skipped at load time (too small or unreadable).
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  struct Crop {
    std::size_t source = 0;
    std::size_t u0 = 0;
    std::size_t v0 = 0;
  };
  /// Picks a source uniformly, then an offset uniformly in
  /// [0, w - target_w] x [0, h - target_h].
  Crop sample_crop(Rng& rng) const;
  TerrainTile crop(const Crop& c) const;
  TerrainTile sample(Rng& rng) const { return crop(sample_crop(rng)); }

 private:
  std::vector<TerrainTile> sources_;
  std::vector<std::string> warnings_;
  std::size_t width_;
  std::size_t height_;
};

/// Loads every PNG in `dir` (sorted by name). Images smaller than the
/// target are skipped with a warning; throws if nothing usable remains.
/// The site tag is the file stem up to the first '_' (or the whole stem).
TerrainLibrary load_terrain_library(const std::filesystem::path& dir, std::size_t width,
                                    std::size_t height);

struct CompositeOptions {
  double shadow_gain = 0.25;
  /// Average ship and terrain on the 1-pixel ship boundary.
  bool feather = false;
  /// Match the ship's intensity histogram to the terrain tile first.
  bool histogram_match = false;
};

/// S = I_f on M_f, round(gain * T) on shadow-only pixels, T elsewhere.
GrayImage composite(const GrayImage& fractured, const LabelMask& mask, const ShadowMask& shadow,
                    const TerrainTile& terrain, const CompositeOptions& opts = {});

struct Provenance {
  std::string mesh;
  std::string terrain;
  std::uint64_t sample_seed = 0;
  bool real_terrain = true;
  bool ship_fracturing = true;
};

struct SyntheticSample {
  GrayImage image;  // S
  LabelMask mask;   // M_f
  DeformationField field;
  Provenance provenance;
};

inline constexpr std::size_t kScanTileSize = 1728;
inline constexpr std::size_t kScanTileStride = 100;

/// Sliding-window tiling of a raw scan whose width equals `tile`. Scans
/// shorter than the tile yield one tile padded by mirror reflection.
std::vector<GrayImage> tile_scan(const GrayImage& raw, std::size_t tile = kScanTileSize,
                                 std::size_t stride = kScanTileStride);

/// Row offsets tile_scan uses for a scan of the given height.
std::vector<std::size_t> tile_offsets(std::size_t raw_height, std::size_t tile = kScanTileSize,
                                      std::size_t stride = kScanTileStride);

}  // namespace wrecksim
