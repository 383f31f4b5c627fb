#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wrecksim/compositor.hpp"
#include "wrecksim/deformation.hpp"
#include "wrecksim/scene.hpp"
#include "wrecksim/sonar_render.hpp"

namespace wrecksim {

struct PipelineConfig {
  std::size_t num_samples = 10000;
  std::size_t image_height = 1728;
  std::size_t image_width = 1728;
  double split_fraction = 0.8;
  bool real_terrain = true;     // RT
  bool ship_fracturing = true;  // SF
  SonarParams sonar;
  SeabedConfig seabed;
  DeformParams deform;
  RandomizationConfig randomization;
  CompositeOptions composite;
  std::filesystem::path mesh_dir;
  std::filesystem::path terrain_dir;
  std::filesystem::path output_dir;
  std::uint64_t master_seed = 0;
  /// Sample-level threads; 0 uses all hardware threads. Never affects output.
  unsigned workers = 0;
  /// Site tag written to the manifest; empty uses the terrain source's site.
  std::string site;

  /// Throws DataError on any out-of-domain value (paths are checked when used).
  void validate() const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Sonar pings/range bins follow the image size; swath bounds, along-track
/// spacing (one range bin), r_max (0.15 min(H, W)) and placement position
/// ranges (centre of the swath) are derived when not given.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& c);

/// Stable per-sample seed.
std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index);
std::string sample_id(std::size_t index);

/// Everything a sample produces, including intermediates useful for tests.
struct GeneratedSample {
  SyntheticSample sample;
  GrayImage rendered;   // I_s
  LabelMask render_mask;  // M before fracturing
  ShadowMask render_shadow;
  ShadowMask shadow;    // after fracturing
  TerrainTile terrain;  // T (clean, no ship)
  ScenePlacement placement;
  std::string site;
};

/// Shared read-only inputs for sample generation.
struct PipelineAssets {
  std::vector<TriangleMesh> meshes;
  std::optional<TerrainLibrary> terrain;
};

PipelineAssets load_assets(const PipelineConfig& config);

/// randomize_placement -> render_scan -> generate_quadrant_field (SF) ->
/// apply_field -> composite (real terrain when RT, else a rendered
/// ship-free seabed). Errors carry the sample index.
GeneratedSample generate_sample(const PipelineConfig& config, const PipelineAssets& assets, std::size_t index);

struct ManifestRecord {
  std::string id;
  std::string split;  // "train" | "val"
  std::string image, mask, deff, terrain;  // relative to the output dir
  std::string site;
  nlohmann::json provenance;
};

nlohmann::json to_json(const ManifestRecord& r);

/// Writes images/, masks/, fields/, terrain/ and manifest.jsonl under the
/// output dir. Aborts (DataError) when more than 1% of samples fail.
std::vector<ManifestRecord> generate_dataset(const PipelineConfig& config);

/// Train/val assignment: the round(N * fraction) ids with the smallest
/// seeded hash are train.
std::vector<std::string> assign_splits(const std::vector<std::string>& ids, double fraction,
                                       std::uint64_t master_seed);

}  // namespace wrecksim
