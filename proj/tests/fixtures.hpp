#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "wrecksim/grid.hpp"
#include "wrecksim/pipeline.hpp"
#include "wrecksim/rng.hpp"
#include "wrecksim/scene.hpp"
#include "wrecksim/sonar_render.hpp"

namespace wrecksim::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path asset_dir();

/// Axis-aligned box, footprint centred on the origin, bottom at z = 0.
TriangleMesh box_mesh(double lx, double ly, double lz);

LabelMask random_mask(std::size_t w, std::size_t h, Rng& rng, double p = 0.5);
GrayImage random_image(std::size_t w, std::size_t h, Rng& rng);

/// Shadow interval of a long box seen from the sensor track, measured on
/// the render and predicted by similar triangles.
struct ShadowCase {
  double altitude;
  double box_height;
  double near_edge;  // ground range of the near face
  double width;      // across-track extent
};
struct ShadowMeasurement {
  long long first_bin = -1, last_bin = -1;  // measured on the centre ping
  long long oracle_first = 0, oracle_last = 0;
};
ShadowMeasurement measure_shadow(const ShadowCase& c);

/// Config rooted in `out`: bundled meshes, procedural terrain written to
/// out/terrain_src when `real_terrain`, `size` x `size` images.
PipelineConfig small_config(const std::filesystem::path& out, std::size_t size, std::size_t samples,
                            bool real_terrain, std::uint64_t seed = 7);

/// Writes `count` procedural terrain PNGs named <site>_<k>.png.
void write_terrain_dir(const std::filesystem::path& dir, std::size_t count, std::size_t w, std::size_t h,
                       std::uint64_t seed, const std::string& site = "sitea");

/// Procedural terrain with a bright textured rectangle planted at a seeded
/// position; the mask marks the rectangle.
struct PlantedAnomaly {
  GrayImage image;
  LabelMask mask;
};
PlantedAnomaly planted_anomaly(std::size_t size, std::uint64_t seed);

std::string read_file(const std::filesystem::path& p);

}  // namespace wrecksim::testing
