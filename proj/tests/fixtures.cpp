#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "wrecksim/image_io.hpp"
#include "wrecksim/procedural.hpp"

namespace wrecksim::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto stamp = static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^ mix64(++counter) ^
                     static_cast<std::uint64_t>(::getpid());
  path_ = fs::temp_directory_path() / ("wrecksim_" + tag + "_" + std::to_string(stamp % 1000000007ULL));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path asset_dir() { return WRECKSIM_ASSET_DIR; }

TriangleMesh box_mesh(double lx, double ly, double lz) {
  const double x = lx / 2, y = ly / 2;
  std::ostringstream obj;
  obj << "v " << -x << ' ' << -y << " 0\nv " << x << ' ' << -y << " 0\nv " << x << ' ' << y << " 0\nv " << -x
      << ' ' << y << " 0\n";
  obj << "v " << -x << ' ' << -y << ' ' << lz << "\nv " << x << ' ' << -y << ' ' << lz << "\nv " << x << ' ' << y
      << ' ' << lz << "\nv " << -x << ' ' << y << ' ' << lz << '\n';
  obj << "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
  std::istringstream in(obj.str());
  return parse_obj(in, "box");
}

LabelMask random_mask(std::size_t w, std::size_t h, Rng& rng, double p) {
  LabelMask m(w, h);
  for (auto& x : m.data()) x = rng.uniform() < p ? 1 : 0;
  return m;
}

GrayImage random_image(std::size_t w, std::size_t h, Rng& rng) {
  GrayImage img(w, h);
  for (auto& x : img.data()) x = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

ShadowMeasurement measure_shadow(const ShadowCase& c) {
  SonarParams params;
  params.range_bins = 400;
  params.pings = 41;
  params.max_slant_range = 50.0;
  params.along_track_spacing = 0.5;
  params.speckle = false;
  params.workers = 1;
  SeabedConfig seabed;
  seabed.sensor_altitude = c.altitude;
  fit_swath(params, seabed);

  const std::vector<TriangleMesh> meshes{box_mesh(16.0, c.width, c.box_height)};
  ScenePlacement p;
  p.position = {10.0, c.near_edge + c.width / 2, 0.0};
  p.scale = 1.0;
  p.material.reflectance = 0.8;
  const Scene scene = build_scene(seabed, meshes, {p});
  const ScanResult scan = render_scan(scene, params);

  ShadowMeasurement m;
  const std::size_t row = 20;
  for (std::size_t k = 0; k < params.range_bins; ++k) {
    if (scan.shadow.at(k, row)) {
      if (m.first_bin < 0) m.first_bin = static_cast<long long>(k);
      m.last_bin = static_cast<long long>(k);
    }
  }
  // Far top edge casts the shadow; it ends where the grazing ray over that
  // edge meets the seabed: y_s / altitude = y_e / (altitude - h).
  const double bin = params.bin_size();
  const double ye = c.near_edge + c.width;
  const double start = std::hypot(ye, c.altitude - c.box_height);
  const double ys = ye * c.altitude / (c.altitude - c.box_height);
  const double end = std::hypot(ys, c.altitude);
  // Bins lying entirely inside (start, end).
  m.oracle_first = static_cast<long long>(std::floor(start / bin)) + 1;
  m.oracle_last = static_cast<long long>(std::ceil(end / bin)) - 1;
  return m;
}

void write_terrain_dir(const fs::path& dir, std::size_t count, std::size_t w, std::size_t h, std::uint64_t seed,
                       const std::string& site) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < count; ++k) {
    write_png(dir / (site + "_" + std::to_string(k) + ".png"), procedural_terrain(w, h, hash_combine(seed, k)));
  }
}

PipelineConfig small_config(const fs::path& out, std::size_t size, std::size_t samples, bool real_terrain,
                            std::uint64_t seed) {
  nlohmann::json j{{"num_samples", samples},
                   {"image_height", size},
                   {"image_width", size},
                   {"real_terrain", real_terrain},
                   {"ship_fracturing", true},
                   {"mesh_dir", (asset_dir() / "meshes").string()},
                   {"output_dir", (out / "dataset").string()},
                   {"master_seed", seed},
                   {"sonar", {{"max_slant_range", 50.0}}},
                   {"seabed", {{"sensor_altitude", 10.0}}}};
  if (real_terrain) {
    write_terrain_dir(out / "terrain_src", 3, size + size / 2, size + size / 4, seed);
    j["terrain_dir"] = (out / "terrain_src").string();
  }
  return parse_pipeline_config(j);
}

PlantedAnomaly planted_anomaly(std::size_t size, std::uint64_t seed) {
  PlantedAnomaly a{procedural_terrain(size, size, seed), LabelMask(size, size)};
  Rng rng(derive_seed(seed, "plant"));
  const auto side = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(size / 8),
                                                             static_cast<std::int64_t>(size / 4)));
  const auto u0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size - side)));
  const auto v0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size - side)));
  for (std::size_t v = v0; v < v0 + side; ++v) {
    for (std::size_t u = u0; u < u0 + side; ++u) {
      // Bright hull with a hard stripe pattern, like a ship highlight.
      const bool stripe = ((u - u0) / 3) % 2 == 0;
      a.image.at(u, v) = static_cast<std::uint8_t>(stripe ? 250 : 170 + rng.uniform_int(0, 40));
      a.mask.at(u, v) = 1;
    }
  }
  return a;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace wrecksim::testing
