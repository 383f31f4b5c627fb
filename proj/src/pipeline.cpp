#include "wrecksim/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "wrecksim/image_io.hpp"
#include "wrecksim/parallel.hpp"

namespace wrecksim {

void PipelineConfig::validate() const {
  if (num_samples < 1) throw DataError("num_samples must be >= 1");
  if (image_width < 1 || image_height < 1) throw DataError("image size must be positive");
  if (!(split_fraction > 0 && split_fraction < 1)) throw DataError("split_fraction must lie in (0, 1)");
  if (sonar.pings != image_height || sonar.image_width() != image_width) {
    throw DataError("sonar geometry does not match the image size");
  }
  sonar.validate(seabed.sensor_altitude);
  deform.validate();
  randomization.validate();
}

namespace {

std::filesystem::path resolve(const nlohmann::json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  try {
    c.num_samples = j.value("num_samples", c.num_samples);
    c.image_height = j.value("image_height", c.image_height);
    c.image_width = j.value("image_width", c.image_width);
    c.split_fraction = j.value("split_fraction", c.split_fraction);
    c.real_terrain = j.value("real_terrain", c.real_terrain);
    c.ship_fracturing = j.value("ship_fracturing", c.ship_fracturing);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.workers = j.value("workers", c.workers);
    c.site = j.value("site", c.site);
    c.mesh_dir = resolve(j, "mesh_dir", base_dir);
    c.terrain_dir = resolve(j, "terrain_dir", base_dir);
    c.output_dir = resolve(j, "output_dir", base_dir);

    const nlohmann::json sonar = j.value("sonar", nlohmann::json::object());
    c.sonar = sonar.get<SonarParams>();
    if (c.sonar.dual_sided && c.image_width % 2 != 0) {
      throw DataError("dual-sided rendering needs an even image width");
    }
    c.sonar.pings = c.image_height;
    c.sonar.range_bins = c.sonar.dual_sided ? c.image_width / 2 : c.image_width;
    if (!sonar.contains("along_track_spacing")) c.sonar.along_track_spacing = c.sonar.bin_size();

    const nlohmann::json seabed = j.value("seabed", nlohmann::json::object());
    c.seabed.sensor_altitude = seabed.value("sensor_altitude", c.seabed.sensor_altitude);
    c.seabed.reflectance = seabed.value("reflectance", c.seabed.reflectance);
    c.seabed.height_noise_amplitude = seabed.value("height_noise_amplitude", c.seabed.height_noise_amplitude);
    c.seabed.noise_cell = seabed.value("noise_cell", c.seabed.noise_cell);
    fit_swath(c.sonar, c.seabed);

    const nlohmann::json deform = j.value("deform", nlohmann::json::object());
    c.deform.magnitude_bins = deform.value("magnitude_bins", c.deform.magnitude_bins);
    c.deform.angle_bins = deform.value("angle_bins", c.deform.angle_bins);
    c.deform.min_magnitude_bin = deform.value("min_magnitude_bin", c.deform.min_magnitude_bin);
    c.deform.max_magnitude_bin = deform.value("max_magnitude_bin", c.deform.max_magnitude_bin);
    c.deform.max_displacement =
        deform.value("max_displacement", default_max_displacement(c.image_width, c.image_height));

    const nlohmann::json ranges = j.value("randomization", nlohmann::json::object());
    c.randomization = ranges.get<RandomizationConfig>();
    const double along = c.seabed.along_max - c.seabed.along_min;
    if (!ranges.contains("position_x")) {
      c.randomization.position_x = {c.seabed.along_min + 0.3 * along, c.seabed.along_min + 0.7 * along};
    }
    if (!ranges.contains("position_y")) {
      c.randomization.position_y = {0.3 * c.seabed.across_max, 0.7 * c.seabed.across_max};
    }

    const nlohmann::json comp = j.value("composite", nlohmann::json::object());
    c.composite.shadow_gain = comp.value("shadow_gain", c.composite.shadow_gain);
    c.composite.feather = comp.value("feather", c.composite.feather);
    c.composite.histogram_match = comp.value("histogram_match", c.composite.histogram_match);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

nlohmann::json to_json(const PipelineConfig& c) {
  return nlohmann::json{{"num_samples", c.num_samples},
                        {"image_height", c.image_height},
                        {"image_width", c.image_width},
                        {"split_fraction", c.split_fraction},
                        {"real_terrain", c.real_terrain},
                        {"ship_fracturing", c.ship_fracturing},
                        {"sonar", c.sonar},
                        {"seabed", c.seabed},
                        {"deform",
                         {{"magnitude_bins", c.deform.magnitude_bins},
                          {"angle_bins", c.deform.angle_bins},
                          {"max_displacement", c.deform.max_displacement},
                          {"min_magnitude_bin", c.deform.min_magnitude_bin},
                          {"max_magnitude_bin", c.deform.magnitude_hi()}}},
                        {"randomization", c.randomization},
                        {"composite",
                         {{"shadow_gain", c.composite.shadow_gain},
                          {"feather", c.composite.feather},
                          {"histogram_match", c.composite.histogram_match}}},
                        {"mesh_dir", c.mesh_dir.string()},
                        {"terrain_dir", c.terrain_dir.string()},
                        {"output_dir", c.output_dir.string()},
                        {"master_seed", c.master_seed},
                        {"site", c.site}};
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index) {
  return hash_combine(master_seed, static_cast<std::uint64_t>(index));
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu", index);
  return buf;
}

PipelineAssets load_assets(const PipelineConfig& config) {
  PipelineAssets assets;
  assets.meshes = load_mesh_directory(config.mesh_dir);
  if (config.real_terrain) {
    assets.terrain = load_terrain_library(config.terrain_dir, config.image_width, config.image_height);
  }
  return assets;
}

namespace {

bool inside_swath(const Aabb& box, const SeabedConfig& s) {
  return box.lo.x >= s.along_min && box.hi.x <= s.along_max && box.lo.y >= s.across_min &&
         box.hi.y <= s.across_max && box.hi.z < s.sensor_altitude;
}

GeneratedSample generate_sample_impl(const PipelineConfig& config, const PipelineAssets& assets,
                                     std::size_t index) {
  if (assets.meshes.empty()) throw DataError("no meshes loaded");
  const std::uint64_t seed = sample_seed(config.master_seed, index);

  // Placement: retry until the object fits the swath (same stream, so the
  // outcome is still a pure function of the seed).
  Rng place_rng(derive_seed(seed, "placement"));
  constexpr int kMaxAttempts = 64;
  std::optional<ScenePlacement> placement;
  for (int attempt = 0; attempt < kMaxAttempts && !placement; ++attempt) {
    const auto mesh_index = static_cast<std::size_t>(
        place_rng.uniform_int(0, static_cast<std::int64_t>(assets.meshes.size()) - 1));
    ScenePlacement p = randomize_placement(assets.meshes[mesh_index], config.randomization, place_rng, mesh_index);
    if (inside_swath(placed_bounds(assets.meshes[mesh_index], p), config.seabed)) placement = p;
  }
  if (!placement) throw DataError("could not place a mesh inside the swath");

  SeabedConfig seabed = config.seabed;
  seabed.noise_seed = derive_seed(seed, "seabed");
  SonarParams sonar = config.sonar;
  sonar.noise_seed = derive_seed(seed, "speckle");
  sonar.workers = 1;

  const Scene scene = build_scene(seabed, assets.meshes, {*placement});
  ScanResult scan = render_scan(scene, sonar);

  DeformationField field = identity_field(config.image_width, config.image_height, config.deform);
  if (config.ship_fracturing) {
    Rng field_rng(derive_seed(seed, "field"));
    field = generate_quadrant_field(scan.mask, config.deform, field_rng);
  }
  FracturedScan fractured = apply_field(scan.image.pixels, scan.mask, scan.shadow, field);

  GeneratedSample out;
  if (config.real_terrain) {
    if (!assets.terrain) throw DataError("real terrain enabled but no terrain library loaded");
    Rng terrain_rng(derive_seed(seed, "terrain"));
    out.terrain = assets.terrain->sample(terrain_rng);
  } else {
    const Scene empty = build_scene(seabed, assets.meshes, {});
    out.terrain = {render_scan(empty, sonar).image.pixels, "rendered_seabed", "synthetic"};
  }
  out.site = config.site.empty() ? (out.terrain.site.empty() ? "synthetic" : out.terrain.site) : config.site;

  out.sample.image = composite(fractured.image, fractured.mask, fractured.shadow, out.terrain, config.composite);
  out.sample.mask = std::move(fractured.mask);
  out.sample.field = std::move(field);
  out.sample.provenance = {placement->mesh_name, out.terrain.source_id, seed, config.real_terrain,
                           config.ship_fracturing};
  out.rendered = std::move(scan.image.pixels);
  out.render_mask = std::move(scan.mask);
  out.render_shadow = std::move(scan.shadow);
  out.shadow = std::move(fractured.shadow);
  out.placement = *placement;
  return out;
}

}  // namespace

GeneratedSample generate_sample(const PipelineConfig& config, const PipelineAssets& assets, std::size_t index) {
  try {
    return generate_sample_impl(config, assets, index);
  } catch (const DataError& e) {
    throw DataError("sample " + std::to_string(index) + ": " + e.what());
  }
}

nlohmann::json to_json(const ManifestRecord& r) {
  return nlohmann::json{{"id", r.id},       {"split", r.split}, {"image", r.image},
                        {"mask", r.mask},   {"deff", r.deff},   {"terrain", r.terrain},
                        {"site", r.site},   {"provenance", r.provenance}};
}

std::vector<std::string> assign_splits(const std::vector<std::string>& ids, double fraction,
                                       std::uint64_t master_seed) {
  const std::size_t n = ids.size();
  const auto n_train = static_cast<std::size_t>(round_half_up(static_cast<double>(n) * fraction));
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) keyed[i] = {hash_combine(derive_seed(master_seed, "split"), fnv1a(ids[i])), i};
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> split(n, "val");
  for (std::size_t k = 0; k < std::min(n_train, n); ++k) split[keyed[k].second] = "train";
  return split;
}

std::vector<ManifestRecord> generate_dataset(const PipelineConfig& config) {
  config.validate();
  const std::filesystem::path out_dir = config.output_dir;
  if (out_dir.empty()) throw DataError("no output directory configured");
  const PipelineAssets assets = load_assets(config);
  for (const char* sub : {"images", "masks", "fields", "terrain"}) std::filesystem::create_directories(out_dir / sub);

  const std::size_t n = config.num_samples;
  std::vector<std::optional<ManifestRecord>> records(n);
  std::vector<std::string> failures(n);

  parallel_for(n, config.workers, [&](std::size_t i) {
    try {
      const GeneratedSample s = generate_sample(config, assets, i);
      ManifestRecord r;
      r.id = sample_id(i);
      r.image = "images/" + r.id + ".png";
      r.mask = "masks/" + r.id + ".png";
      r.deff = "fields/" + r.id + ".deff";
      r.terrain = "terrain/" + r.id + ".png";
      r.site = s.site;
      r.provenance = {{"mesh", s.sample.provenance.mesh},
                      {"terrain", s.sample.provenance.terrain},
                      {"sample_seed", s.sample.provenance.sample_seed},
                      {"index", i},
                      {"toggles", {{"RT", s.sample.provenance.real_terrain}, {"SF", s.sample.provenance.ship_fracturing}}},
                      {"placement", s.placement}};
      write_png(out_dir / r.image, s.sample.image);
      write_mask_png(out_dir / r.mask, s.sample.mask);
      write_deff(out_dir / r.deff, s.sample.field);
      write_png(out_dir / r.terrain, s.terrain.image);
      records[i] = std::move(r);
    } catch (const DataError& e) {
      failures[i] = e.what();
    }
  });

  std::vector<std::string> failed;
  for (const auto& f : failures) {
    if (!f.empty()) failed.push_back(f);
  }
  if (!failed.empty()) {
    std::ofstream log(out_dir / "failures.jsonl");
    for (const auto& f : failed) log << nlohmann::json{{"error", f}}.dump() << '\n';
    if (failed.size() * 100 > n) {
      throw DataError(std::to_string(failed.size()) + " of " + std::to_string(n) +
                      " samples failed (limit 1%); first: " + failed.front());
    }
  }

  std::vector<ManifestRecord> manifest;
  for (auto& r : records) {
    if (r) manifest.push_back(std::move(*r));
  }
  std::vector<std::string> ids;
  for (const auto& r : manifest) ids.push_back(r.id);
  const auto splits = assign_splits(ids, config.split_fraction, config.master_seed);
  std::ofstream out(out_dir / "manifest.jsonl", std::ios::binary);
  if (!out) throw DataError("cannot write manifest in " + out_dir.string());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    manifest[i].split = splits[i];
    out << to_json(manifest[i]).dump() << '\n';
  }
  return manifest;
}

}  // namespace wrecksim
