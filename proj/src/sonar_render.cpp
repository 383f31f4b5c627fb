#include "wrecksim/sonar_render.hpp"

#include <cmath>
#include <limits>

#include "wrecksim/parallel.hpp"
#include "wrecksim/rng.hpp"

namespace wrecksim {

DbWindow SonarParams::window() const {
  return db_window.value_or(DbWindow{source_level - 90.0, source_level - 20.0});
}

void SonarParams::validate(double sensor_altitude) const {
  if (!(source_level > 0)) throw DataError("source level must be positive");
  if (range_bins < 1) throw DataError("range_bins must be >= 1");
  if (pings < 1) throw DataError("pings must be >= 1");
  if (rays() < 1) throw DataError("rays_per_ping must be >= 1");
  const DbWindow w = window();
  if (!(w.hi > w.lo)) throw DataError("db window requires hi > lo");
  if (!(max_slant_range > sensor_altitude)) {
    throw DataError("max slant range must exceed the sensor altitude");
  }
  if (!(along_track_spacing > 0)) throw DataError("along-track spacing must be positive");
}

void to_json(nlohmann::json& j, const SonarParams& p) {
  const DbWindow w = p.window();
  j = nlohmann::json{{"source_level", p.source_level},
                     {"rays_per_ping", p.rays()},
                     {"range_bins", p.range_bins},
                     {"max_slant_range", p.max_slant_range},
                     {"db_window", {w.lo, w.hi}},
                     {"pings", p.pings},
                     {"along_track_spacing", p.along_track_spacing},
                     {"dual_sided", p.dual_sided},
                     {"speckle", p.speckle},
                     {"noise_seed", p.noise_seed}};
}

void from_json(const nlohmann::json& j, SonarParams& p) {
  const SonarParams d;
  p.source_level = j.value("source_level", d.source_level);
  p.rays_per_ping = j.value("rays_per_ping", d.rays_per_ping);
  p.range_bins = j.value("range_bins", d.range_bins);
  p.max_slant_range = j.value("max_slant_range", d.max_slant_range);
  if (j.contains("db_window")) {
    const auto& w = j.at("db_window");
    if (!w.is_array() || w.size() != 2) throw DataError("db_window must be [lo, hi]");
    p.db_window = DbWindow{w[0].get<double>(), w[1].get<double>()};
  } else {
    p.db_window.reset();
  }
  p.pings = j.value("pings", d.pings);
  p.along_track_spacing = j.value("along_track_spacing", d.along_track_spacing);
  p.dual_sided = j.value("dual_sided", d.dual_sided);
  p.speckle = j.value("speckle", d.speckle);
  p.noise_seed = j.value("noise_seed", d.noise_seed);
  p.workers = j.value("workers", d.workers);
}

void fit_swath(const SonarParams& params, SeabedConfig& seabed) {
  const double h = seabed.sensor_altitude;
  const double ground = std::sqrt(std::max(0.0, params.max_slant_range * params.max_slant_range - h * h));
  seabed.along_min = 0.0;
  seabed.along_max = static_cast<double>(params.pings - 1) * params.along_track_spacing;
  seabed.across_min = params.dual_sided ? -ground : 0.0;
  seabed.across_max = ground;
}

double transmission_loss(double distance) {
  if (!(distance > 0)) throw DataError("transmission loss needs a positive distance");
  return 10.0 * std::log10(distance);
}

double target_strength(double cos_incidence, double reflectance) {
  if (!(reflectance > 0 && reflectance <= 1)) throw DataError("reflectance must lie in (0, 1]");
  const double c = std::clamp(cos_incidence, 0.0, 1.0);
  const double product = reflectance * c;
  if (product <= 0) return kTargetStrengthFloor;
  return std::max(kTargetStrengthFloor, 10.0 * std::log10(product));
}

double sonar_intensity(double source_level, double distance, double target_strength_db) {
  return source_level - 2.0 * transmission_loss(distance) + target_strength_db;
}

std::uint8_t db_to_pixel(double intensity_db, const DbWindow& window) {
  const double scaled = 255.0 * (intensity_db - window.lo) / (window.hi - window.lo);
  if (!(scaled > 0)) return 0;  // also catches -inf and NaN
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(round_half_up(scaled));
}

std::optional<Vec3> ray_direction(std::size_t index, double sensor_altitude, int side,
                                  const SonarParams& params) {
  const double n = static_cast<double>(params.rays());
  const double slant = params.max_slant_range * (static_cast<double>(index) + 0.5) / n;
  if (slant <= sensor_altitude) return std::nullopt;  // would point into the nadir
  const double c = sensor_altitude / slant;
  const double s = std::sqrt(1.0 - c * c);
  return Vec3{0.0, side >= 0 ? s : -s, -c};
}

PingReturn trace_ping(const Scene& scene, const SensorPose& pose, const SonarParams& params) {
  const std::size_t bins = params.range_bins;
  const double bin = params.bin_size();
  const double altitude = pose.position.z - seabed_height(scene.seabed(), pose.position.x, pose.position.y);
  const std::size_t rays = params.rays();

  std::vector<double> energy(bins, 0.0);
  std::vector<std::uint8_t> hit(bins, 0), ship(bins, 0);
  PingReturn out;
  out.hit_distance.assign(rays, std::numeric_limits<double>::quiet_NaN());
  out.hit_owner.assign(rays, kSeabedOwner);

  for (std::size_t r = 0; r < rays; ++r) {
    const auto dir = ray_direction(r, altitude, pose.side, params);
    if (!dir) continue;
    const auto h = scene.intersect({pose.position, *dir}, params.max_slant_range);
    if (!h) continue;
    const auto k = static_cast<std::size_t>(h->distance / bin);
    if (k >= bins) continue;
    const double cos_inc = std::abs(dot(h->normal, *dir));
    const double ri = sonar_intensity(params.source_level, h->distance,
                                      target_strength(cos_inc, h->reflectance));
    energy[k] += std::pow(10.0, ri / 10.0);
    hit[k] = 1;
    if (h->is_ship()) ship[k] = 1;
    out.hit_distance[r] = h->distance;
    out.hit_owner[r] = h->owner;
  }

  out.intensity_db.resize(bins);
  out.classes.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    if (hit[k]) {
      out.intensity_db[k] = 10.0 * std::log10(energy[k]);
      out.classes[k] = ship[k] ? BinClass::kShipwreck : BinClass::kTerrain;
    } else {
      out.intensity_db[k] = -std::numeric_limits<double>::infinity();
      const bool nadir = static_cast<double>(k + 1) * bin <= altitude;
      out.classes[k] = nadir ? BinClass::kNoReturn : BinClass::kShadow;
    }
  }
  return out;
}

namespace {

void write_side(const PingReturn& ping, const SonarParams& params, std::size_t row, int side,
                std::size_t column0, bool mirrored, ScanResult& out) {
  const DbWindow window = params.window();
  Rng rng(derive_seed(hash_combine(params.noise_seed, row), side > 0 ? "starboard" : "port"));
  // Unit-mean Rayleigh: E[X] = sigma * sqrt(pi / 2).
  constexpr double kSigma = 0.7978845608028654;
  for (std::size_t k = 0; k < params.range_bins; ++k) {
    const double speckle = params.speckle ? rng.rayleigh(kSigma) : 1.0;
    const std::size_t col = mirrored ? column0 + params.range_bins - 1 - k : column0 + k;
    const BinClass c = ping.classes[k];
    std::uint8_t pixel = 0;
    if (c == BinClass::kTerrain || c == BinClass::kShipwreck) {
      pixel = db_to_pixel(ping.intensity_db[k] + 10.0 * std::log10(speckle), window);
    }
    out.image.pixels.at(col, row) = pixel;
    out.mask.at(col, row) = c == BinClass::kShipwreck ? kShipwreck : kTerrain;
    out.shadow.at(col, row) = c == BinClass::kShadow ? 1 : 0;
  }
}

}  // namespace

ScanResult render_scan(const Scene& scene, const SonarParams& params) {
  params.validate(scene.sensor_altitude());
  const std::size_t width = params.image_width();
  ScanResult out;
  out.image.params = params;
  out.image.pixels = GrayImage(width, params.pings);
  out.mask = LabelMask(width, params.pings);
  out.shadow = ShadowMask(width, params.pings);

  // Each ping owns one output row, so any worker count gives the same bytes.
  parallel_for(params.pings, params.workers, [&](std::size_t row) {
    SensorPose pose;
    pose.position = {scene.seabed().along_min + static_cast<double>(row) * params.along_track_spacing,
                     0.0, scene.sensor_altitude()};
    if (params.dual_sided) {
      pose.side = -1;
      write_side(trace_ping(scene, pose, params), params, row, -1, 0, true, out);
      pose.side = 1;
      write_side(trace_ping(scene, pose, params), params, row, 1, params.range_bins, false, out);
    } else {
      write_side(trace_ping(scene, pose, params), params, row, 1, 0, false, out);
    }
  });
  return out;
}

}  // namespace wrecksim
