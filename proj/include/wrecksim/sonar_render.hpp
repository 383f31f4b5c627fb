#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "wrecksim/grid.hpp"
#include "wrecksim/scene.hpp"

namespace wrecksim {

struct DbWindow {
  double lo = 0;
  double hi = 0;
};

struct SonarParams {
  double source_level = 220.0;  // dB
  /// Rays per ping; 0 selects 4 per range bin. Multiples of range_bins give
  /// every flat-seabed bin the same ray count.
  std::size_t rays_per_ping = 0;
  std::size_t range_bins = 512;  // W
  double max_slant_range = 50.0;  // m
  /// Pixel mapping window; defaults to (SL - 90, SL - 20).
  std::optional<DbWindow> db_window;
  std::size_t pings = 512;  // H
  double along_track_spacing = 0.1;  // m
  /// Render port and starboard mirrored about the nadir (width 2W).
  bool dual_sided = false;
  /// Multiplicative unit-mean Rayleigh speckle in the linear domain.
  bool speckle = true;
  std::uint64_t noise_seed = 0;
  /// Render threads; 0 uses all hardware threads. Never affects output.
  unsigned workers = 0;

  DbWindow window() const;
  std::size_t rays() const { return rays_per_ping ? rays_per_ping : 4 * range_bins; }
  std::size_t image_width() const { return dual_sided ? 2 * range_bins : range_bins; }
  double bin_size() const { return max_slant_range / static_cast<double>(range_bins); }
  void validate(double sensor_altitude) const;
};

void to_json(nlohmann::json& j, const SonarParams& p);
void from_json(const nlohmann::json& j, SonarParams& p);

/// Seabed footprint covered by a straight track under these params; use it
/// to fill SeabedConfig's swath bounds.
void fit_swath(const SonarParams& params, SeabedConfig& seabed);

/// 10 log10(d). Throws DataError when d <= 0.
double transmission_loss(double distance);

/// Lambertian backscatter 10 log10(rho cos), floored at kTargetStrengthFloor.
double target_strength(double cos_incidence, double reflectance);
inline constexpr double kTargetStrengthFloor = -80.0;

/// Returned intensity RI = SL - 2 TL + TS.
double sonar_intensity(double source_level, double distance, double target_strength_db);

/// Affine map of [lo, hi] dB onto [0, 255], clamped, round-half-up.
std::uint8_t db_to_pixel(double intensity_db, const DbWindow& window);

enum class BinClass : std::uint8_t {
  kNoReturn = 0,  // nadir water column
  kTerrain = 1,
  kShipwreck = 2,
  kShadow = 3,
};

struct SensorPose {
  Vec3 position;
  /// +1 looks starboard (+y), -1 looks port.
  int side = 1;
};

struct PingReturn {
  std::vector<double> intensity_db;  // -inf where nothing returned
  std::vector<BinClass> classes;
  /// Slant distance of each ray's first hit inside the range window; NaN
  /// for rays that missed or returned beyond max range.
  std::vector<double> hit_distance;
  std::vector<std::int32_t> hit_owner;  // per ray; kSeabedOwner or placement
};

/// Ray direction used for ray `index` of a ping. Rays are spaced so that on a
/// flat seabed their slant ranges are uniform over (altitude, max range).
std::optional<Vec3> ray_direction(std::size_t index, double sensor_altitude, int side,
                                  const SonarParams& params);

PingReturn trace_ping(const Scene& scene, const SensorPose& pose, const SonarParams& params);

struct SonarImage {
  GrayImage pixels;
  SonarParams params;
};

struct ScanResult {
  SonarImage image;
  LabelMask mask;
  ShadowMask shadow;
};

/// Rows are pings along +x starting at the swath's along_min; columns are
/// slant-range bins (port bins mirrored left of starboard when dual-sided).
ScanResult render_scan(const Scene& scene, const SonarParams& params);

}  // namespace wrecksim
