#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wrecksim/geometry.hpp"
#include "wrecksim/grid.hpp"
#include "wrecksim/rng.hpp"

namespace wrecksim {

/// Raised by the OBJ reader; message carries the offending line number.
class MeshError : public DataError {
 public:
  using DataError::DataError;
};

struct TriangleMesh {
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  /// Zero-area faces removed during load.
  std::size_t dropped_degenerate = 0;

  Aabb bounds() const;
};

/// Parses the ASCII OBJ subset: `v x y z` and `f i j k ...` records
/// (polygons are fan-split, `i/t/n` and negative indices accepted). Other
/// record types are ignored.
TriangleMesh parse_obj(std::istream& in, std::string name);
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Loads every *.obj in a directory, sorted by file name.
std::vector<TriangleMesh> load_mesh_directory(const std::filesystem::path& dir);

struct Material {
  double reflectance = 1.0;  // in (0, 1]
  std::string name = "hull";
};

struct Range {
  double lo = 0;
  double hi = 0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct RandomizationConfig {
  Range scale{15.0, 30.0};
  Range yaw{0.0, 6.283185307179586};
  Range position_x{16.0, 44.0};
  Range position_y{18.0, 42.0};
  Range reflectance{0.5, 1.0};
  /// When set, pitch and roll are also sampled (wrecks otherwise sit upright).
  bool full_rotation = false;
  Range pitch{-0.2, 0.2};
  Range roll{-0.2, 0.2};

  /// Throws DataError on empty/inverted ranges or out-of-domain bounds.
  void validate() const;
};

void to_json(nlohmann::json& j, const RandomizationConfig& c);
void from_json(const nlohmann::json& j, RandomizationConfig& c);

struct ScenePlacement {
  std::size_t mesh_index = 0;
  std::string mesh_name;
  /// Where the mesh anchor (footprint center, lowest point) lands.
  Vec3 position;
  double yaw = 0;  // [0, 2pi)
  double pitch = 0;
  double roll = 0;
  double scale = 1;
  Material material;

  Mat3 rotation() const;
  /// World-space position of a mesh vertex under this placement.
  Vec3 transform(const Vec3& local, const Aabb& mesh_bounds) const;
};

void to_json(nlohmann::json& j, const ScenePlacement& p);

/// Samples scale, yaw, position, reflectance (and pitch/roll when enabled)
/// in that fixed order. The z position is chosen so the mesh rests on z=0.
ScenePlacement randomize_placement(const TriangleMesh& mesh, const RandomizationConfig& ranges,
                                   Rng& rng, std::size_t mesh_index = 0);

/// World-space bounding box of a placed mesh.
Aabb placed_bounds(const TriangleMesh& mesh, const ScenePlacement& placement);

struct SeabedConfig {
  double sensor_altitude = 10.0;
  double reflectance = 0.3;
  /// Value-noise height perturbation; 0 gives an exact plane.
  double height_noise_amplitude = 0.0;
  double noise_cell = 0.5;
  std::uint64_t noise_seed = 0;
  /// Ensonified seabed footprint (ground coordinates, metres).
  double along_min = 0, along_max = 0;
  double across_min = 0, across_max = 0;
};

void to_json(nlohmann::json& j, const SeabedConfig& c);

/// Hit owner for seabed triangles and the analytic plane.
inline constexpr std::int32_t kSeabedOwner = -1;

struct RayHit {
  double distance = 0;
  Vec3 normal;  // unit, geometric
  double reflectance = 0;
  std::int32_t owner = kSeabedOwner;  // placement index or kSeabedOwner
  std::uint32_t triangle = 0;

  bool is_ship() const { return owner >= 0; }
};

/// Immutable renderable scene. Safe to share across threads once built.
class Scene {
 public:
  struct Triangle {
    Vec3 v0, e1, e2;
    Vec3 normal;
    double reflectance;
    std::int32_t owner;
  };

  /// Nearest hit with distance in (eps, t_max). Ties go to the lower
  /// triangle index so results never depend on traversal order.
  std::optional<RayHit> intersect(const Ray& ray, double t_max) const;
  /// Same contract as intersect(), testing every triangle. Test oracle.
  std::optional<RayHit> intersect_brute_force(const Ray& ray, double t_max) const;

  /// Triangles belonging to placed objects (seabed excluded).
  std::size_t triangle_count() const { return object_triangles_; }
  std::size_t seabed_triangle_count() const { return triangles_.size() - object_triangles_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  const SeabedConfig& seabed() const { return seabed_; }
  double sensor_altitude() const { return seabed_.sensor_altitude; }
  const std::vector<ScenePlacement>& placements() const { return placements_; }
  double max_object_height() const { return max_object_height_; }

  nlohmann::json to_json() const;

 private:
  friend Scene build_scene(const SeabedConfig&, std::span<const TriangleMesh>,
                           std::vector<ScenePlacement>);

  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first triangle slot; inner: right child
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  void build_bvh();
  std::uint32_t build_node(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids);
  std::optional<RayHit> intersect_plane(const Ray& ray, double t_max) const;

  SeabedConfig seabed_;
  std::vector<ScenePlacement> placements_;
  std::vector<Triangle> triangles_;
  std::vector<std::uint32_t> order_;  // BVH leaf slots -> triangle index
  std::vector<Node> nodes_;
  std::size_t object_triangles_ = 0;
  double max_object_height_ = 0;
  bool analytic_plane_ = true;
  Aabb heightfield_bounds_;
};

/// Transforms placements into world triangles, adds the seabed and builds
/// the BVH. Throws DataError if an object leaves the swath, reaches the
/// sensor altitude or references an unknown mesh.
Scene build_scene(const SeabedConfig& seabed, std::span<const TriangleMesh> meshes,
                  std::vector<ScenePlacement> placements);

/// Seabed height under the value-noise model (0 when amplitude is 0).
double seabed_height(const SeabedConfig& seabed, double x, double y);

}  // namespace wrecksim
