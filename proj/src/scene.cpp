#include "wrecksim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace wrecksim {

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

namespace {

double parse_number(const std::string& token, std::size_t line) {
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || !std::isfinite(value)) {
    throw MeshError("line " + std::to_string(line) + ": malformed number '" + token + "'");
  }
  return value;
}

long long parse_index(const std::string& token, std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(head, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (head.empty() || used != head.size() || value == 0) {
    throw MeshError("line " + std::to_string(line) + ": malformed face index '" + token + "'");
  }
  return value;
}

}  // namespace

TriangleMesh parse_obj(std::istream& in, std::string name) {
  struct FaceRef {
    long long index;
    std::size_t line;
  };
  TriangleMesh mesh;
  mesh.name = std::move(name);
  std::vector<std::vector<FaceRef>> faces;

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::istringstream line(text);
    std::string tag;
    if (!(line >> tag)) continue;
    if (tag == "v") {
      std::vector<std::string> tokens;
      for (std::string t; line >> t;) tokens.push_back(t);
      // A fourth (w) or colour components may follow; only xyz are used.
      if (tokens.size() < 3) {
        throw MeshError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      }
      mesh.vertices.push_back({parse_number(tokens[0], line_no), parse_number(tokens[1], line_no),
                               parse_number(tokens[2], line_no)});
    } else if (tag == "f") {
      std::vector<FaceRef> face;
      for (std::string t; line >> t;) {
        long long idx = parse_index(t, line_no);
        // Negative indices are relative to the vertices read so far.
        if (idx < 0) idx = static_cast<long long>(mesh.vertices.size()) + idx + 1;
        face.push_back({idx, line_no});
      }
      if (face.size() < 3) {
        throw MeshError("line " + std::to_string(line_no) + ": face needs at least 3 vertices");
      }
      faces.push_back(std::move(face));
    }
  }

  const auto vertex_count = static_cast<long long>(mesh.vertices.size());
  const Aabb box = mesh.bounds();
  const double diag = box.valid() ? length(box.hi - box.lo) : 0.0;
  const double area_eps = 1e-12 * diag * diag;
  for (const auto& face : faces) {
    for (const auto& ref : face) {
      if (ref.index < 1 || ref.index > vertex_count) {
        throw MeshError("line " + std::to_string(ref.line) + ": face index " +
                        std::to_string(ref.index) + " out of range (" +
                        std::to_string(vertex_count) + " vertices)");
      }
    }
    for (std::size_t k = 1; k + 1 < face.size(); ++k) {
      const std::array<std::uint32_t, 3> tri{static_cast<std::uint32_t>(face[0].index - 1),
                                             static_cast<std::uint32_t>(face[k].index - 1),
                                             static_cast<std::uint32_t>(face[k + 1].index - 1)};
      const Vec3& a = mesh.vertices[tri[0]];
      const Vec3 n = cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a);
      if (length(n) <= area_eps) {
        ++mesh.dropped_degenerate;
        continue;
      }
      mesh.triangles.push_back(tri);
    }
  }
  if (mesh.triangles.empty()) throw MeshError("mesh '" + mesh.name + "' has no triangles");
  return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh: " + path.string());
  try {
    return parse_obj(in, path.stem().string());
  } catch (const MeshError& e) {
    throw MeshError(path.string() + ": " + e.what());
  }
}

std::vector<TriangleMesh> load_mesh_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("mesh directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".obj") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .obj meshes in " + dir.string());
  std::vector<TriangleMesh> meshes;
  for (const auto& f : files) meshes.push_back(load_mesh(f));
  return meshes;
}

// --- randomization ----------------------------------------------------------

namespace {

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw DataError(std::string("range '") + name + "' is not finite");
  }
  if (r.lo > r.hi) throw DataError(std::string("range '") + name + "' is inverted (lo > hi)");
}

Range range_from_json(const nlohmann::json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw DataError(std::string("range '") + key + "' must be a [lo, hi] array");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

void RandomizationConfig::validate() const {
  check_range(scale, "scale");
  check_range(yaw, "yaw");
  check_range(position_x, "position_x");
  check_range(position_y, "position_y");
  check_range(reflectance, "reflectance");
  if (scale.lo <= 0) throw DataError("scale range must be positive");
  if (reflectance.lo <= 0 || reflectance.hi > 1) throw DataError("reflectance range must lie in (0, 1]");
  if (full_rotation) {
    check_range(pitch, "pitch");
    check_range(roll, "roll");
  }
}

void to_json(nlohmann::json& j, const RandomizationConfig& c) {
  auto r = [](const Range& x) { return nlohmann::json::array({x.lo, x.hi}); };
  j = nlohmann::json{{"scale", r(c.scale)},
                     {"yaw", r(c.yaw)},
                     {"position_x", r(c.position_x)},
                     {"position_y", r(c.position_y)},
                     {"reflectance", r(c.reflectance)},
                     {"full_rotation", c.full_rotation},
                     {"pitch", r(c.pitch)},
                     {"roll", r(c.roll)}};
}

void from_json(const nlohmann::json& j, RandomizationConfig& c) {
  RandomizationConfig d;
  c.scale = range_from_json(j, "scale", d.scale);
  c.yaw = range_from_json(j, "yaw", d.yaw);
  c.position_x = range_from_json(j, "position_x", d.position_x);
  c.position_y = range_from_json(j, "position_y", d.position_y);
  c.reflectance = range_from_json(j, "reflectance", d.reflectance);
  c.full_rotation = j.value("full_rotation", d.full_rotation);
  c.pitch = range_from_json(j, "pitch", d.pitch);
  c.roll = range_from_json(j, "roll", d.roll);
}

Mat3 ScenePlacement::rotation() const {
  return Mat3::rotation_z(yaw) * Mat3::rotation_y(pitch) * Mat3::rotation_x(roll);
}

Vec3 ScenePlacement::transform(const Vec3& local, const Aabb& mesh_bounds) const {
  const Vec3 c = mesh_bounds.center();
  const Vec3 anchor{c.x, c.y, mesh_bounds.lo.z};
  return position + rotation() * ((local - anchor) * scale);
}

void to_json(nlohmann::json& j, const ScenePlacement& p) {
  j = nlohmann::json{{"mesh_index", p.mesh_index},
                     {"mesh", p.mesh_name},
                     {"position", {p.position.x, p.position.y, p.position.z}},
                     {"yaw", p.yaw},
                     {"pitch", p.pitch},
                     {"roll", p.roll},
                     {"scale", p.scale},
                     {"material", {{"name", p.material.name}, {"reflectance", p.material.reflectance}}}};
}

ScenePlacement randomize_placement(const TriangleMesh& mesh, const RandomizationConfig& ranges,
                                   Rng& rng, std::size_t mesh_index) {
  ranges.validate();
  ScenePlacement p;
  p.mesh_index = mesh_index;
  p.mesh_name = mesh.name;
  p.scale = rng.uniform(ranges.scale.lo, ranges.scale.hi);
  p.yaw = rng.uniform(ranges.yaw.lo, ranges.yaw.hi);
  p.position.x = rng.uniform(ranges.position_x.lo, ranges.position_x.hi);
  p.position.y = rng.uniform(ranges.position_y.lo, ranges.position_y.hi);
  p.material.reflectance = rng.uniform(ranges.reflectance.lo, ranges.reflectance.hi);
  if (ranges.full_rotation) {
    p.pitch = rng.uniform(ranges.pitch.lo, ranges.pitch.hi);
    p.roll = rng.uniform(ranges.roll.lo, ranges.roll.hi);
    // Tilted meshes can dip below the anchor plane; lift them onto the seabed.
    const Aabb box = mesh.bounds();
    double lowest = 0;
    for (const auto& v : mesh.vertices) lowest = std::min(lowest, p.transform(v, box).z);
    p.position.z = -lowest;
  }
  return p;
}

Aabb placed_bounds(const TriangleMesh& mesh, const ScenePlacement& placement) {
  const Aabb local = mesh.bounds();
  Aabb box;
  for (const auto& v : mesh.vertices) box.extend(placement.transform(v, local));
  return box;
}

void to_json(nlohmann::json& j, const SeabedConfig& c) {
  j = nlohmann::json{{"sensor_altitude", c.sensor_altitude},
                     {"reflectance", c.reflectance},
                     {"height_noise_amplitude", c.height_noise_amplitude},
                     {"noise_cell", c.noise_cell},
                     {"noise_seed", c.noise_seed},
                     {"along", {c.along_min, c.along_max}},
                     {"across", {c.across_min, c.across_max}}};
}

// --- seabed -----------------------------------------------------------------

namespace {

double lattice_value(const SeabedConfig& s, long long i, long long j) {
  const std::uint64_t h = hash_combine(hash_combine(s.noise_seed, static_cast<std::uint64_t>(i)),
                                       static_cast<std::uint64_t>(j));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return s.height_noise_amplitude * (2.0 * u - 1.0);
}

}  // namespace

double seabed_height(const SeabedConfig& seabed, double x, double y) {
  if (seabed.height_noise_amplitude == 0) return 0;
  const double gx = x / seabed.noise_cell, gy = y / seabed.noise_cell;
  const auto i = static_cast<long long>(std::floor(gx));
  const auto j = static_cast<long long>(std::floor(gy));
  const double fx = gx - static_cast<double>(i), fy = gy - static_cast<double>(j);
  // Matches the two-triangle split used for the seabed mesh.
  const double h00 = lattice_value(seabed, i, j), h10 = lattice_value(seabed, i + 1, j);
  const double h01 = lattice_value(seabed, i, j + 1), h11 = lattice_value(seabed, i + 1, j + 1);
  if (fx >= fy) return h00 + fx * (h10 - h00) + fy * (h11 - h10);
  return h00 + fy * (h01 - h00) + fx * (h11 - h01);
}

// --- scene ------------------------------------------------------------------

namespace {

constexpr double kHitEpsilon = 1e-9;

std::optional<double> intersect_triangle(const Ray& ray, const Scene::Triangle& tri) {
  const Vec3 pvec = cross(ray.direction, tri.e2);
  const double det = dot(tri.e1, pvec);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = ray.origin - tri.v0;
  const double u = dot(tvec, pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = cross(tvec, tri.e1);
  const double v = dot(ray.direction, qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = dot(tri.e2, qvec) * inv;
  if (t <= kHitEpsilon) return std::nullopt;
  return t;
}

bool intersect_box(const Ray& ray, const Aabb& box, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis], d = ray.direction[axis];
    const double lo = box.lo[axis], hi = box.hi[axis];
    if (d == 0.0) {
      if (o < lo || o > hi) return false;
      continue;
    }
    double a = (lo - o) / d, b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

Scene::Triangle make_triangle(const Vec3& a, const Vec3& b, const Vec3& c, double reflectance,
                              std::int32_t owner) {
  Scene::Triangle t;
  t.v0 = a;
  t.e1 = b - a;
  t.e2 = c - a;
  t.normal = normalized(cross(t.e1, t.e2));
  t.reflectance = reflectance;
  t.owner = owner;
  return t;
}

bool better(double t, std::uint32_t idx, const std::optional<RayHit>& best) {
  return !best || t < best->distance || (t == best->distance && idx < best->triangle);
}

}  // namespace

std::optional<RayHit> Scene::intersect_plane(const Ray& ray, double t_max) const {
  if (ray.direction.z >= 0.0) return std::nullopt;
  const double t = -ray.origin.z / ray.direction.z;
  if (t <= kHitEpsilon || t >= t_max) return std::nullopt;
  if (!analytic_plane_) {
    const Vec3 p = ray.origin + ray.direction * t;
    const auto& hb = heightfield_bounds_;
    if (p.x >= hb.lo.x && p.x <= hb.hi.x && p.y >= hb.lo.y && p.y <= hb.hi.y) return std::nullopt;
  }
  RayHit hit;
  hit.distance = t;
  hit.normal = {0, 0, 1};
  hit.reflectance = seabed_.reflectance;
  hit.owner = kSeabedOwner;
  hit.triangle = static_cast<std::uint32_t>(triangles_.size());
  return hit;
}

std::optional<RayHit> Scene::intersect(const Ray& ray, double t_max) const {
  std::optional<RayHit> best;
  double limit = t_max;
  if (!nodes_.empty()) {
    std::uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      // Inclusive limit so equal-distance ties still reach the index rule.
      if (!intersect_box(ray, node.box, std::nextafter(limit, INFINITY))) continue;
      if (node.count > 0) {
        for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
          const std::uint32_t idx = order_[k];
          const auto t = intersect_triangle(ray, triangles_[idx]);
          if (t && *t < t_max && better(*t, idx, best)) {
            const Triangle& tri = triangles_[idx];
            best = RayHit{*t, tri.normal, tri.reflectance, tri.owner, idx};
            limit = *t;
          }
        }
      } else {
        const auto self = static_cast<std::uint32_t>(&node - nodes_.data());
        stack[top++] = node.first;
        stack[top++] = self + 1;
      }
    }
  }
  if (auto plane = intersect_plane(ray, t_max); plane && (!best || plane->distance < best->distance)) {
    best = plane;
  }
  return best;
}

std::optional<RayHit> Scene::intersect_brute_force(const Ray& ray, double t_max) const {
  std::optional<RayHit> best;
  for (std::uint32_t idx = 0; idx < triangles_.size(); ++idx) {
    const auto t = intersect_triangle(ray, triangles_[idx]);
    if (t && *t < t_max && better(*t, idx, best)) {
      const Triangle& tri = triangles_[idx];
      best = RayHit{*t, tri.normal, tri.reflectance, tri.owner, idx};
    }
  }
  if (auto plane = intersect_plane(ray, t_max); plane && (!best || plane->distance < best->distance)) {
    best = plane;
  }
  return best;
}

std::uint32_t Scene::build_node(std::uint32_t first, std::uint32_t count,
                                std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (std::uint32_t k = first; k < first + count; ++k) {
    const Triangle& t = triangles_[order_[k]];
    box.extend(t.v0);
    box.extend(t.v0 + t.e1);
    box.extend(t.v0 + t.e2);
    cbox.extend(centroids[order_[k]]);
  }
  nodes_[index].box = box;
  if (count <= 4) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  const int axis = cbox.longest_axis();
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  build_node(first, mid - first, centroids);
  const std::uint32_t right = build_node(mid, first + count - mid, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

void Scene::build_bvh() {
  nodes_.clear();
  order_.resize(triangles_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (triangles_.empty()) return;
  std::vector<Vec3> centroids(triangles_.size());
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    const Triangle& t = triangles_[i];
    centroids[i] = t.v0 + (t.e1 + t.e2) * (1.0 / 3.0);
  }
  nodes_.reserve(2 * triangles_.size() / 4 + 1);
  build_node(0, static_cast<std::uint32_t>(triangles_.size()), centroids);
}

nlohmann::json Scene::to_json() const {
  nlohmann::json j;
  j["seabed"] = seabed_;
  j["placements"] = placements_;
  j["object_triangles"] = object_triangles_;
  j["seabed_triangles"] = seabed_triangle_count();
  return j;
}

Scene build_scene(const SeabedConfig& seabed, std::span<const TriangleMesh> meshes,
                  std::vector<ScenePlacement> placements) {
  if (!(seabed.sensor_altitude > 0)) throw DataError("sensor altitude must be positive");
  if (!(seabed.reflectance > 0 && seabed.reflectance <= 1)) {
    throw DataError("seabed reflectance must lie in (0, 1]");
  }
  if (seabed.height_noise_amplitude < 0 || !(seabed.noise_cell > 0)) {
    throw DataError("invalid seabed noise parameters");
  }

  Scene scene;
  scene.seabed_ = seabed;
  for (std::size_t p = 0; p < placements.size(); ++p) {
    const ScenePlacement& pl = placements[p];
    if (pl.mesh_index >= meshes.size()) {
      throw DataError("placement " + std::to_string(p) + " references unknown mesh");
    }
    if (!(pl.scale > 0)) throw DataError("placement " + std::to_string(p) + " has non-positive scale");
    if (!(pl.material.reflectance > 0 && pl.material.reflectance <= 1)) {
      throw DataError("placement " + std::to_string(p) + " reflectance outside (0, 1]");
    }
    const TriangleMesh& mesh = meshes[pl.mesh_index];
    const Aabb local = mesh.bounds();
    std::vector<Vec3> world(mesh.vertices.size());
    Aabb box;
    for (std::size_t i = 0; i < world.size(); ++i) {
      world[i] = pl.transform(mesh.vertices[i], local);
      box.extend(world[i]);
    }
    if (box.lo.x < seabed.along_min || box.hi.x > seabed.along_max ||
        box.lo.y < seabed.across_min || box.hi.y > seabed.across_max) {
      throw DataError("placement " + std::to_string(p) + " (" + pl.mesh_name +
                      ") lies outside the ensonified swath");
    }
    if (box.hi.z >= seabed.sensor_altitude) {
      throw DataError("placement " + std::to_string(p) + " reaches the sensor altitude");
    }
    scene.max_object_height_ = std::max(scene.max_object_height_, box.hi.z);
    for (const auto& tri : mesh.triangles) {
      scene.triangles_.push_back(make_triangle(world[tri[0]], world[tri[1]], world[tri[2]],
                                               pl.material.reflectance, static_cast<std::int32_t>(p)));
    }
  }
  scene.object_triangles_ = scene.triangles_.size();
  scene.placements_ = std::move(placements);

  if (seabed.height_noise_amplitude > 0) {
    scene.analytic_plane_ = false;
    const double cell = seabed.noise_cell;
    const auto i0 = static_cast<long long>(std::floor(seabed.along_min / cell)) - 1;
    const auto i1 = static_cast<long long>(std::ceil(seabed.along_max / cell)) + 1;
    const auto j0 = static_cast<long long>(std::floor(seabed.across_min / cell)) - 1;
    const auto j1 = static_cast<long long>(std::ceil(seabed.across_max / cell)) + 1;
    auto vertex = [&](long long i, long long j) {
      return Vec3{static_cast<double>(i) * cell, static_cast<double>(j) * cell,
                  lattice_value(seabed, i, j)};
    };
    for (long long j = j0; j < j1; ++j) {
      for (long long i = i0; i < i1; ++i) {
        const Vec3 a = vertex(i, j), b = vertex(i + 1, j), c = vertex(i + 1, j + 1),
                   d = vertex(i, j + 1);
        // Counter-clockwise from above so normals point up.
        scene.triangles_.push_back(make_triangle(a, b, c, seabed.reflectance, kSeabedOwner));
        scene.triangles_.push_back(make_triangle(a, c, d, seabed.reflectance, kSeabedOwner));
      }
    }
    scene.heightfield_bounds_.extend(Vec3{static_cast<double>(i0) * cell, static_cast<double>(j0) * cell, 0});
    scene.heightfield_bounds_.extend(Vec3{static_cast<double>(i1) * cell, static_cast<double>(j1) * cell, 0});
  }
  scene.build_bvh();
  return scene;
}

}  // namespace wrecksim
