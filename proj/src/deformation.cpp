#include "wrecksim/deformation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace wrecksim {

void DeformParams::validate() const {
  if (magnitude_bins < 1 || angle_bins < 1) throw DataError("bin counts must be >= 1");
  if (magnitude_bins > 256 || angle_bins > 256) throw DataError("bin counts must fit in a byte");
  if (!(max_displacement > 0)) throw DataError("r_max must be positive");
  if (min_magnitude_bin < 0 || magnitude_hi() >= magnitude_bins || min_magnitude_bin > magnitude_hi()) {
    throw DataError("magnitude bin sampling range is invalid");
  }
}

double default_max_displacement(std::size_t width, std::size_t height) {
  // Stored as f32 in DEFF; keep the value exactly representable.
  return static_cast<float>(0.15 * static_cast<double>(std::min(width, height)));
}

Displacement bin_to_value(int magnitude_bin, int angle_bin, const DeformParams& params) {
  if (magnitude_bin < 0 || magnitude_bin >= params.magnitude_bins || angle_bin < 0 ||
      angle_bin >= params.angle_bins) {
    throw DataError("deformation bin out of range");
  }
  Displacement d;
  if (params.magnitude_bins > 1) {
    d.r = magnitude_bin * params.max_displacement / (params.magnitude_bins - 1);
  }
  d.theta = angle_bin * 2.0 * std::numbers::pi / params.angle_bins;
  return d;
}

DeformationField identity_field(std::size_t width, std::size_t height, const DeformParams& params) {
  DeformationField f;
  f.bins = Grid<DeformBin>(width, height);
  f.params = params;
  return f;
}

DeformationField generate_quadrant_field(const LabelMask& mask, const DeformParams& params, Rng& rng) {
  params.validate();
  double su = 0, sv = 0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < mask.height(); ++v) {
    for (std::size_t u = 0; u < mask.width(); ++u) {
      if (mask.at(u, v)) {
        su += static_cast<double>(u);
        sv += static_cast<double>(v);
        ++n;
      }
    }
  }
  if (n == 0) throw DataError("cannot fracture: mask has no ship pixels");

  DeformationField f = identity_field(mask.width(), mask.height(), params);
  f.origin_u = static_cast<std::uint32_t>(round_half_up(su / static_cast<double>(n)));
  f.origin_v = static_cast<std::uint32_t>(round_half_up(sv / static_cast<double>(n)));

  std::array<DeformBin, 4> quadrant{};
  for (auto& q : quadrant) {
    q.magnitude = static_cast<std::uint8_t>(rng.uniform_int(params.min_magnitude_bin, params.magnitude_hi()));
    q.angle = static_cast<std::uint8_t>(rng.uniform_int(0, params.angle_bins - 1));
  }
  for (std::size_t v = 0; v < mask.height(); ++v) {
    for (std::size_t u = 0; u < mask.width(); ++u) {
      if (!mask.at(u, v)) continue;
      const int q = (u >= f.origin_u ? 1 : 0) + (v >= f.origin_v ? 2 : 0);
      f.bins.at(u, v) = quadrant[static_cast<std::size_t>(q)];
    }
  }
  return f;
}

OneHotField encode_onehot(const DeformationField& field) {
  OneHotField out;
  out.width = field.width();
  out.height = field.height();
  out.magnitude_bins = field.params.magnitude_bins;
  out.angle_bins = field.params.angle_bins;
  out.data.assign(out.width * out.height * static_cast<std::size_t>(out.channels()), 0.0f);
  for (std::size_t v = 0; v < out.height; ++v) {
    for (std::size_t u = 0; u < out.width; ++u) {
      const DeformBin b = field.bins.at(u, v);
      out.at(u, v, b.magnitude) = 1.0f;
      out.at(u, v, out.magnitude_bins + b.angle) = 1.0f;
    }
  }
  return out;
}

DeformationField decode_onehot(const OneHotField& onehot, const DeformParams& params) {
  if (onehot.magnitude_bins != params.magnitude_bins || onehot.angle_bins != params.angle_bins) {
    throw DataError("one-hot channel layout does not match deformation params");
  }
  if (onehot.data.size() != onehot.width * onehot.height * static_cast<std::size_t>(onehot.channels())) {
    throw DataError("one-hot tensor has wrong channel count");
  }
  DeformationField f = identity_field(onehot.width, onehot.height, params);
  auto argmax = [&](std::size_t u, std::size_t v, int first, int count) {
    int best = 0;
    for (int c = 1; c < count; ++c) {
      if (onehot.at(u, v, first + c) > onehot.at(u, v, first + best)) best = c;
    }
    return static_cast<std::uint8_t>(best);
  };
  for (std::size_t v = 0; v < onehot.height; ++v) {
    for (std::size_t u = 0; u < onehot.width; ++u) {
      f.bins.at(u, v) = {argmax(u, v, 0, params.magnitude_bins),
                         argmax(u, v, params.magnitude_bins, params.angle_bins)};
    }
  }
  return f;
}

std::pair<long long, long long> pixel_offset(const DeformBin& bin, const DeformParams& params) {
  const Displacement d = bin_to_value(bin.magnitude, bin.angle, params);
  return {round_half_up(d.r * std::cos(d.theta)), round_half_up(d.r * std::sin(d.theta))};
}

FracturedScan apply_field(const GrayImage& image, const LabelMask& mask, const ShadowMask& shadow,
                          const DeformationField& field) {
  require_same_shape(image, mask, "apply_field image/mask");
  require_same_shape(image, shadow, "apply_field image/shadow");
  require_same_shape(image, field.bins, "apply_field image/field");

  const auto w = static_cast<long long>(image.width());
  const auto h = static_cast<long long>(image.height());
  FracturedScan out{GrayImage(image.width(), image.height()), LabelMask(image.width(), image.height()),
                    ShadowMask(image.width(), image.height())};

  const int n_r = field.params.magnitude_bins, n_t = field.params.angle_bins;
  std::vector<std::pair<long long, long long>> offsets(static_cast<std::size_t>(n_r * n_t));
  for (int r = 0; r < n_r; ++r) {
    for (int t = 0; t < n_t; ++t) {
      offsets[static_cast<std::size_t>(r * n_t + t)] =
          pixel_offset({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(t)}, field.params);
    }
  }
  auto offset = [&](const DeformBin& b) {
    if (b.magnitude >= n_r || b.angle >= n_t) throw DataError("apply_field: bin out of range");
    return offsets[static_cast<std::size_t>(b.magnitude * n_t + b.angle)];
  };

  for (long long v = 0; v < h; ++v) {
    for (long long u = 0; u < w; ++u) {
      const auto su = static_cast<std::size_t>(u), sv = static_cast<std::size_t>(v);
      const bool is_ship = mask.at(su, sv) != 0;
      const bool is_shadow = shadow.at(su, sv) != 0;
      if (!is_ship && !is_shadow) continue;
      const auto [du, dv] = offset(field.bins.at(su, sv));
      const long long tu = u + du, tv = v + dv;
      if (tu < 0 || tv < 0 || tu >= w || tv >= h) continue;
      const auto dst_u = static_cast<std::size_t>(tu), dst_v = static_cast<std::size_t>(tv);
      if (is_ship) {
        auto& px = out.image.at(dst_u, dst_v);
        px = std::max(px, image.at(su, sv));
        out.mask.at(dst_u, dst_v) = kShipwreck;
      } else {
        out.shadow.at(dst_u, dst_v) = 1;
      }
    }
  }
  for (std::size_t i = 0; i < out.shadow.size(); ++i) {
    if (out.mask[i]) out.shadow[i] = 0;
  }
  return out;
}

// --- DEFF -------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("DEFF: truncated header");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return x;
}

}  // namespace

std::string encode_deff(const DeformationField& field) {
  std::string out = "DEFF";
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.params.magnitude_bins));
  put_u32(out, static_cast<std::uint32_t>(field.params.angle_bins));
  const float r_max = static_cast<float>(field.params.max_displacement);
  std::uint32_t bits;
  std::memcpy(&bits, &r_max, sizeof bits);
  put_u32(out, bits);
  put_u32(out, field.origin_u);
  put_u32(out, field.origin_v);
  out.reserve(out.size() + 2 * field.bins.size());
  for (const DeformBin& b : field.bins.data()) {
    out.push_back(static_cast<char>(b.magnitude));
    out.push_back(static_cast<char>(b.angle));
  }
  return out;
}

DeformationField decode_deff(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "DEFF") != 0) throw DataError("DEFF: bad magic");
  std::size_t pos = 4;
  DeformationField f;
  const std::uint32_t w = get_u32(bytes, pos);
  const std::uint32_t h = get_u32(bytes, pos);
  f.params.magnitude_bins = static_cast<int>(get_u32(bytes, pos));
  f.params.angle_bins = static_cast<int>(get_u32(bytes, pos));
  const std::uint32_t bits = get_u32(bytes, pos);
  float r_max;
  std::memcpy(&r_max, &bits, sizeof r_max);
  f.params.max_displacement = r_max;
  f.origin_u = get_u32(bytes, pos);
  f.origin_v = get_u32(bytes, pos);
  const std::size_t expected = static_cast<std::size_t>(w) * h * 2;
  if (bytes.size() - pos != expected) throw DataError("DEFF: payload size mismatch");
  f.bins = Grid<DeformBin>(w, h);
  for (std::size_t i = 0; i < f.bins.size(); ++i) {
    const DeformBin b{static_cast<std::uint8_t>(bytes[pos + 2 * i]),
                      static_cast<std::uint8_t>(bytes[pos + 2 * i + 1])};
    if (b.magnitude >= f.params.magnitude_bins || b.angle >= f.params.angle_bins) {
      throw DataError("DEFF: bin out of range at pixel " + std::to_string(i));
    }
    f.bins[i] = b;
  }
  return f;
}

void write_deff(const std::filesystem::path& path, const DeformationField& field) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_deff(field);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

DeformationField read_deff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_deff(bytes);
}

}  // namespace wrecksim
