#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wrecksim/grid.hpp"
#include "wrecksim/rng.hpp"

namespace wrecksim {

struct DeformParams {
  int magnitude_bins = 10;  // N_r
  int angle_bins = 20;      // N_theta
  double max_displacement = 0;  // r_max in pixels; see default_max_displacement
  /// Inclusive range the per-quadrant magnitude bin is drawn from.
  /// Negative hi means magnitude_bins - 1.
  int min_magnitude_bin = 0;
  int max_magnitude_bin = -1;

  int channels() const { return magnitude_bins + angle_bins; }  // D_def
  friend bool operator==(const DeformParams&, const DeformParams&) = default;
  int magnitude_hi() const { return max_magnitude_bin < 0 ? magnitude_bins - 1 : max_magnitude_bin; }
  void validate() const;
};

/// 0.15 * min(H, W).
double default_max_displacement(std::size_t width, std::size_t height);

struct DeformBin {
  std::uint8_t magnitude = 0;
  std::uint8_t angle = 0;
  friend bool operator==(const DeformBin&, const DeformBin&) = default;
};

struct Displacement {
  double r = 0;      // pixels
  double theta = 0;  // radians in [0, 2pi)
};

/// Bin centres: r = bin * r_max / (N_r - 1) (0 when N_r == 1), theta = bin * 2pi / N_theta.
Displacement bin_to_value(int magnitude_bin, int angle_bin, const DeformParams& params);

struct DeformationField {
  Grid<DeformBin> bins;
  DeformParams params;
  std::uint32_t origin_u = 0;
  std::uint32_t origin_v = 0;

  std::size_t width() const { return bins.width(); }
  std::size_t height() const { return bins.height(); }
  friend bool operator==(const DeformationField&, const DeformationField&) = default;
};

/// All-(0,0) field: nothing moves.
DeformationField identity_field(std::size_t width, std::size_t height, const DeformParams& params);

/// Splits the ship at its pixel centroid into four quadrants (u >= u_c,
/// v >= v_c) and draws one (magnitude, angle) bin per quadrant. Quadrants
/// are drawn in the order (lo,lo), (hi,lo), (lo,hi), (hi,hi) of (u, v).
DeformationField generate_quadrant_field(const LabelMask& mask, const DeformParams& params, Rng& rng);

/// H x W x D_def tensor, channel-last. Magnitude block first.
struct OneHotField {
  std::size_t width = 0;
  std::size_t height = 0;
  int magnitude_bins = 0;
  int angle_bins = 0;
  std::vector<float> data;

  int channels() const { return magnitude_bins + angle_bins; }
  float& at(std::size_t u, std::size_t v, int c) {
    return data[(v * width + u) * static_cast<std::size_t>(channels()) + static_cast<std::size_t>(c)];
  }
  float at(std::size_t u, std::size_t v, int c) const {
    return data[(v * width + u) * static_cast<std::size_t>(channels()) + static_cast<std::size_t>(c)];
  }
};

OneHotField encode_onehot(const DeformationField& field);

/// Per-block argmax; ties go to the lower channel. Accepts soft
/// distributions. `params` supplies N_r/N_theta/r_max for the result.
DeformationField decode_onehot(const OneHotField& onehot, const DeformParams& params);

struct FracturedScan {
  GrayImage image;   // I_f; zero outside moved ship pixels
  LabelMask mask;    // M_f
  ShadowMask shadow;
};

/// Integer pixel offset applied by a bin (round-half-up of r cos, r sin).
std::pair<long long, long long> pixel_offset(const DeformBin& bin, const DeformParams& params);

/// Forward warp of ship pixels; collisions keep the max intensity, masks OR.
/// Shadow pixels move with the field at their own location, and shadow is
/// cleared wherever the warped ship lands.
FracturedScan apply_field(const GrayImage& image, const LabelMask& mask, const ShadowMask& shadow,
                          const DeformationField& field);

/// DEFF: "DEFF", u32 width, u32 height, u32 N_r, u32 N_theta, f32 r_max,
/// u32 origin_u, u32 origin_v, then (u8 r_bin, u8 theta_bin) row-major.
/// All little-endian.
std::string encode_deff(const DeformationField& field);
DeformationField decode_deff(const std::string& bytes);
void write_deff(const std::filesystem::path& path, const DeformationField& field);
DeformationField read_deff(const std::filesystem::path& path);

}  // namespace wrecksim
