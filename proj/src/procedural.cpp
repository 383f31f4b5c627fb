#include "wrecksim/procedural.hpp"

#include <algorithm>
#include <cmath>

#include "wrecksim/rng.hpp"

namespace wrecksim {
namespace {

double lattice(std::uint64_t seed, long long i, long long j) {
  const std::uint64_t h = hash_combine(hash_combine(seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(j));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const auto i = static_cast<long long>(fx0), j = static_cast<long long>(fy0);
  double fx = x - fx0, fy = y - fy0;
  fx = fx * fx * (3 - 2 * fx);
  fy = fy * fy * (3 - 2 * fy);
  const double a = lattice(seed, i, j), b = lattice(seed, i + 1, j);
  const double c = lattice(seed, i, j + 1), d = lattice(seed, i + 1, j + 1);
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

}  // namespace

GrayImage procedural_terrain(std::size_t width, std::size_t height, std::uint64_t seed, double mean_level) {
  GrayImage out(width, height);
  Rng rng(derive_seed(seed, "speckle"));
  const std::uint64_t relief = derive_seed(seed, "relief");
  constexpr double kSigma = 0.7978845608028654;  // unit-mean Rayleigh
  for (std::size_t v = 0; v < height; ++v) {
    for (std::size_t u = 0; u < width; ++u) {
      const double x = static_cast<double>(u), y = static_cast<double>(v);
      const double n = 0.6 * value_noise(relief, x / 64.0, y / 64.0) + 0.4 * value_noise(relief ^ 1, x / 16.0, y / 16.0);
      const double level = mean_level * (0.75 + 0.5 * n);
      const double speckle = 0.5 + 0.5 * rng.rayleigh(kSigma);
      out.at(u, v) = static_cast<std::uint8_t>(std::clamp<long long>(round_half_up(level * speckle), 0, 255));
    }
  }
  return out;
}

}  // namespace wrecksim
