#pragma once

#include <cstdint>

#include "wrecksim/grid.hpp"

namespace wrecksim {

/// Seeded sonar-like seabed texture: smooth value-noise relief modulated by
/// Rayleigh speckle. Used when no real terrain scans are at hand (examples,
/// tests); it is not a substitute for real terrain in experiments.
GrayImage procedural_terrain(std::size_t width, std::size_t height, std::uint64_t seed,
                             double mean_level = 90.0);

}  // namespace wrecksim
