#pragma once

#include <filesystem>

#include "wrecksim/grid.hpp"

namespace wrecksim {

/// Reads any 8/16-bit PNG as 8-bit grayscale (color is converted, alpha
/// dropped). Throws DataError on missing or undecodable files.
GrayImage read_png(const std::filesystem::path& path);

/// Writes 8-bit grayscale. Output bytes depend only on pixel content.
void write_png(const std::filesystem::path& path, const GrayImage& image);

/// Masks are stored as 0/255 PNGs; reading accepts {0,1} or {0,255}.
void write_mask_png(const std::filesystem::path& path, const Grid<std::uint8_t>& mask);
LabelMask read_mask_png(const std::filesystem::path& path);

}  // namespace wrecksim
