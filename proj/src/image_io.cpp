#include "wrecksim/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

namespace wrecksim {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  return FilePtr(std::fopen(path.string().c_str(), mode));
}

// libpng reports errors via longjmp, so these two routines keep C++ objects
// with destructors out of the setjmp frame.
bool read_png_rows(std::FILE* file, GrayImage& image, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "libpng init failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  png_bytep* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    png_free(png, rows);
    png_destroy_read_struct(&png, &info, nullptr);
    error = "corrupt PNG data";
    return false;
  }
  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  const bool has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if ((color & PNG_COLOR_MASK_ALPHA) || has_trns) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != width) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "unsupported PNG layout";
    return false;
  }
  image = GrayImage(width, height);
  rows = static_cast<png_bytep*>(png_malloc(png, sizeof(png_bytep) * height));
  for (png_uint_32 v = 0; v < height; ++v) rows[v] = image.row(v).data();
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  png_free(png, rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_png_rows(std::FILE* file, const GrayImage& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t v = 0; v < image.height(); ++v) {
    png_write_row(png, const_cast<png_bytep>(image.row(v).data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  if (!file) throw DataError("cannot open image: " + path.string());

  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  GrayImage image;
  std::string error;
  if (!read_png_rows(file.get(), image, error)) throw DataError(path.string() + ": " + error);
  return image;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  if (image.empty()) throw DataError("refusing to write empty image: " + path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file = open_file(path, "wb");
  if (!file) throw DataError("cannot write image: " + path.string());
  if (!write_png_rows(file.get(), image)) throw DataError("PNG encode failed: " + path.string());
}

void write_mask_png(const std::filesystem::path& path, const Grid<std::uint8_t>& mask) {
  GrayImage out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  write_png(path, out);
}

LabelMask read_mask_png(const std::filesystem::path& path) {
  GrayImage raw = read_png(path);
  LabelMask mask(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto p = raw[i];
    if (p != 0 && p != 1 && p != 255) {
      throw DataError(path.string() + ": mask is not binary (value " + std::to_string(p) + ")");
    }
    mask[i] = p ? kShipwreck : kTerrain;
  }
  return mask;
}

}  // namespace wrecksim
