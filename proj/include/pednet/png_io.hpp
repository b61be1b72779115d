#pragma once

// PNG raster I/O via libpng: 16-bit grayscale probability rasters
// (value / 65535 = probability) and 4-entry palette label rasters.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "pednet/raster.hpp"

namespace pednet {

struct PngError : RasterError {
  using RasterError::RasterError;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void write_gray16_png(const std::filesystem::path& path, int width, int height,
                             const std::vector<std::uint16_t>& pixels) {
  detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw PngError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PngError("libpng write failure: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);  // pixels are host little-endian
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r)
    rows[r] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(pixels.data() + static_cast<std::size_t>(r) * width));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline std::vector<std::uint16_t> read_gray16_png(const std::filesystem::path& path,
                                                  int& width, int& height) {
  detail::FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw PngError("cannot open for reading: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("libpng read failure: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("expected 16-bit grayscale PNG: " + path.string());
  }
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  png_set_swap(png);
  std::vector<std::uint16_t> pixels(static_cast<std::size_t>(width) * height);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r)
    rows[r] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * width);
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

// Indexed PNG with the fixed 4-class palette.
inline void write_label_png(const std::filesystem::path& path, const LabelRaster& raster) {
  detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw PngError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PngError("libpng write failure: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, raster.width, raster.height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_color palette[4] = {
      {0, 0, 0},        // background
      {66, 135, 245},   // sidewalk
      {235, 64, 52},    // crossing
      {247, 215, 61},   // corner bulb
  };
  png_set_PLTE(png, info, palette, 4);
  png_write_info(png, info);
  std::vector<png_bytep> rows(raster.height);
  for (int r = 0; r < raster.height; ++r)
    rows[r] = const_cast<png_bytep>(raster.values.data() + static_cast<std::size_t>(r) * raster.width);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline LabelRaster read_label_png(const std::filesystem::path& path) {
  detail::FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw PngError("cannot open for reading: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("libpng read failure: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_PALETTE ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("expected 8-bit palette PNG: " + path.string());
  }
  LabelRaster out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.values.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r)
    rows[r] = out.values.data() + static_cast<std::size_t>(r) * out.width;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace pednet
