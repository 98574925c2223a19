#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "gslam/image.hpp"

namespace gslam {

// Thin wrappers over the libpng simplified API. Depth maps travel as 16-bit
// grayscale (raw sensor units), color as 8-bit RGB, silhouettes as 8-bit gray.

inline void write_png_rgb8(const std::filesystem::path& path, const ImageD& rgb) {
  if (rgb.channels != 3) throw DimensionError("write_png_rgb8: expected 3 channels");
  std::vector<std::uint8_t> buf(rgb.pixel_count() * 3);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::clamp(rgb.data[i], 0.0, 1.0);
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(rgb.width);
  img.height = static_cast<png_uint_32>(rgb.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw Error("png write failed: " + path.string() + ": " + img.message);
}

inline void write_png_gray8(const std::filesystem::path& path, const ImageD& gray) {
  if (gray.channels != 1) throw DimensionError("write_png_gray8: expected 1 channel");
  std::vector<std::uint8_t> buf(gray.pixel_count());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(gray.data[i], 0.0, 1.0) * 255.0));
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(gray.width);
  img.height = static_cast<png_uint_32>(gray.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw Error("png write failed: " + path.string() + ": " + img.message);
}

/// Writes `values * scale`, rounded and clamped to the u16 range.
inline void write_png_gray16(const std::filesystem::path& path, const ImageD& values,
                             double scale) {
  if (values.channels != 1) throw DimensionError("write_png_gray16: expected 1 channel");
  std::vector<std::uint16_t> buf(values.pixel_count());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double raw = std::clamp(values.data[i] * scale, 0.0, 65535.0);
    buf[i] = static_cast<std::uint16_t>(std::lround(raw));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(values.width);
  img.height = static_cast<png_uint_32>(values.height);
  img.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw Error("png write failed: " + path.string() + ": " + img.message);
}

/// 8-bit color image, any PNG color type, as RGB in [0,1].
inline ImageD read_png_rgb8(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw DatasetFormatError("png read failed: " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
    throw DatasetFormatError("png read failed: " + path.string() + ": " + img.message);
  ImageD out(static_cast<int>(img.width), static_cast<int>(img.height), 3);
  for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] / 255.0;
  return out;
}

/// 16-bit grayscale image (depth maps), raw sample values.
inline Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw DatasetFormatError("png read failed: " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> buf(PNG_IMAGE_SIZE(img) / 2);
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
    throw DatasetFormatError("png read failed: " + path.string() + ": " + img.message);
  Image<std::uint16_t> out(static_cast<int>(img.width), static_cast<int>(img.height), 1);
  out.data = std::move(buf);
  return out;
}

}  // namespace gslam
