#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "depthprop/io.hpp"

namespace depthprop {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> pixels;  // interleaved, in file value range

  double max_value() const { return bit_depth == 16 ? 65535.0 : 255.0; }
};

RawPng read_raw_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open PNG: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }

  RawPng out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.pixels.resize(n);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  row.resize(row_bytes);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    std::uint16_t* dst = out.pixels.data() + static_cast<std::size_t>(y) * out.width * out.channels;
    const std::size_t samples = static_cast<std::size_t>(out.width) * out.channels;
    if (out.bit_depth == 16) {
      for (std::size_t i = 0; i < samples; ++i) {
        dst[i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);  // PNG is big-endian
      }
    } else {
      for (std::size_t i = 0; i < samples; ++i) dst[i] = row[i];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_raw_png(const std::filesystem::path& path, int width, int height, int channels,
                   int bit_depth, const std::vector<std::uint16_t>& pixels) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open PNG for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed for " + path.string());
  }

  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path.string());
  }

  png_init_io(png, fp.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t samples = static_cast<std::size_t>(width) * channels;
  row.resize(samples * (bit_depth == 16 ? 2 : 1));
  for (int y = 0; y < height; ++y) {
    const std::uint16_t* src = pixels.data() + static_cast<std::size_t>(y) * samples;
    if (bit_depth == 16) {
      for (std::size_t i = 0; i < samples; ++i) {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xFF);
      }
    } else {
      for (std::size_t i = 0; i < samples; ++i) row[i] = static_cast<png_byte>(src[i]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

GrayImage read_image_png(const std::filesystem::path& path) {
  const RawPng raw = read_raw_png(path);
  const float scale = static_cast<float>(1.0 / raw.max_value());
  if (raw.channels == 1) {
    GrayImage out(raw.width, raw.height);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = raw.pixels[i] * scale;
    return out;
  }
  ColorImage rgb(raw.width, raw.height);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = raw.pixels[i] * scale;
  return to_gray(rgb);
}

DepthMap read_depth_png(const std::filesystem::path& path, double scale) {
  const RawPng raw = read_raw_png(path);
  if (raw.channels != 1) throw IoError("depth PNG must be single-channel: " + path.string());
  DepthMap out(raw.width, raw.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = raw.pixels[i] * scale;  // raw 0 stays invalid
  }
  return out;
}

void write_gray16_png(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<std::uint16_t> pixels(img.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 65535.0f));
  }
  write_raw_png(path, img.width, img.height, 1, 16, pixels);
}

void write_rgb8_png(const ColorImage& img, const std::filesystem::path& path) {
  std::vector<std::uint16_t> pixels(img.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  write_raw_png(path, img.width, img.height, 3, 8, pixels);
}

void write_depth_png(const DepthMap& depth, const std::filesystem::path& path, double scale) {
  std::vector<std::uint16_t> pixels(depth.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double raw = depth.data[i] > 0.0 ? std::round(depth.data[i] / scale) : 0.0;
    pixels[i] = static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
  }
  write_raw_png(path, depth.width, depth.height, 1, 16, pixels);
}

std::pair<int, int> read_png_size(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open PNG: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to read PNG header: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  png_destroy_read_struct(&png, &info, nullptr);
  return {w, h};
}

}  // namespace depthprop
