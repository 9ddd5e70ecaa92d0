#pragma once

// Image containers, resizing, and the on-disk frame codecs (8-bit RGB PNG and
// raw little-endian u16 millimeter depth).

#include <png.h>

#include <algorithm>
#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "demoforge/error.hpp"

namespace demoforge {

/// Interleaved 8-bit image, row-major HWC.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

/// Row-major depth in meters; 0 marks an invalid pixel.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

/// Raw sensor depth, millimeters.
struct DepthMm {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;

  DepthMm() = default;
  DepthMm(int w, int h, std::uint16_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint16_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Bilinear resize with half-pixel centers (no corner alignment).
inline ImageU8 resize_bilinear(const ImageU8& src, int out_w, int out_h) {
  ImageU8 dst(out_w, out_h, src.channels);
  const double sx = static_cast<double>(src.width) / out_w;
  const double sy = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
        const double bot = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        dst.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

/// Nearest-neighbor resize that also converts millimeters to meters. Invalid
/// (0) pixels are copied, never blended.
inline DepthMap resize_depth_nearest(const DepthMm& src, int out_w, int out_h) {
  DepthMap dst(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * src.height / out_h), src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * src.width / out_w), src.width - 1);
      dst.at(x, y) = static_cast<float>(src.at(sx, sy)) / 1000.0f;
    }
  }
  return dst;
}

/// Mean over non-overlapping blocks; dimensions must divide evenly.
inline std::vector<double> area_downsample(const ImageU8& src, int out_w, int out_h, int channel) {
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h, 0.0);
  const int bw = src.width / out_w;
  const int bh = src.height / out_h;
  const double inv = 1.0 / (255.0 * bw * bh);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (int y = oy * bh; y < (oy + 1) * bh; ++y) {
        for (int x = ox * bw; x < (ox + 1) * bw; ++x) acc += src.at(x, y, channel);
      }
      out[static_cast<std::size_t>(oy) * out_w + ox] = acc * inv;
    }
  }
  return out;
}

inline ImageU8 to_grayscale(const ImageU8& src) {
  if (src.channels == 1) return src;
  ImageU8 dst(src.width, src.height, 1);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const double g = 0.299 * src.at(x, y, 0) + 0.587 * src.at(x, y, 1) + 0.114 * src.at(x, y, 2);
      dst.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(g), 0L, 255L));
    }
  }
  return dst;
}

// ---------------------------------------------------------------------------
// codecs

inline ImageU8 read_png_rgb(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorCode::CorruptImage, path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  ImageU8 out(static_cast<int>(img.width), static_cast<int>(img.height), 3);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::CorruptImage, path.string() + ": " + img.message);
  }
  return out;
}

/// Fast-deflate RGB PNG (level 1, RLE strategy, no row filters). Captures are
/// written once and decoded many times, so encode speed wins over size.
inline void write_png_rgb(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels != 3) throw Error(ErrorCode::InvalidArgument, "write_png_rgb expects 3 channels");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(ErrorCode::IoFailure, path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorCode::IoFailure, path.string() + ": png encode failed");
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 1);
  png_set_compression_strategy(png, 3);  // Z_RLE
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw Error(ErrorCode::IoFailure, path.string());
}

inline DepthMm read_depth_raw(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<unsigned char> bytes(n * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() || in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::CorruptImage, path.string() + ": expected " + std::to_string(bytes.size()) + " bytes");
  }
  DepthMm out(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  return out;
}

inline void write_depth_raw(const std::filesystem::path& path, const DepthMm& depth) {
  std::vector<unsigned char> bytes(depth.data.size() * 2);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(depth.data[i] & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(depth.data[i] >> 8);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, path.string());
}

}  // namespace demoforge
