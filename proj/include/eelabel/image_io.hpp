#pragma once

#include "eelabel/camera.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace eelabel {

/// Raw 8- or 16-bit PNG pixels, big-endian samples for 16-bit as stored.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint8_t> data;  // rows packed, no padding

  std::size_t row_bytes() const { return static_cast<std::size_t>(width) * channels * (bit_depth / 8); }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
  return f;
}

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

inline void png_warn(png_structp, png_const_charp) {}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const PngImage& img) {
  if (img.width <= 0 || img.height <= 0 || (img.bit_depth != 8 && img.bit_depth != 16) ||
      (img.channels != 1 && img.channels != 3) || img.data.size() != img.row_bytes() * img.height)
    throw Error(ErrorKind::kInvalidArgument, "malformed image for " + path.string());
  auto f = detail::open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, detail::png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::kIo, "libpng initialization failed");
  }
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r)
    rows[r] = const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(r) * img.row_bytes());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::kIo, "writing " + path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw Error(ErrorKind::kIo, "writing " + path.string());
}

/// Reads gray or RGB PNGs (8 or 16 bit); palettes and low bit depths are
/// expanded to 8 bit, alpha is dropped.
inline PngImage read_png(const std::filesystem::path& path) {
  auto f = detail::open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, detail::png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorKind::kIo, "libpng initialization failed");
  }
  PngImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::kParse, path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING, nullptr);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  img.channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  img.data.resize(img.row_bytes() * img.height);
  for (int r = 0; r < img.height; ++r)
    std::memcpy(img.data.data() + static_cast<std::size_t>(r) * img.row_bytes(), rows[r], img.row_bytes());
  png_destroy_read_struct(&png, &info, nullptr);
  if (img.channels != 1 && img.channels != 3)
    throw Error(ErrorKind::kParse, path.string() + ": unsupported channel count " + std::to_string(img.channels));
  return img;
}

/// 16-bit depth PNG: stored value * `scale` = meters, 0 = missing.
inline void write_depth_png(const std::filesystem::path& path, const DepthImage& img, double scale) {
  PngImage out{img.width, img.height, 1, 16, {}};
  out.data.resize(out.row_bytes() * img.height);
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    const double d = img.depth[i];
    long q = 0;
    if (DepthImage::valid_depth(d)) {
      q = std::lround(d / scale);
      if (q > 65535)
        throw Error(ErrorKind::kInvalidArgument,
                    "depth " + std::to_string(d) + " m exceeds the 16-bit range at scale " + std::to_string(scale));
      q = std::max(q, 1L);
    }
    out.data[2 * i] = static_cast<std::uint8_t>(q >> 8);
    out.data[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
  }
  write_png(path, out);
}

/// Fills `img.depth` (meters) from a 16-bit gray PNG.
inline void read_depth_png(const std::filesystem::path& path, double scale, DepthImage& img) {
  const PngImage p = read_png(path);
  if (p.channels != 1 || p.bit_depth != 16)
    throw Error(ErrorKind::kParse, path.string() + ": depth PNG must be 16-bit grayscale");
  img.width = p.width;
  img.height = p.height;
  img.depth.assign(static_cast<std::size_t>(p.width) * p.height, 0.0);
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    const unsigned q = (static_cast<unsigned>(p.data[2 * i]) << 8) | p.data[2 * i + 1];
    img.depth[i] = q == 0 ? 0.0 : q * scale;
  }
}

inline std::uint8_t to_u8(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

inline void write_color_png(const std::filesystem::path& path, const DepthImage& img) {
  PngImage out{img.width, img.height, 3, 8, {}};
  out.data.resize(out.row_bytes() * img.height);
  for (std::size_t i = 0; i < img.color.size(); ++i)
    for (int ch = 0; ch < 3; ++ch) out.data[3 * i + ch] = to_u8(img.color[i][ch]);
  write_png(path, out);
}

/// Fills `img.color` from an 8-bit gray or RGB PNG; gray is replicated.
inline void read_color_png(const std::filesystem::path& path, DepthImage& img) {
  const PngImage p = read_png(path);
  if (p.bit_depth != 8) throw Error(ErrorKind::kParse, path.string() + ": color PNG must be 8-bit");
  img.color.resize(static_cast<std::size_t>(p.width) * p.height);
  for (std::size_t i = 0; i < img.color.size(); ++i) {
    if (p.channels == 3)
      img.color[i] = Vec3(p.data[3 * i], p.data[3 * i + 1], p.data[3 * i + 2]) / 255.0;
    else
      img.color[i] = Vec3::Constant(p.data[i] / 255.0);
  }
  if (img.width == 0 && img.height == 0) {
    img.width = p.width;
    img.height = p.height;
  } else if (img.width != p.width || img.height != p.height) {
    throw Error(ErrorKind::kDimensionMismatch, path.string() + ": color size differs from depth size");
  }
}

/// Float depth: "DPTH", u32 version (1), u32 width, u32 height,
/// then width*height little-endian float32 meters (0 or NaN = missing).
inline void write_depth_bin(const std::filesystem::path& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  auto put_u32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("DPTH", 4);
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(img.width));
  put_u32(static_cast<std::uint32_t>(img.height));
  for (double d : img.depth) {
    const float f = DepthImage::valid_depth(d) ? static_cast<float>(d) : 0.0f;
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  if (!out) throw Error(ErrorKind::kIo, "writing " + path.string());
}

inline void read_depth_bin(const std::filesystem::path& path, DepthImage& img) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  auto get_u32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::kParse, path.string() + ": truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DPTH", 4) != 0)
    throw Error(ErrorKind::kParse, path.string() + ": not a DPTH file");
  if (get_u32() != 1) throw Error(ErrorKind::kParse, path.string() + ": unsupported DPTH version");
  const std::uint32_t w = get_u32(), h = get_u32();
  if (w == 0 || h == 0 || w > 1u << 15 || h > 1u << 15)
    throw Error(ErrorKind::kParse, path.string() + ": implausible size");
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.depth.resize(static_cast<std::size_t>(w) * h);
  for (auto& d : img.depth) {
    const std::uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    d = std::isfinite(f) && f > 0.0f ? static_cast<double>(f) : 0.0;
  }
}

}  // namespace eelabel
