#include "vlo/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "vlo/error.hpp"

namespace vlo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  return f;
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // 16-bit samples are stored big-endian, as in the file

  unsigned sample(std::size_t i) const {
    if (bit_depth == 16) return (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
    return bytes[i];
  }
};

RawPng read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    fail(ErrorCode::kFormat, path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIo, "libpng initialisation failed");
  }
  RawPng raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kFormat, "corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  rows.resize(raw.height);
  for (int r = 0; r < raw.height; ++r) rows[r] = raw.bytes.data() + stride * r;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "libpng initialisation failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int r = 0; r < height; ++r) rows[r] = const_cast<png_bytep>(bytes.data() + stride * r);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_image_png(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  if (raw.bit_depth != 8 && raw.bit_depth != 16) fail(ErrorCode::kFormat, path.string() + ": expected an 8- or 16-bit image");
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  Grid g(raw.height, raw.width, raw.channels);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = raw.sample(i) / scale;
  return Image(std::move(g));
}

void write_image_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) fail(ErrorCode::kInvalidArgument, "image bit depth must be 8 or 16");
  const Grid& g = img.grid();
  std::vector<std::uint8_t> bytes(g.size() * static_cast<std::size_t>(bit_depth / 8));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = std::clamp(g[i], 0.0, 1.0);
    if (bit_depth == 8) {
      bytes[i] = static_cast<std::uint8_t>(std::lround(x * 255.0));
    } else {
      const auto v = static_cast<std::uint16_t>(std::lround(x * 65535.0));
      bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  write_png(path, img.width(), img.height(), img.channels(), bit_depth, bytes);
}

SparseDepthMap read_depth_png(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  if (raw.bit_depth != 16 || raw.channels != 1) {
    fail(ErrorCode::kFormat, path.string() + ": expected a 16-bit single-channel depth PNG");
  }
  Grid g(raw.height, raw.width, 1);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = raw.sample(i) / 256.0;
  return SparseDepthMap(std::move(g), DepthRange{0.0, 65535.0 / 256.0});
}

void write_depth_png(const std::filesystem::path& path, const Grid& depth) {
  if (depth.channels() != 1) fail(ErrorCode::kInvalidArgument, "depth PNG needs a single-channel grid");
  std::vector<std::uint8_t> bytes(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double scaled = std::clamp(std::round(depth[i] * 256.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(scaled);
    bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  write_png(path, depth.width(), depth.height(), 1, 16, bytes);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.bits().begin(), mask.bits().end());
  for (auto& b : bytes) b = b ? 255 : 0;
  write_png(path, mask.width(), mask.height(), 1, 8, bytes);
}

}  // namespace vlo
