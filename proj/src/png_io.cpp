#include "vfmv/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "vfmv/error.hpp"

namespace vfmv {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return f;
}

float srgb_to_linear(float c) {
  return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb(float c) {
  c = std::clamp(c, 0.0f, 1.0f);
  return c <= 0.0031308f ? 12.92f * c : 1.055f * std::pow(c, 1.0f / 2.4f) - 0.055f;
}

std::uint16_t to_u16(float v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
}

void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                const std::vector<png_bytep>& rows) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng init failed for '" + path.string() + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "PNG write failed for '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (bit_depth == 16) {
    png_set_gAMA(png, info, 1.0);
  } else {
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  }
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ColorImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng init failed for '" + path.string() + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ColorImage img(width, height, 3);
  const bool wide = bit_depth == 16;
  std::vector<float> lut;
  if (!wide) {
    lut.resize(256);
    for (int i = 0; i < 256; ++i) lut[i] = srgb_to_linear(i / 255.0f);
  }
  for (int y = 0; y < height; ++y) {
    float* dst = img.row(y);
    if (wide) {
      const auto* src = reinterpret_cast<const std::uint16_t*>(rows[y]);
      for (int i = 0; i < width * 3; ++i) dst[i] = src[i] / 65535.0f;
    } else {
      const unsigned char* src = rows[y];
      for (int i = 0; i < width * 3; ++i) dst[i] = lut[src[i]];
    }
  }
  return img;
}

void write_png16(const std::filesystem::path& path, const ColorImage& image) {
  const int w = image.width();
  const int h = image.height();
  const int c = image.channels();
  std::vector<std::uint16_t> buffer(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < 3; ++k) {
        buffer[(static_cast<std::size_t>(y) * w + x) * 3 + k] =
            to_u16(image.at(x, y, c == 1 ? 0 : k));
      }
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(buffer.data() + static_cast<std::size_t>(y) * w * 3);
  }
  write_rows(path, w, h, 16, rows);
}

void write_png8_srgb(const std::filesystem::path& path, const ColorImage& image) {
  const int w = image.width();
  const int h = image.height();
  const int c = image.channels();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < 3; ++k) {
        const float v = linear_to_srgb(image.at(x, y, c == 1 ? 0 : k));
        buffer[(static_cast<std::size_t>(y) * w + x) * 3 + k] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * w * 3;
  write_rows(path, w, h, 8, rows);
}

ColorImage quantize16(const ColorImage& image) {
  ColorImage out = image;
  for (float& v : out.values()) v = to_u16(v) / 65535.0f;
  return out;
}

}  // namespace vfmv
