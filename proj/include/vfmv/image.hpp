#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vfmv {

/// Dense interleaved image. Pixel (x, y) channel c lives at
/// ((y * width + x) * channels + c). Pixel centers sit on integer coordinates.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    assert(width >= 0 && height >= 0 && channels >= 1);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }

  T* row(int y) noexcept { return data_.data() + index(0, y, 0); }
  const T* row(int y) const noexcept { return data_.data() + index(0, y, 0); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// Single-channel working image for registration and feature detection.
using GrayImage = Image<double>;
/// Storage image for views: linear-light RGB in [0, 1].
using ColorImage = Image<float>;
/// 0/1 validity mask.
using Mask = Image<unsigned char>;

template <typename T, typename U>
bool same_size(const Image<T>& a, const Image<U>& b) {
  return a.width() == b.width() && a.height() == b.height();
}

/// Bilinear sample of channel c. Returns false (and leaves out untouched)
/// when (x, y) falls outside [0, w-1] x [0, h-1].
template <typename T>
bool sample_bilinear(const Image<T>& img, double x, double y, int c,
                     double& out) {
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return false;
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  double fx = x - x0;
  double fy = y - y0;
  if (x0 == w - 1) { x0 = std::max(0, w - 2); fx = (w == 1) ? 0.0 : 1.0; }
  if (y0 == h - 1) { y0 = std::max(0, h - 2); fy = (h == 1) ? 0.0 : 1.0; }
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double a = img.at(x0, y0, c);
  const double b = img.at(x1, y0, c);
  const double d = img.at(x0, y1, c);
  const double e = img.at(x1, y1, c);
  const double top = fx == 0.0 ? a : a + fx * (b - a);
  const double bot = fx == 0.0 ? d : d + fx * (e - d);
  out = fy == 0.0 ? top : top + fy * (bot - top);
  return true;
}

/// Bilinear sample where samples outside the image contribute zero. Used for
/// premultiplied layers whose exterior is fully transparent.
template <typename T>
double sample_bilinear_zero(const Image<T>& img, double x, double y, int c) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double fx = x - fx0;
  const double fy = y - fy0;
  auto px = [&](int xi, int yi) -> double {
    return img.contains(xi, yi) ? static_cast<double>(img.at(xi, yi, c)) : 0.0;
  };
  if (fx == 0.0 && fy == 0.0) return px(x0, y0);
  const double top = (1.0 - fx) * px(x0, y0) + fx * px(x0 + 1, y0);
  if (fy == 0.0) return top;
  const double bot = (1.0 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bot;
}

/// Linear-light luminance (Rec. 709 weights).
inline GrayImage to_gray(const ColorImage& color) {
  GrayImage gray(color.width(), color.height(), 1);
  if (color.channels() == 1) {
    auto src = color.values();
    auto dst = gray.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    return gray;
  }
  for (int y = 0; y < color.height(); ++y) {
    const float* s = color.row(y);
    double* d = gray.row(y);
    for (int x = 0; x < color.width(); ++x, s += color.channels()) {
      d[x] = 0.2126 * s[0] + 0.7152 * s[1] + 0.0722 * s[2];
    }
  }
  return gray;
}

inline ColorImage gray_to_color(const GrayImage& gray) {
  ColorImage color(gray.width(), gray.height(), 3);
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      const float v = static_cast<float>(gray.at(x, y));
      color.at(x, y, 0) = v;
      color.at(x, y, 1) = v;
      color.at(x, y, 2) = v;
    }
  }
  return color;
}

}  // namespace vfmv
