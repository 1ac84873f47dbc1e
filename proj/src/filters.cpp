#include "vfmv/filters.hpp"

#include <cmath>

namespace vfmv {

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h);
  std::vector<double> line(w + 2 * r);
  for (int y = 0; y < h; ++y) {
    const double* src = img.row(y);
    for (int i = 0; i < w + 2 * r; ++i) {
      line[i] = src[std::clamp(i - r, 0, w - 1)];
    }
    double* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      const double* p = &line[x];
      for (std::size_t j = 0; j < k.size(); ++j) acc += k[j] * p[j];
      dst[x] = acc;
    }
  }
  GrayImage out(w, h);
  std::vector<double> acc(w);
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int j = -r; j <= r; ++j) {
      const double* src = tmp.row(std::clamp(y + j, 0, h - 1));
      const double kv = k[j + r];
      for (int x = 0; x < w; ++x) acc[x] += kv * src[x];
    }
    std::copy(acc.begin(), acc.end(), out.row(y));
  }
  return out;
}

GrayImage decimate2(const GrayImage& img) {
  const int w = (img.width() + 1) / 2;
  const int h = (img.height() + 1) / 2;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
  }
  return out;
}

GrayImage upsample2(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  GrayImage out(2 * w, 2 * h);
  for (int y = 0; y < 2 * h; ++y) {
    const int y0 = std::min(y / 2, h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const bool oddy = (y % 2) != 0;
    for (int x = 0; x < 2 * w; ++x) {
      const int x0 = std::min(x / 2, w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const bool oddx = (x % 2) != 0;
      double v = img.at(x0, y0);
      if (oddx && oddy) {
        v = 0.25 * (img.at(x0, y0) + img.at(x1, y0) + img.at(x0, y1) + img.at(x1, y1));
      } else if (oddx) {
        v = 0.5 * (img.at(x0, y0) + img.at(x1, y0));
      } else if (oddy) {
        v = 0.5 * (img.at(x0, y0) + img.at(x0, y1));
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

void central_gradient(const GrayImage& img, GrayImage& gx, GrayImage& gy) {
  const int w = img.width();
  const int h = img.height();
  gx = GrayImage(w, h);
  gy = GrayImage(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    const double sy = (yp - ym) > 0 ? 1.0 / (yp - ym) : 0.0;
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const double sx = (xp - xm) > 0 ? 1.0 / (xp - xm) : 0.0;
      gx.at(x, y) = (img.at(xp, y) - img.at(xm, y)) * sx;
      gy.at(x, y) = (img.at(x, yp) - img.at(x, ym)) * sy;
    }
  }
}

}  // namespace vfmv
