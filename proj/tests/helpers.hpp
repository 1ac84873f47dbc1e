#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vfmv/core.hpp"
#include "vfmv/filters.hpp"
#include "vfmv/image.hpp"

namespace testutil {

using namespace vfmv;

inline ColorImage solid(int w, int h, float value) { return ColorImage(w, h, 3, value); }

// Views with distinct content so that ordering mistakes show up.
inline FieldParts grid_parts(int rows, int cols, int w, int h, int num_planes) {
  FieldParts p;
  p.dims = {rows, cols};
  p.planes = make_planes(num_planes, 1.0, 4.0);
  p.intrinsics = {100.0, 100.0, (w - 1) / 2.0, (h - 1) / 2.0, 0.0};
  p.geometry = {0.01, 0.01, p.dims.center()};
  const auto asg = focal_assignment(AssignmentPolicy::raster_cycle(), p.dims, num_planes);
  for (int k = 0; k < p.dims.count(); ++k) {
    ColorImage img(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(((x + 3 * y + 7 * k + c) % 17) / 16.0);
    p.views.push_back({p.dims.unflat(k), asg[k], std::move(img)});
  }
  p.metadata.policy = "raster_cycle";
  return p;
}

// Smooth random texture in [0, 1] (sum of blurred noise bands).
inline GrayImage noise_texture(int w, int h, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  GrayImage white(w, h);
  for (double& v : white.values()) v = uni(rng);
  GrayImage band = gaussian_blur(white, sigma);
  double sq = 0.0;
  for (double v : band.values()) sq += v * v;
  const double rms = std::sqrt(sq / band.pixel_count());
  for (double& v : band.values()) v = std::clamp(0.5 + 0.15 * v / rms, 0.0, 1.0);
  return band;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vfmv_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
