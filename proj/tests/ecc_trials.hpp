#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "vfmv/filters.hpp"
#include "vfmv/register.hpp"
#include "vfmv/synth.hpp"

namespace testutil {

using namespace vfmv;

// Template cut from the middle of a larger textured canvas; the moving image
// is resampled from the canvas as well, so the content is complete out to the
// borders for any warp in the test family.
struct WarpCanvas {
  int width, height, margin;
  GrayImage canvas;
  GrayImage templ;

  WarpCanvas(int w, int h, std::uint64_t seed, double blur = 2.0, int m = 64)
      : width(w), height(h), margin(m) {
    canvas = gaussian_blur(to_gray(make_noise_texture(w + 2 * m, h + 2 * m, seed, {1, 1, 1})), blur);
    templ = GrayImage(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) templ.at(x, y) = canvas.at(x + m, y + m);
  }

  // moving(H x) = templ(x)
  GrayImage moving(const Homography& h) const {
    GrayImage out(width, height);
    const Homography inv = h.inverse();
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const auto q = inv.apply(Eigen::Vector2d(x, y));
        double v = 0;
        sample_bilinear(canvas, q.x() + margin, q.y() + margin, 0, v);
        out.at(x, y) = v;
      }
    return out;
  }
};

// Similarity about the image center: scale s, rotation theta, then shift.
inline Homography centered_similarity(double s, double theta, double tx, double ty, int w, int h) {
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  Eigen::Matrix3d m;
  m << s * std::cos(theta), -s * std::sin(theta), 0, s * std::sin(theta), s * std::cos(theta), 0, 0, 0, 1;
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity(), b = Eigen::Matrix3d::Identity();
  a(0, 2) = -cx;
  a(1, 2) = -cy;
  b(0, 2) = cx + tx;
  b(1, 2) = cy + ty;
  return Homography(Eigen::Matrix3d(b * m * a));
}

inline double corner_rms(const Homography& est, const Homography& truth, int w, int h) {
  double se = 0;
  for (const Eigen::Vector2d p : {Eigen::Vector2d(0, 0), Eigen::Vector2d(w - 1, 0), Eigen::Vector2d(0, h - 1),
                                  Eigen::Vector2d(w - 1, h - 1)}) {
    se += (est.apply(p) - truth.apply(p)).squaredNorm();
  }
  return std::sqrt(se / 4);
}

// Within each level, accepted-step ecc never drops by more than slack.
inline bool trace_monotone(const RegistrationResult& r, double slack = 1e-6) {
  for (std::size_t i = 1; i < r.per_level_trace.size(); ++i) {
    const auto& a = r.per_level_trace[i - 1];
    const auto& b = r.per_level_trace[i];
    if (a.level == b.level && b.ecc < a.ecc - slack) return false;
  }
  return true;
}

struct RandomWarp {
  double scale, theta, tx, ty;
};

// scale in [0.95, 1.05], |rotation| <= 3 degrees, |translation| <= 10 px
inline RandomWarp draw_warp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RandomWarp w;
  w.scale = 1.0 + 0.05 * u(rng);
  w.theta = 3.0 * std::numbers::pi / 180.0 * u(rng);
  w.tx = 10.0 * u(rng);
  w.ty = 10.0 * u(rng);
  return w;
}

}  // namespace testutil
