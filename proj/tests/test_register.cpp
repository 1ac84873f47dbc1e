#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ecc_trials.hpp"
#include "helpers.hpp"
#include "vfmv/register.hpp"
#include "vfmv/synth.hpp"

using namespace vfmv;
using namespace testutil;

namespace {

GrayImage textured(int w, int h, std::uint64_t seed) { return noise_texture(w, h, seed, 2.0); }

Eigen::Matrix3d random_matrix(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m.data()[i] = u(rng);
  return m;
}

GrayImage mask_image(const Mask& m) {
  GrayImage g(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) g.at(x, y) = m.at(x, y);
  return g;
}

}  // namespace

TEST_CASE("ecc score: self, gain/bias, anti-correlation, symmetry") {
  const GrayImage a = textured(40, 30, 1);
  const GrayImage b = textured(40, 30, 2);
  CHECK(ecc_score(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  GrayImage gain = a;
  for (double& v : gain.values()) v = 2.5 * v + 0.1;
  CHECK(ecc_score(a, gain) == doctest::Approx(1.0).epsilon(1e-12));
  GrayImage neg = a;
  for (double& v : neg.values()) v = 1.0 - v;
  CHECK(ecc_score(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ecc_score(a, b) == doctest::Approx(ecc_score(b, a)).epsilon(1e-14));
  GrayImage gb = b;
  for (double& v : gb.values()) v = 3.0 * v - 0.7;
  CHECK(std::abs(ecc_score(a, gb) - ecc_score(a, b)) < 1e-12);
  const double s = ecc_score(a, b);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
}

TEST_CASE("ecc score errors and masks") {
  const GrayImage a = textured(20, 20, 3);
  GrayImage flat(20, 20, 1, 0.4);
  try {
    ecc_score(a, flat);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateInput);
  }
  Mask one(20, 20, 1, 0);
  one.at(3, 3) = 1;
  CHECK_THROWS_AS(ecc_score(a, a, &one), Error);
  // outside the mask anything goes
  Mask left(20, 20, 1, 0);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 10; ++x) left.at(x, y) = 1;
  GrayImage b = a;
  for (int y = 0; y < 20; ++y)
    for (int x = 10; x < 20; ++x) b.at(x, y) = 0.0;
  CHECK(ecc_score(a, b, &left) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("homography normalization and errors") {
  Eigen::Matrix3d m;
  m << 2, 0, 4, 0, 2, 6, 0, 0, 2;
  const Homography h(m);
  CHECK(h.matrix()(2, 2) == 1.0);
  CHECK(h.matrix()(0, 2) == 2.0);
  Eigen::Matrix3d singular;
  singular << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  try {
    Homography bad(singular);
    FAIL("expected SingularHomography");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularHomography);
  }
  const auto p = Homography::from_params({1.01, 0.02, 3, -0.01, 0.99, -2, 1e-5, 2e-5});
  CHECK(Homography::from_params(p.params()).matrix() == p.matrix());
  CHECK((p * p.inverse()).matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  // rescaling conjugates by the coordinate scale
  const Eigen::Vector2d x(12.0, -7.0);
  CHECK((p.rescaled(2.0).apply(2.0 * x) - 2.0 * p.apply(x)).norm() < 1e-9);
}

TEST_CASE("decompose identity and translation") {
  auto b = decompose_homography(Homography());
  CHECK(b.A == Eigen::Matrix2d::Identity());
  CHECK(b.T == Eigen::Vector2d::Zero());
  CHECK(b.V == Eigen::RowVector2d::Zero());
  CHECK(b.h == 1.0);
  b = decompose_homography(Homography::translation(4.5, -3.0));
  CHECK(b.A == Eigen::Matrix2d::Identity());
  CHECK(b.T == Eigen::Vector2d(4.5, -3.0));
  CHECK(b.V == Eigen::RowVector2d::Zero());
  CHECK(b.h == 1.0);
}

TEST_CASE("compose(decompose(H)) == H exactly for 1000 random matrices") {
  std::mt19937_64 rng(17);
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Matrix3d raw = random_matrix(rng);
    if (compose_homography(decompose_homography(raw)) == raw) ++exact;
    if (std::abs(raw.determinant()) > 1e-3) {
      const Homography h(raw);
      const Eigen::Matrix3d back = compose_homography(decompose_homography(h));
      CHECK(back == h.matrix());
    }
  }
  CHECK(exact == 1000);
}

TEST_CASE("homography scale of a similarity") {
  CHECK(homography_scale(Homography::scale_about(1.03, 10, 20)) == doctest::Approx(1.03).epsilon(1e-12));
  CHECK(homography_scale(centered_similarity(0.97, 0.04, 2, 3, 100, 80)) == doctest::Approx(0.97).epsilon(1e-12));
  CHECK(distance_to_identity(Homography::translation(0.5, -2.0)) == 2.0);
}

TEST_CASE("warp with identity and integer translation") {
  const GrayImage img = textured(30, 20, 5);
  const auto same = warp_image(img, Homography());
  CHECK(same.image == img);
  for (auto m : same.mask.values()) CHECK(m == 1);

  const auto shifted = warp_image(img, Homography::translation(10, 0));
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 30; ++x) {
      if (x < 10) {
        CHECK(shifted.mask.at(x, y) == 0);
        CHECK(shifted.image.at(x, y) == 0.0);
      } else {
        CHECK(shifted.mask.at(x, y) == 1);
        CHECK(shifted.image.at(x, y) == doctest::Approx(img.at(x - 10, y)).epsilon(1e-12));
      }
    }
}

TEST_CASE("warp round trip loses only interpolation detail") {
  // bilinear error is at most (|f_xx| + |f_yy|) / 8 per pass
  const double a = 0.2, kx = 2 * std::numbers::pi / 40, ky = 2 * std::numbers::pi / 30;
  GrayImage img(120, 90);
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 120; ++x) img.at(x, y) = 0.5 + a * std::sin(kx * x) * std::cos(ky * y);
  const Homography h = Homography::from_params({1.02, 0.01, 2.3, -0.015, 0.99, -1.7, 2e-5, -1e-5});
  const auto there = warp_image(img, h);
  const auto back = warp_image(there.image, h.inverse());
  const auto back_mask = warp_image(mask_image(there.mask), h.inverse());
  // the second pass samples a field whose curvature is scaled by the warp (< 1.1^2)
  const double bound = a * (kx * kx + ky * ky) / 8 * (1.0 + 1.1 * 1.1);
  double err = 0, worst = 0;
  int n = 0;
  for (int y = 0; y < 90; ++y)
    for (int x = 0; x < 120; ++x) {
      if (!back.mask.at(x, y) || back_mask.image.at(x, y) < 1.0 - 1e-9) continue;
      const double e = std::abs(back.image.at(x, y) - img.at(x, y));
      err += e;
      worst = std::max(worst, e);
      ++n;
    }
  CHECK(n > 8000);
  CHECK(worst <= bound);
  CHECK(err / n < 1e-3);
}

TEST_CASE("color warp uses the same mapping") {
  ColorImage c(20, 10, 3);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x)
      for (int ch = 0; ch < 3; ++ch) c.at(x, y, ch) = static_cast<float>(x + 100 * ch);
  const auto w = warp_image(c, Homography::translation(3, 0));
  CHECK(w.image.at(5, 4, 2) == doctest::Approx(202.0f));
  CHECK(w.mask.at(2, 4) == 0);
  const auto r = apply_registration(c, Homography::translation(3, 0));
  CHECK(r.at(5, 4, 0) == doctest::Approx(8.0f));
  CHECK(r.at(19, 4, 0) == doctest::Approx(19.0f));  // replicated border
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(validate_ecc_config({0, 1e-6, 3, WarpModel::homography}), Error);
  CHECK_THROWS_AS(validate_ecc_config({10, 0.0, 3, WarpModel::homography}), Error);
  CHECK_THROWS_AS(validate_ecc_config({10, 1e-6, 0, WarpModel::homography}), Error);
  CHECK_NOTHROW(validate_ecc_config({}));
}

TEST_CASE("aligning an image with itself stops at once") {
  const WarpCanvas wc(160, 120, 3);
  const auto r = ecc_align(wc.templ, wc.templ);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(distance_to_identity(r.homography) < 1e-6);
  CHECK(r.ecc >= 0.999999);
}

TEST_CASE("known warp: scale 1.02 and shift (3, -2)") {
  const int w = 256, h = 192;
  const WarpCanvas wc(w, h, 21);
  const Homography truth = centered_similarity(1.02, 0.0, 3.0, -2.0, w, h);
  const GrayImage moving = wc.moving(truth);
  const auto r = ecc_align(wc.templ, moving);
  CHECK(corner_rms(r.homography, truth, w, h) < 0.5);
  CHECK(r.ecc > 0.999);
  CHECK(trace_monotone(r));

  // with noise
  GrayImage noisy = moving;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.01);
  for (double& v : noisy.values()) v += n(rng);
  const auto rn = ecc_align(wc.templ, noisy);
  CHECK(corner_rms(rn.homography, truth, w, h) < 1.0);
  CHECK(trace_monotone(rn));
}

TEST_CASE("random warps from the test family are recovered") {
  const int w = 256, h = 192;
  const WarpCanvas wc(w, h, 8);
  std::mt19937_64 rng(99);
  int good = 0;
  for (int t = 0; t < 10; ++t) {
    const auto rw = draw_warp(rng);
    const Homography truth = centered_similarity(rw.scale, rw.theta, rw.tx, rw.ty, w, h);
    const auto r = ecc_align(wc.templ, wc.moving(truth));
    if (corner_rms(r.homography, truth, w, h) < 0.5 && r.ecc > 0.999) ++good;
    CHECK(trace_monotone(r));
    CHECK(r.ecc <= 1.0);
    CHECK(r.ecc >= -1.0);
  }
  CHECK(good >= 9);
}

TEST_CASE("restricted warp models") {
  const int w = 160, h = 120;
  const WarpCanvas wc(w, h, 12);
  const Homography truth = Homography::translation(2.5, -1.5);
  EccConfig cfg;
  cfg.warp_model = WarpModel::translation;
  const auto r = ecc_align(wc.templ, wc.moving(truth), cfg);
  CHECK(corner_rms(r.homography, truth, w, h) < 0.1);
  // translation-only warps keep the linear block fixed
  CHECK(decompose_homography(r.homography).A == Eigen::Matrix2d::Identity());
  cfg.warp_model = WarpModel::affine;
  const Homography aff = centered_similarity(1.01, 0.01, 1.0, 2.0, w, h);
  const auto ra = ecc_align(wc.templ, wc.moving(aff), cfg);
  CHECK(corner_rms(ra.homography, aff, w, h) < 0.5);
  CHECK(decompose_homography(ra.homography).V == Eigen::RowVector2d::Zero());
}

namespace {

VFMVField small_field(double kappa, double baseline, GridDims dims, int n_planes, double aperture = 0.025,
                      int width = 128, int height = 96) {
  const auto planes = make_planes(n_planes, 1.0, 4.0);
  DeskSceneConfig d;
  d.width = width;
  d.height = height;
  d.margin = 24;
  const auto scene = make_desk_scene(d, planes);
  const CameraIntrinsics k{2800, 2800, (width - 1) / 2.0, (height - 1) / 2.0, 0};
  SynthOptions opt;
  opt.kappa = kappa;
  return generate_vfmv(scene, {baseline, baseline, dims.center()}, k, {0.05, aperture, 2.0, 56000.0}, planes,
                       dims, focal_assignment(AssignmentPolicy::raster_cycle(), dims, n_planes), opt,
                       "raster_cycle");
}

}  // namespace

TEST_CASE("register_field: nothing to correct") {
  // no magnification, no parallax, no defocus: every view equals the reference
  const auto f = small_field(0.0, 0.0, {3, 3}, 5, 0.0);
  const auto r = register_field(f);
  REQUIRE(r.results.size() == 9);
  for (const auto& res : r.results) {
    CHECK(distance_to_identity(res.homography) < 1e-9);
    CHECK(res.ecc == doctest::Approx(1.0));
  }
  CHECK(r.field.metadata().registered);
  for (int i = 0; i < 9; ++i) CHECK(r.field.view(f.dims().unflat(i)) == f.view(f.dims().unflat(i)));
}

TEST_CASE("register_field recovers the magnification ratio") {
  // pinhole views, so magnification is the only difference between them
  const double kappa = 0.01;
  const auto f = small_field(kappa, 0.0, {3, 3}, 9, 0.0, 256, 192);
  const auto r = register_field(f);
  SynthOptions opt;
  opt.kappa = kappa;
  const auto& planes = f.planes();
  const double s_ref = magnification(opt, planes, f.plane_of(f.dims().center()).depth);
  const Eigen::Vector2d pp(127.5, 95.5);
  for (int i = 0; i < 9; ++i) {
    CAPTURE(i);
    const double s = magnification(opt, planes, f.plane_of(f.dims().unflat(i)).depth);
    CHECK(homography_scale(r.results[i].homography) == doctest::Approx(s / s_ref).epsilon(5e-4));
    CHECK(homography_scale_at(r.results[i].homography, pp) == doctest::Approx(s / s_ref).epsilon(5e-4));
    // the magnification is about the principal point
    CHECK((r.results[i].homography.apply(pp) - pp).norm() < 0.05);
  }
}

TEST_CASE("register_field on a 9x9 field") {
  const auto f = small_field(0.002, 2.0 / 2800, {9, 9}, 34);
  const auto r = register_field(f);
  REQUIRE(r.results.size() == 81);
  const int c = f.dims().flat(f.dims().center());
  CHECK(r.results[c].homography.matrix() == Eigen::Matrix3d::Identity());
  CHECK(r.results[c].ecc == 1.0);
  CHECK(r.field.view(f.dims().center()) == f.view(f.dims().center()));
  CHECK(r.field.metadata().view_homographies.size() == 81);
  for (const auto& res : r.results) CHECK(trace_monotone(res));
  // explicit reference
  const auto r0 = register_field(small_field(0.002, 0.0, {2, 2}, 4), ViewIndex{0, 1});
  CHECK(r0.results[1].ecc == 1.0);
  CHECK_THROWS_AS(register_field(f, ViewIndex{9, 0}), Error);
}
