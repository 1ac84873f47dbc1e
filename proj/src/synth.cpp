#include "vfmv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "vfmv/filters.hpp"
#include "vfmv/parallel.hpp"

namespace vfmv {

namespace {

constexpr int kSubsamples = 16;

// Premultiplied RGBA canvas of a layer, padded by `pad` transparent pixels.
Image<float> layer_canvas(const SceneLayer& layer, int pad) {
  const int tw = layer.texture.width();
  const int th = layer.texture.height();
  Image<float> canvas(tw + 2 * pad, th + 2 * pad, 4, 0.0f);
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      const float a = layer.alpha.at(x, y);
      float* p = &canvas.at(x + pad, y + pad, 0);
      p[0] = layer.texture.at(x, y, 0) * a;
      p[1] = layer.texture.at(x, y, 1) * a;
      p[2] = layer.texture.at(x, y, 2) * a;
      p[3] = a;
    }
  }
  return canvas;
}

int canvas_pad(double radius) { return static_cast<int>(std::ceil(radius + 0.5)) + 2; }

// Composites a premultiplied canvas whose top-left pixel sits at (ox, oy) in
// reference coordinates, moved by `shift`, over `out`.
void composite_over(ColorImage& out, const Image<float>& canvas, int ox, int oy,
                    std::array<double, 2> shift) {
  const double qx = -shift[0];
  const double qy = -shift[1];
  const double iqx = std::floor(qx);
  const double iqy = std::floor(qy);
  const double fx = qx - iqx;
  const double fy = qy - iqy;
  const int ix = static_cast<int>(iqx) - ox;
  const int iy = static_cast<int>(iqy) - oy;
  // Canvas column for output x is x + ix (+ fx).
  const int x_lo = std::max(0, -ix - 1);
  const int x_hi = std::min(out.width() - 1, canvas.width() - ix);
  const int y_lo = std::max(0, -iy - 1);
  const int y_hi = std::min(out.height() - 1, canvas.height() - iy);
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  auto px = [&](int cx, int cy, int c) -> double {
    return (cx >= 0 && cy >= 0 && cx < canvas.width() && cy < canvas.height())
               ? static_cast<double>(canvas.at(cx, cy, c))
               : 0.0;
  };
  for (int y = y_lo; y <= y_hi; ++y) {
    const int cy = y + iy;
    for (int x = x_lo; x <= x_hi; ++x) {
      const int cx = x + ix;
      double v[4];
      for (int c = 0; c < 4; ++c) {
        if (fx == 0.0 && fy == 0.0) {
          v[c] = px(cx, cy, c);
        } else {
          v[c] = w00 * px(cx, cy, c) + w10 * px(cx + 1, cy, c) + w01 * px(cx, cy + 1, c) +
                 w11 * px(cx + 1, cy + 1, c);
        }
      }
      if (v[3] <= 0.0) continue;
      float* o = &out.at(x, y, 0);
      for (int c = 0; c < 3; ++c) {
        o[c] = static_cast<float>(v[c] + (1.0 - v[3]) * o[c]);
      }
    }
  }
}

ColorImage background_image(const LayeredScene& scene) {
  ColorImage out(scene.width, scene.height, 3);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = scene.background[c];
    }
  }
  return out;
}

// Layer canvases blurred for one focus setting (identity when coc is zero).
std::vector<Image<float>> focused_canvases(const LayeredScene& scene, const LensConfig* lens,
                                           std::vector<int>& pads) {
  std::vector<Image<float>> canvases(scene.layers.size());
  pads.assign(scene.layers.size(), 0);
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const auto& layer = scene.layers[i];
    const double r = lens ? coc_radius(*lens, layer.depth) : 0.0;
    const DiskKernel kernel(r);
    const int pad = kernel.identity() ? canvas_pad(0.0) : canvas_pad(r);
    pads[i] = pad;
    canvases[i] = layer_canvas(layer, pad);
    if (!kernel.identity()) canvases[i] = disk_blur(canvases[i], r, true);
  }
  return canvases;
}

ColorImage composite_view(const LayeredScene& scene, const std::vector<Image<float>>& canvases,
                          const std::vector<int>& pads, const ArrayGeometry& geometry,
                          ViewIndex view, const CameraIntrinsics& k) {
  ColorImage out = background_image(scene);
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const auto& layer = scene.layers[i];
    composite_over(out, canvases[i], layer.x0 - pads[i], layer.y0 - pads[i],
                   layer_shift(geometry, view, k, layer.depth));
  }
  return out;
}

}  // namespace

void validate_scene(const LayeredScene& scene) {
  if (scene.width <= 0 || scene.height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "scene resolution must be positive");
  }
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const auto& l = scene.layers[i];
    if (!(l.depth > 0.0)) {
      throw Error(ErrorCode::NonPositiveDepth, "NonPositiveDepth(layer '" + l.name + "')");
    }
    if (i > 0 && !(l.depth < scene.layers[i - 1].depth)) {
      throw Error(ErrorCode::InvalidArgument,
                  "layers must be ordered far to near with strictly decreasing depth ('" +
                      l.name + "')");
    }
    if (l.texture.channels() != 3 || l.alpha.channels() != 1 ||
        l.texture.width() != l.alpha.width() || l.texture.height() != l.alpha.height()) {
      throw Error(ErrorCode::InvalidArgument, "layer '" + l.name + "' texture/alpha mismatch");
    }
  }
}

void validate_lens(const LensConfig& lens) {
  if (!(lens.focal_length > 0.0) || !(lens.focus_distance > lens.focal_length) ||
      lens.aperture_diameter < 0.0 || !(lens.pixels_per_unit > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "lens needs focus_distance > focal_length > 0, aperture >= 0, ppu > 0");
  }
}

double coc_radius(const LensConfig& lens, double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "NonPositiveDepth(" + std::to_string(depth) + ")");
  }
  validate_lens(lens);
  const double f = lens.focal_length;
  const double zf = lens.focus_distance;
  return lens.pixels_per_unit * (lens.aperture_diameter / 2.0) * f * std::abs(depth - zf) /
         (depth * (zf - f));
}

DiskKernel::DiskKernel(double radius) : radius_(std::max(0.0, radius)) {
  extent_ = static_cast<int>(std::ceil(radius_ + 0.5));
  const double r2 = radius_ * radius_;
  double sum = 0.0;
  int nonzero = 0;
  for (int dy = -extent_; dy <= extent_; ++dy) {
    int run_begin = 0;
    int run_end = -1;
    bool in_run = false;
    for (int dx = -extent_; dx <= extent_; ++dx) {
      int count = 0;
      for (int sy = 0; sy < kSubsamples; ++sy) {
        const double py = dy - 0.5 + (sy + 0.5) / kSubsamples;
        for (int sx = 0; sx < kSubsamples; ++sx) {
          const double px = dx - 0.5 + (sx + 0.5) / kSubsamples;
          if (px * px + py * py <= r2) ++count;
        }
      }
      if (count == 0) continue;
      ++nonzero;
      if (count == kSubsamples * kSubsamples) {
        if (!in_run) {
          run_begin = dx;
          in_run = true;
        }
        run_end = dx;
        sum += 1.0;
      } else {
        const double w = static_cast<double>(count) / (kSubsamples * kSubsamples);
        taps_.push_back({dx, dy, w});
        sum += w;
      }
    }
    if (in_run) runs_.push_back({dy, run_begin, run_end});
  }
  identity_ = nonzero <= 1;
  if (identity_) {
    runs_ = {{0, 0, 0}};
    taps_.clear();
    extent_ = 0;
    sum = 1.0;
  }
  norm_ = 1.0 / sum;
}

double DiskKernel::weight(int dx, int dy) const {
  for (const auto& run : runs_) {
    if (run.dy == dy && dx >= run.x_begin && dx <= run.x_end) return norm_;
  }
  for (const auto& tap : taps_) {
    if (tap.dx == dx && tap.dy == dy) return tap.w * norm_;
  }
  return 0.0;
}

Image<float> disk_blur(const Image<float>& img, double radius, bool zero_outside) {
  const DiskKernel kernel(radius);
  if (kernel.identity()) return img;
  const int e = kernel.extent();
  const int w = img.width();
  const int h = img.height();
  const int pw = w + 2 * e;
  const int ph = h + 2 * e;
  Image<float> out(w, h, img.channels());
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  std::vector<double> prefix(static_cast<std::size_t>(pw + 1) * ph);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < ph; ++y) {
      const int sy = y - e;
      for (int x = 0; x < pw; ++x) {
        const int sx = x - e;
        double v;
        if (img.contains(sx, sy)) {
          v = img.at(sx, sy, c);
        } else if (zero_outside) {
          v = 0.0;
        } else {
          v = img.at(std::clamp(sx, 0, w - 1), std::clamp(sy, 0, h - 1), c);
        }
        padded[static_cast<std::size_t>(y) * pw + x] = v;
      }
      double* pre = &prefix[static_cast<std::size_t>(y) * (pw + 1)];
      pre[0] = 0.0;
      const double* row = &padded[static_cast<std::size_t>(y) * pw];
      for (int x = 0; x < pw; ++x) pre[x + 1] = pre[x] + row[x];
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (const auto& run : kernel.runs()) {
          const double* pre = &prefix[static_cast<std::size_t>(y + e + run.dy) * (pw + 1)];
          acc += pre[x + e + run.x_end + 1] - pre[x + e + run.x_begin];
        }
        for (const auto& tap : kernel.taps()) {
          acc += tap.w * padded[static_cast<std::size_t>(y + e + tap.dy) * pw + (x + e + tap.dx)];
        }
        out.at(x, y, c) = static_cast<float>(acc * kernel.norm());
      }
    }
  }
  return out;
}

std::array<double, 2> layer_shift(const ArrayGeometry& geometry, ViewIndex view,
                                  const CameraIntrinsics& k, double depth) {
  const double dv = view.v - geometry.reference.v;
  const double du = view.u - geometry.reference.u;
  return {-k.fx * geometry.baseline_x * dv / depth, -k.fy * geometry.baseline_y * du / depth};
}

ViewImage render_pinhole(const LayeredScene& scene, const ArrayGeometry& geometry,
                         ViewIndex view, const CameraIntrinsics& k) {
  validate_scene(scene);
  std::vector<int> pads;
  const auto canvases = focused_canvases(scene, nullptr, pads);
  return {view, -1, composite_view(scene, canvases, pads, geometry, view, k)};
}

ViewImage render_defocused(const LayeredScene& scene, const ArrayGeometry& geometry,
                           ViewIndex view, const CameraIntrinsics& k, const LensConfig& lens) {
  validate_scene(scene);
  validate_lens(lens);
  std::vector<int> pads;
  const auto canvases = focused_canvases(scene, &lens, pads);
  return {view, -1, composite_view(scene, canvases, pads, geometry, view, k)};
}

Image<int> render_layer_ids(const LayeredScene& scene, const ArrayGeometry& geometry,
                            ViewIndex view, const CameraIntrinsics& k) {
  Image<int> ids(scene.width, scene.height, 1, -1);
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const auto& layer = scene.layers[i];
    const auto shift = layer_shift(geometry, view, k, layer.depth);
    for (int y = 0; y < scene.height; ++y) {
      const double ty = y - shift[1] - layer.y0;
      if (ty < -1.0 || ty > layer.alpha.height()) continue;
      for (int x = 0; x < scene.width; ++x) {
        const double tx = x - shift[0] - layer.x0;
        if (tx < -1.0 || tx > layer.alpha.width()) continue;
        if (sample_bilinear_zero(layer.alpha, tx, ty, 0) >= 0.5) ids.at(x, y) = static_cast<int>(i);
      }
    }
  }
  return ids;
}

double magnification(const SynthOptions& options, const std::vector<FocalPlane>& planes,
                     double focus_distance) {
  const double ref = options.reference_distance > 0.0 ? options.reference_distance
                                                      : planes.front().depth;
  return 1.0 + options.kappa * (focus_distance - ref);
}

ColorImage magnify(const ColorImage& img, double scale, double cx, double cy) {
  if (scale == 1.0) return img;
  ColorImage out(img.width(), img.height(), img.channels());
  const double inv = 1.0 / scale;
  for (int y = 0; y < img.height(); ++y) {
    const double sy = std::clamp(cy + (y - cy) * inv, 0.0, img.height() - 1.0);
    for (int x = 0; x < img.width(); ++x) {
      const double sx = std::clamp(cx + (x - cx) * inv, 0.0, img.width() - 1.0);
      for (int c = 0; c < img.channels(); ++c) {
        double v = 0.0;
        sample_bilinear(img, sx, sy, c, v);
        out.at(x, y, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

VFMVField generate_vfmv(const LayeredScene& scene, const ArrayGeometry& geometry,
                        const CameraIntrinsics& k, const LensConfig& lens_template,
                        const std::vector<FocalPlane>& planes, GridDims dims,
                        const std::vector<int>& assignment, const SynthOptions& options,
                        const std::string& policy_name) {
  validate_scene(scene);
  validate_lens(lens_template);
  if (static_cast<int>(assignment.size()) != dims.count()) {
    throw Error(ErrorCode::InvalidArgument, "assignment must cover the whole grid");
  }
  std::map<int, std::size_t> plane_pos;
  for (std::size_t i = 0; i < planes.size(); ++i) plane_pos[planes[i].index] = i;
  std::map<int, std::vector<int>> views_by_plane;
  for (int i = 0; i < dims.count(); ++i) {
    if (!plane_pos.contains(assignment[i])) {
      throw Error(ErrorCode::DanglingPlaneRef, "DanglingPlaneRef(" + std::to_string(assignment[i]) + ")");
    }
    views_by_plane[assignment[i]].push_back(i);
  }

  FieldParts parts;
  parts.dims = dims;
  parts.planes = planes;
  parts.intrinsics = k;
  parts.geometry = geometry;
  parts.views.resize(dims.count());

  // Blur depends only on the focus setting, so layers are blurred once per
  // plane and shared by every view focused there.
  for (const auto& [plane, views] : views_by_plane) {
    LensConfig lens = lens_template;
    lens.focus_distance = planes[plane_pos[plane]].depth;
    std::vector<int> pads;
    const auto canvases = focused_canvases(scene, &lens, pads);
    const double scale = magnification(options, planes, lens.focus_distance);
    parallel_for(static_cast<int>(views.size()), [&](int j) {
      const int flat = views[j];
      const ViewIndex idx = dims.unflat(flat);
      ColorImage img = composite_view(scene, canvases, pads, geometry, idx, k);
      img = magnify(img, scale, k.cx, k.cy);
      if (options.noise_sigma > 0.0) {
        std::seed_seq seq{static_cast<std::uint64_t>(options.seed),
                          static_cast<std::uint64_t>(flat), std::uint64_t{0x5eed}};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, options.noise_sigma);
        for (float& v : img.values()) v = static_cast<float>(v + noise(rng));
      }
      for (float& v : img.values()) v = std::clamp(v, 0.0f, 1.0f);
      parts.views[flat] = {idx, plane, std::move(img)};
    });
  }

  double z_min = 1e300;
  for (const auto& l : scene.layers) z_min = std::min(z_min, l.depth);
  parts.metadata.policy = policy_name;
  parts.metadata.max_disparity =
      scene.layers.empty() ? 0.0
                           : std::max(k.fx * geometry.baseline_x, k.fy * geometry.baseline_y) / z_min;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : scene.layers) layers.push_back({{"name", l.name}, {"depth", l.depth}});
  parts.metadata.extra = {
      {"lens",
       {{"focal_length", lens_template.focal_length},
        {"aperture_diameter", lens_template.aperture_diameter},
        {"pixels_per_unit", lens_template.pixels_per_unit}}},
      {"kappa", options.kappa},
      {"reference_distance", options.reference_distance > 0.0 ? options.reference_distance
                                                              : planes.front().depth},
      {"noise_sigma", options.noise_sigma},
      {"layers", layers}};
  parts.metadata.provenance["seed"] = options.seed;
  return assemble_field(std::move(parts));
}

GrayImage focus_measure(const GrayImage& image, int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "focus window must be odd and >= 3");
  }
  if (window > std::min(image.width(), image.height())) {
    throw Error(ErrorCode::WindowTooLarge, "WindowTooLarge(" + std::to_string(window) + ")");
  }
  const int w = image.width();
  const int h = image.height();
  GrayImage ml(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const double c = 2.0 * image.at(x, y);
      ml.at(x, y) = std::abs(c - image.at(xm, y) - image.at(xp, y)) +
                    std::abs(c - image.at(x, ym) - image.at(x, yp));
    }
  }
  // Box sum via an integral image, replicated borders.
  const int r = window / 2;
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  std::vector<double> integral(static_cast<std::size_t>(pw + 1) * (ph + 1), 0.0);
  for (int y = 0; y < ph; ++y) {
    double row = 0.0;
    const int sy = std::clamp(y - r, 0, h - 1);
    for (int x = 0; x < pw; ++x) {
      row += ml.at(std::clamp(x - r, 0, w - 1), sy);
      integral[static_cast<std::size_t>(y + 1) * (pw + 1) + x + 1] =
          integral[static_cast<std::size_t>(y) * (pw + 1) + x + 1] + row;
    }
  }
  auto at = [&](int x, int y) { return integral[static_cast<std::size_t>(y) * (pw + 1) + x]; };
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = at(x + window, y + window) - at(x, y + window) - at(x + window, y) + at(x, y);
      out.at(x, y) = std::max(0.0, s);
    }
  }
  return out;
}

double masked_mean(const GrayImage& measure, const Mask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < measure.height(); ++y) {
    for (int x = 0; x < measure.width(); ++x) {
      if (mask.at(x, y)) {
        sum += measure.at(x, y);
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Mask layer_region(const Image<int>& ids, int layer, int erode) {
  const int w = ids.width();
  const int h = ids.height();
  Mask mask(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool keep = true;
      for (int dy = -erode; dy <= erode && keep; ++dy) {
        for (int dx = -erode; dx <= erode && keep; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          keep = ids.contains(xx, yy) && ids.at(xx, yy) == layer;
        }
      }
      mask.at(x, y) = keep ? 1 : 0;
    }
  }
  return mask;
}

ColorImage make_noise_texture(int width, int height, std::uint64_t seed,
                              std::array<float, 3> tint) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  GrayImage acc(width, height, 1, 0.0);
  const double sigmas[] = {0.6, 1.2, 2.5};
  const double weights[] = {1.0, 1.0, 0.5};
  for (int s = 0; s < 3; ++s) {
    GrayImage white(width, height);
    for (double& v : white.values()) v = uni(rng);
    GrayImage band = gaussian_blur(white, sigmas[s]);
    double sq = 0.0;
    for (double v : band.values()) sq += v * v;
    const double rms = std::sqrt(sq / std::max<std::size_t>(1, band.pixel_count()));
    auto a = acc.values();
    auto b = band.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += weights[s] * b[i] / (rms > 0 ? rms : 1.0);
  }
  ColorImage tex(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double g = std::clamp(0.5 + 0.11 * acc.at(x, y), 0.02, 0.98);
      for (int c = 0; c < 3; ++c) {
        tex.at(x, y, c) = static_cast<float>(std::clamp(g * tint[c], 0.0, 1.0));
      }
    }
  }
  return tex;
}

LayeredScene make_desk_scene(const DeskSceneConfig& config, const std::vector<FocalPlane>& planes) {
  const int w = config.width;
  const int h = config.height;
  LayeredScene scene;
  scene.width = w;
  scene.height = h;
  scene.background = {0.35f, 0.35f, 0.35f};

  auto solid_layer = [&](std::string name, double depth, int x0, int y0, int lw, int lh,
                         std::uint64_t seed, std::array<float, 3> tint) {
    SceneLayer layer;
    layer.name = std::move(name);
    layer.depth = depth;
    layer.x0 = x0;
    layer.y0 = y0;
    layer.texture = make_noise_texture(lw, lh, seed, tint);
    layer.alpha = Image<float>(lw, lh, 1, 1.0f);
    return layer;
  };
  auto fx = [&](double f) { return static_cast<int>(std::lround(f * w)); };
  auto fy = [&](double f) { return static_cast<int>(std::lround(f * h)); };

  const int m = config.margin;
  const double top_band = config.focus_ruler ? 0.80 : 0.96;
  std::vector<SceneLayer> layers;
  layers.push_back(solid_layer("far", config.far_depth, -m, -m, w + 2 * m, h + 2 * m,
                               config.seed * 31 + 1, {1.0f, 0.92f, 0.85f}));

  std::vector<SceneLayer> ruler;
  if (config.focus_ruler && !planes.empty()) {
    const double pitch = static_cast<double>(w) / planes.size();
    for (std::size_t i = 0; i < planes.size(); ++i) {
      const int x0 = static_cast<int>(std::lround((i + 0.15) * pitch));
      const int x1 = static_cast<int>(std::lround((i + 0.85) * pitch));
      auto tile = solid_layer("ruler_" + std::to_string(planes[i].index), planes[i].depth, x0,
                              fy(0.85), std::max(1, x1 - x0), std::max(1, fy(0.97) - fy(0.85)),
                              config.seed * 31 + 100 + i, {0.9f, 0.95f, 1.0f});
      tile.plane_tag = planes[i].index;
      ruler.push_back(std::move(tile));
    }
  }
  auto mid = solid_layer("mid", config.mid_depth, fx(0.38), fy(0.04), fx(0.70) - fx(0.38),
                         fy(top_band) - fy(0.04), config.seed * 31 + 2, {0.85f, 1.0f, 0.88f});
  auto near = solid_layer("near", config.near_depth, fx(0.03), fy(0.04), fx(0.35) - fx(0.03),
                          fy(top_band) - fy(0.04), config.seed * 31 + 3, {1.0f, 0.85f, 0.8f});

  // A tile that shares its depth with a main layer is moved a hair closer so
  // the far-to-near order stays strict.
  for (auto& t : ruler) {
    for (const double d : {config.near_depth, config.mid_depth, config.far_depth}) {
      if (std::abs(t.depth - d) <= 1e-9 * d) t.depth = d * (1.0 - 1e-6);
    }
  }
  std::vector<SceneLayer> all = std::move(layers);
  for (auto& t : ruler) all.push_back(std::move(t));
  all.push_back(std::move(mid));
  all.push_back(std::move(near));
  std::stable_sort(all.begin(), all.end(),
                   [](const SceneLayer& a, const SceneLayer& b) { return a.depth > b.depth; });
  scene.layers = std::move(all);
  validate_scene(scene);
  return scene;
}

int find_layer(const LayeredScene& scene, const std::string& name) {
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    if (scene.layers[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace vfmv
