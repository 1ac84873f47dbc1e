#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vfmv/core.hpp"
#include "vfmv/image.hpp"

namespace vfmv {

/// One fronto-parallel layer. The texture is expressed in reference-view
/// pixel coordinates, placed with its top-left pixel at (x0, y0); everything
/// outside the texture rectangle is transparent.
struct SceneLayer {
  std::string name;
  double depth = 1.0;
  int x0 = 0;
  int y0 = 0;
  ColorImage texture;   // RGB
  Image<float> alpha;   // one channel, [0, 1]
  int plane_tag = -1;   // focal plane this layer marks (focus ruler), -1 if none
};

/// Ordered far to near.
struct LayeredScene {
  int width = 0;   // reference resolution
  int height = 0;
  std::vector<SceneLayer> layers;
  std::array<float, 3> background{0.5f, 0.5f, 0.5f};
};

/// Throws InvalidArgument when layer depths do not strictly decrease or a
/// texture/alpha pair is malformed.
void validate_scene(const LayeredScene& scene);

struct LensConfig {
  double focal_length = 0.05;
  double aperture_diameter = 0.025;
  double focus_distance = 2.0;
  double pixels_per_unit = 56000.0;
};

void validate_lens(const LensConfig& lens);

/// Thin-lens circle-of-confusion radius in pixels:
///   ppu * (A / 2) * f * |z - z_f| / (z * (z_f - f)).
double coc_radius(const LensConfig& lens, double depth);

/// Area-coverage disk kernel split into full-weight row runs (evaluated with
/// prefix sums) and fractional rim taps.
class DiskKernel {
 public:
  explicit DiskKernel(double radius);

  double radius() const { return radius_; }
  int extent() const { return extent_; }
  bool identity() const { return identity_; }
  /// Weight at offset (dx, dy), normalized so that all weights sum to 1.
  double weight(int dx, int dy) const;

  struct Run {
    int dy, x_begin, x_end;  // inclusive range of unit-coverage taps
  };
  struct Tap {
    int dx, dy;
    double w;
  };
  const std::vector<Run>& runs() const { return runs_; }
  const std::vector<Tap>& taps() const { return taps_; }
  double norm() const { return norm_; }

 private:
  double radius_;
  int extent_ = 0;
  bool identity_ = true;
  std::vector<Run> runs_;
  std::vector<Tap> taps_;
  double norm_ = 1.0;  // 1 / sum of raw coverage
};

/// Blurs every channel with the disk kernel. Samples outside the image are
/// treated as zero when `zero_outside`, otherwise the border is replicated.
Image<float> disk_blur(const Image<float>& img, double radius, bool zero_outside);

/// Subpixel shift (layer motion) of a layer at `depth` between the reference
/// view and `view`: content moves by (-fx*bx*dv/z, -fy*by*du/z) pixels.
std::array<double, 2> layer_shift(const ArrayGeometry& geometry, ViewIndex view,
                                  const CameraIntrinsics& k, double depth);

/// All-in-focus rendering: shifted layers composited back to front.
ViewImage render_pinhole(const LayeredScene& scene, const ArrayGeometry& geometry,
                         ViewIndex view, const CameraIntrinsics& k);

/// Per-layer disk blur of radius coc_radius(lens, depth), applied to
/// premultiplied color and alpha jointly, then composited back to front.
ViewImage render_defocused(const LayeredScene& scene, const ArrayGeometry& geometry,
                           ViewIndex view, const CameraIntrinsics& k,
                           const LensConfig& lens);

/// Index of the front-most layer with alpha >= 0.5 at each pixel of the
/// pinhole rendering (-1 for background).
Image<int> render_layer_ids(const LayeredScene& scene, const ArrayGeometry& geometry,
                            ViewIndex view, const CameraIntrinsics& k);

struct SynthOptions {
  /// Magnification per focus setting s = 1 + kappa * (z_f - reference_distance),
  /// applied about the principal point after defocus.
  double kappa = 0.002;
  double reference_distance = 0.0;  // <= 0: depth of the first plane
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

double magnification(const SynthOptions& options, const std::vector<FocalPlane>& planes,
                     double focus_distance);

/// Isotropic scale about (cx, cy), bilinear with replicated border.
ColorImage magnify(const ColorImage& img, double scale, double cx, double cy);

/// Renders view (u, v) with the lens focused at planes[assignment(u, v)].
/// `assignment` is indexed row-major and holds plane indices.
VFMVField generate_vfmv(const LayeredScene& scene, const ArrayGeometry& geometry,
                        const CameraIntrinsics& k, const LensConfig& lens_template,
                        const std::vector<FocalPlane>& planes, GridDims dims,
                        const std::vector<int>& assignment, const SynthOptions& options,
                        const std::string& policy_name);

/// Sum of modified-Laplacian magnitudes over a window x window neighbourhood.
GrayImage focus_measure(const GrayImage& image, int window);

/// Mean of `measure` over pixels where mask is set (0 if the mask is empty).
double masked_mean(const GrayImage& measure, const Mask& mask);

/// Pixels where layer `layer` is front-most, eroded by `erode` pixels.
Mask layer_region(const Image<int>& ids, int layer, int erode);

/// Multi-scale band-limited noise texture in [0, 1], RGB tinted.
ColorImage make_noise_texture(int width, int height, std::uint64_t seed,
                              std::array<float, 3> tint);

struct DeskSceneConfig {
  int width = 768;
  int height = 512;
  double near_depth = 1.0;
  double mid_depth = 2.0;
  double far_depth = 4.0;
  bool focus_ruler = true;  // one tile per focal plane along the bottom edge
  int margin = 128;         // far layer overhang on each side, px
  std::uint64_t seed = 7;
};

/// Three textured layers (far, mid, near) plus an optional focus ruler whose
/// tiles sit at the focal-plane depths.
LayeredScene make_desk_scene(const DeskSceneConfig& config,
                             const std::vector<FocalPlane>& planes);

/// Indices of the layers named "near", "mid", "far" (or -1).
int find_layer(const LayeredScene& scene, const std::string& name);

}  // namespace vfmv
