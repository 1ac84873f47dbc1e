#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vfmv/core.hpp"
#include "vfmv/image.hpp"

namespace vfmv {

struct ScaleSpaceConfig {
  int num_octaves = 4;
  int first_octave = -1;  // -1: start from the 2x upsampled image
  int levels_per_octave = 3;
  double peak_threshold = 0.0015;
  double edge_threshold = 10.0;
  double base_sigma = 1.6;
};

void validate_scale_space_config(const ScaleSpaceConfig& config);

struct Octave {
  int index = 0;                  // o; pixel spacing is 2^o input pixels
  std::vector<GrayImage> levels;  // levels_per_octave + 3 Gaussians
  std::vector<GrayImage> dogs;    // levels_per_octave + 2 differences
};

struct ScaleSpace {
  ScaleSpaceConfig config;
  int width = 0;  // input resolution
  int height = 0;
  std::vector<Octave> octaves;

  /// Absolute blur of level l in octave o, in input pixels.
  double sigma(int octave, double level) const;
};

/// Gaussian pyramid with sigma(o, l) = base_sigma * 2^(o + l / L). The input
/// is treated as unblurred. Throws ImageTooSmall when an octave would be
/// smaller than 8x8.
ScaleSpace gaussian_scale_space(const GrayImage& image, const ScaleSpaceConfig& config);

struct Keypoint {
  double x = 0.0;  // input-image pixels
  double y = 0.0;
  double sigma = 0.0;
  double response = 0.0;  // |refined DoG value|
  std::optional<double> slope;
  double orientation = 0.0;
  // Location in the scale space it was found in.
  int octave = 0;
  double level = 0.0;  // refined DoG level
};

/// Local extrema of the DoG stack with quadratic refinement and edge
/// rejection. The reported sigma is the geometric mean of the DoG pair's two
/// Gaussians, which is where a Gaussian blob of that sigma peaks.
std::vector<Keypoint> dog_extrema(const ScaleSpace& space);

/// Dominant gradient orientation in the keypoint neighbourhood.
double keypoint_orientation(const ScaleSpace& space, const Keypoint& kp);

using Descriptor = std::array<float, 128>;

/// SIFT descriptor in the rotated frame of kp.orientation. Throws
/// WindowOutOfBounds when the keypoint lies outside the image or within one
/// pixel of its border; window samples that fall outside are skipped.
Descriptor compute_descriptor(const ScaleSpace& space, const Keypoint& kp);
/// Convenience: builds the scale space of `image` first.
Descriptor compute_descriptor(const GrayImage& image, const Keypoint& kp,
                              const ScaleSpaceConfig& config = {});

struct FeatureSource {
  bool field_level = false;
  ViewIndex view;  // per-view sets only
};

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
  FeatureSource source;
};

/// Detection, orientation assignment and description on one image.
FeatureSet detect_features(const GrayImage& image, const ScaleSpaceConfig& config = {},
                           FeatureSource source = {});

/// Shift-and-average of all views: view (u, v) is translated by
/// slope * (v - v0, u - u0) pixels, averaged over the views that cover each pixel.
GrayImage refocus_slice(const VFMVField& field, double slope);
/// Same for several slopes at once (one pass over the views).
std::vector<GrayImage> refocus_slices(const VFMVField& field, const std::vector<double>& slopes);

/// n uniform samples over [-max_slope, max_slope].
std::vector<double> slope_grid(double max_slope, int n = 9);

/// Per-slope DoG detection on refocus slices. A detection survives when its
/// DoG value is an extremum over the 3x3x3 neighbourhood in the neighbouring
/// slopes' stacks as well, and is not outdone by a coincident detection
/// (1.5 px, half a scale level) at a neighbouring slope. Repeated adjacent
/// slopes count once.
FeatureSet detect_field_features(const VFMVField& field, const ScaleSpaceConfig& config,
                                 const std::vector<double>& slopes);

/// Nearest neighbour in descriptor space with the ratio test.
std::vector<std::pair<int, int>> match_features(const FeatureSet& a, const FeatureSet& b,
                                                double ratio = 0.8);

/// Fraction of cells of a cells x cells grid over the image holding at least
/// one keypoint.
double spatial_coverage(const std::vector<Keypoint>& keypoints, int width, int height,
                        int cells = 16);

struct FeatureReportEntry {
  std::string name;
  int count = 0;
  double coverage = 0.0;
  ColorImage overlay;
};

/// Counts, 16x16 coverage and a keypoint overlay on `reference` per set.
std::vector<FeatureReportEntry> feature_report(
    const std::vector<std::pair<std::string, FeatureSet>>& sets, const ColorImage& reference);

/// Draws keypoint circles (radius ~ sigma) onto a copy of the image.
ColorImage draw_keypoints(const ColorImage& image, const std::vector<Keypoint>& keypoints,
                          std::array<float, 3> color);

/// Text table: one header line, then
/// x y sigma response slope orientation d0 .. d127 per keypoint ("nan" slope
/// for per-view features).
void write_feature_set(std::ostream& out, const FeatureSet& set);
FeatureSet read_feature_set(std::istream& in);

}  // namespace vfmv
