#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfmv/core.hpp"
#include "vfmv/features.hpp"
#include "vfmv/reconstruct.hpp"
#include "vfmv/register.hpp"
#include "vfmv/synth.hpp"

namespace vfmv {

/// Every experiment parameter. The defaults reproduce the desk scene at
/// 768x512 with a 9x9 grid and 34 focal planes.
struct PipelineConfig {
  // scene
  std::string scene_file;  // empty: built-in desk scene
  int width = 768;
  int height = 512;
  double near_depth = 1.0;
  double mid_depth = 2.0;
  double far_depth = 4.0;
  bool focus_ruler = true;
  std::uint64_t scene_seed = 7;

  // grid and focal planes
  int rows = 9;
  int cols = 9;
  int num_planes = 34;
  double plane_near = 1.0;
  double plane_far = 4.0;
  std::string policy = "raster_cycle";
  std::string variant = "vfmv";  // vfmv | fixed | pair | pair_fixed
  int fixed_plane = 0;

  // optics and array
  LensConfig lens;
  double kappa = 0.002;
  double noise_sigma = 0.0;
  double baseline = -1.0;         // per view step; < 0: derived from max_disparity
  double max_disparity = 2.0;     // px per view step of the nearest layer
  double pair_baseline = 0.02;
  double pair_focus_a = 0.0;      // <= 0: mid layer depth
  double pair_focus_b = 0.0;      // <= 0: halfway (in diopters) between mid and far

  // registration, detection, reconstruction
  EccConfig ecc;
  bool register_before_detect = true;
  std::string detect_mode = "field";  // field | per_view
  ScaleSpaceConfig detector;
  int num_slopes = 9;
  double max_slope = -1.0;  // < 0: take the dataset's max_disparity
  RansacConfig ransac;
  double match_ratio = 0.8;
  std::array<ViewIndex, 2> pair_views{ViewIndex{0, 0}, ViewIndex{0, 1}};
  bool self_calibrate = false;

  std::uint64_t seed = 1;
  int threads = 1;
};

nlohmann::json config_to_json(const PipelineConfig& config);
/// Overlays `patch` on `base`. Unknown keys and type errors raise
/// InvalidConfig naming the offending path (e.g. "ecc.epsilon").
PipelineConfig config_from_json(const nlohmann::json& patch, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
void validate_config(const PipelineConfig& config);
/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const PipelineConfig& config);

/// 256x256, 5x5 grid: the quick profile.
PipelineConfig ci_profile();

/// Stage seeds fanned out from the root seed.
std::uint64_t stage_seed(std::uint64_t root, std::uint64_t stage);

/// Process exit status for a library error: 2 config, 3 data/IO,
/// 4 convergence, 5 degeneracy.
int exit_code_for(ErrorCode code);

std::vector<FocalPlane> build_planes(const PipelineConfig& config);
CameraIntrinsics build_intrinsics(const PipelineConfig& config);
LayeredScene build_scene(const PipelineConfig& config, const std::vector<FocalPlane>& planes);
LayeredScene load_scene_file(const std::filesystem::path& path);

/// Synthesizes one dataset variant ("vfmv", "fixed", "pair", "pair_fixed").
VFMVField generate_variant(const PipelineConfig& config, const std::string& variant);

struct DetectReport {
  std::string mode;
  std::vector<FeatureSet> sets;       // one for field mode, one per view otherwise
  std::vector<double> slopes;
  std::vector<FeatureReportEntry> entries;
};

/// Field-level (refocus + slope NMS) or per-view detection. Field mode on a
/// 1x1 field degrades to per-view detection.
DetectReport run_detect(const VFMVField& field, const PipelineConfig& config);

struct LayerCounts {
  std::vector<std::string> names;
  std::vector<int> points;
  int covered = 0;  // layers with >= 10 points in their depth band
};

/// Bins reconstructed points by depth (metric scale restored from the true
/// baseline) into the bands of the scene's main layers.
LayerCounts layer_coverage(const PointCloud& cloud, double true_baseline,
                           const std::vector<double>& layer_depths,
                           const std::vector<std::string>& layer_names, int min_points = 10);

struct CompareRow {
  std::string variant;
  int features = -1;
  double coverage = -1.0;
  int points = -1;
  int layers_covered = -1;
  std::vector<int> layer_points;
  double mean_reprojection = -1.0;
  double rotation_error_deg = -1.0;
  double translation_error_deg = -1.0;
  std::string status = "ok";
};

struct CompareReport {
  std::vector<std::string> layer_names;
  std::vector<CompareRow> rows;  // vfmv, fixed, pair, pair_fixed
  ColorImage feature_overlay;    // side by side
  ColorImage cloud_overlay;
};

/// Runs detection on the VFMV and fixed-focus fields and two-view
/// reconstruction on the VFMV and fixed-focus pairs of the same scene.
CompareReport run_compare(const PipelineConfig& config);

void write_compare_csv(std::ostream& out, const CompareReport& report, const std::string& header);

/// "# config_hash=... seed=..." provenance line for text outputs.
std::string provenance_line(const PipelineConfig& config);

ColorImage side_by_side(const std::vector<ColorImage>& images);

}  // namespace vfmv
