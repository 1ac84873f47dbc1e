#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vfmv/core.hpp"
#include "vfmv/features.hpp"

namespace vfmv {

/// Pixel correspondence between view A and view B.
struct PointMatch {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

struct EssentialMatrix {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
};

/// X_b = rotation * X_a + translation, with |translation| = 1.
struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::UnitX();
};

/// Points in the frame of camera A, unit-baseline gauge.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::array<float, 3>> colors;  // empty or parallel to points
  std::vector<double> reproj_error;          // pixels, mean over both views
  std::vector<int> source;                   // index of the originating match
};

struct RansacConfig {
  double threshold = 1.0;  // Sampson distance, pixels
  double confidence = 0.999;
  int max_iterations = 2000;
  std::uint64_t seed = 1;
};

void validate_ransac_config(const RansacConfig& config);

Eigen::Matrix3d intrinsic_matrix(const CameraIntrinsics& k);

/// Nearest essential matrix: singular values (1, 1, 0).
Eigen::Matrix3d project_essential(const Eigen::Matrix3d& e);

/// First-order geometric distance (pixels) of a match to the epipolar
/// geometry of the fundamental matrix f.
double sampson_distance(const Eigen::Matrix3d& f, const PointMatch& m);

struct EssentialEstimate {
  EssentialMatrix e;
  std::vector<bool> inliers;
  int inlier_count = 0;
  int iterations = 0;
};

/// Normalized 8-point inside RANSAC on K-normalized coordinates; inliers by
/// Sampson distance in pixels. A final refit on the inliers is kept only
/// if it does not lose support. Throws InsufficientMatches (< 8 matches or
/// < 8 inliers) and DegenerateConfiguration when one homography explains
/// nearly all of the inliers (no usable parallax).
EssentialEstimate estimate_essential(const std::vector<PointMatch>& matches,
                                     const CameraIntrinsics& k, const RansacConfig& config);

/// Four-fold decomposition with a cheirality vote over the matches (the
/// inlier subset when a mask is given). Throws AmbiguousPose on a tie.
RelativePose recover_pose(const EssentialMatrix& e, const std::vector<PointMatch>& matches,
                          const CameraIntrinsics& k, const std::vector<bool>* inliers = nullptr);

/// Linear triangulation from K[I|0] and K[R|t]. Points behind either camera
/// or with reprojection error above max_reproj pixels are dropped.
PointCloud triangulate(const std::vector<PointMatch>& matches, const RelativePose& pose,
                       const CameraIntrinsics& k, double max_reproj,
                       const std::vector<bool>* inliers = nullptr);

struct StageDiagnostic {
  std::string stage;
  int count = 0;
  double metric = 0.0;
};

struct TwoViewResult {
  PointCloud cloud;
  RelativePose pose;
  std::vector<PointMatch> matches;
  std::vector<bool> inliers;
  std::vector<StageDiagnostic> diagnostics;
};

/// detect -> match -> essential -> pose -> triangulate. Errors keep their
/// code and gain the failing stage's name.
TwoViewResult reconstruct_two_view(const ViewImage& a, const ViewImage& b, const CameraIntrinsics& k,
                                   const ScaleSpaceConfig& detector, const RansacConfig& ransac,
                                   double ratio = 0.8);

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * rotation * p + translation; }
};

/// Least-squares similarity mapping src onto dst (paired by index).
Similarity align_similarity(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst);

struct CloudQuality {
  double rms = 0.0;           // after similarity alignment, ground-truth units
  double completeness = 0.0;  // fraction of points within tolerance after alignment
  double mean_reprojection = 0.0;
  Similarity alignment;
};

/// `truth[i]` is the ground-truth position of cloud.points[i]. Throws
/// NoCorrespondences when fewer than three pairs are available.
CloudQuality cloud_quality(const PointCloud& cloud, const std::vector<Eigen::Vector3d>& truth,
                           double tolerance);

struct FocalSweep {
  double focal = 0.0;
  int inliers = 0;
  std::vector<std::pair<double, int>> trials;
};

/// Focal-length sweep maximizing essential-matrix support, principal point
/// at the image center. For data without calibration.
FocalSweep self_calibrate_focal(const std::vector<PointMatch>& matches, int width, int height,
                                const RansacConfig& config, const std::vector<double>& focals);

/// ASCII PLY with x y z and optional colors; the header comment records the
/// pose, the gauge, the seed and any extra text.
void write_ply(std::ostream& out, const PointCloud& cloud, const RelativePose& pose,
               std::uint64_t seed, const std::string& extra_comment = "");

/// CSV: stage,count,metric.
void write_diagnostics_csv(std::ostream& out, const std::vector<StageDiagnostic>& diagnostics);

}  // namespace vfmv
