#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfmv/error.hpp"
#include "vfmv/image.hpp"

namespace vfmv {

/// Camera-grid position: u is the row, v the column (both 0-based).
struct ViewIndex {
  int u = 0;
  int v = 0;
  auto operator<=>(const ViewIndex&) const = default;
};

struct GridDims {
  int rows = 1;  // U
  int cols = 1;  // V
  int count() const { return rows * cols; }
  bool contains(ViewIndex i) const {
    return i.u >= 0 && i.v >= 0 && i.u < rows && i.v < cols;
  }
  int flat(ViewIndex i) const { return i.u * cols + i.v; }
  ViewIndex unflat(int k) const { return {k / cols, k % cols}; }
  ViewIndex center() const { return {rows / 2, cols / 2}; }
  bool operator==(const GridDims&) const = default;
};

struct FocalPlane {
  int index = 0;
  double depth = 1.0;  // scene units
  bool operator==(const FocalPlane&) const = default;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Regular camera array: view (u, v) sits at
/// (baseline_x * (v - ref.v), baseline_y * (u - ref.u), 0) in the reference
/// camera frame.
struct ArrayGeometry {
  double baseline_x = 0.0;
  double baseline_y = 0.0;
  ViewIndex reference{0, 0};
  bool operator==(const ArrayGeometry&) const = default;
};

struct ViewImage {
  ViewIndex view;
  int plane = 0;
  ColorImage pixels;  // RGB, linear light
  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
  bool operator==(const ViewImage&) const = default;
};

/// How views are mapped to focal planes.
struct AssignmentPolicy {
  enum class Kind { raster_cycle, center_out, uniform };
  Kind kind = Kind::raster_cycle;
  int plane = 0;  // only for uniform

  static AssignmentPolicy raster_cycle() { return {Kind::raster_cycle, 0}; }
  static AssignmentPolicy center_out() { return {Kind::center_out, 0}; }
  static AssignmentPolicy uniform(int k) { return {Kind::uniform, k}; }

  /// "raster_cycle", "center_out" or "uniform(k)".
  std::string name() const;
  static AssignmentPolicy parse(const std::string& text);
  bool operator==(const AssignmentPolicy&) const = default;
};

/// Per-field annotations that travel with the manifest.
struct FieldMetadata {
  std::string policy;           // assignment policy name
  bool registered = false;
  std::vector<std::array<double, 9>> view_homographies;  // grid order, row-major H
  double max_disparity = 0.0;   // slope search half-range, px per view step (0 = unknown)
  nlohmann::json provenance = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
  bool operator==(const FieldMetadata&) const = default;
};

/// Loose, possibly invalid collection of views; the input to assembly and
/// the output of disassembly.
struct FieldParts {
  GridDims dims;
  std::vector<ViewImage> views;
  std::vector<FocalPlane> planes;
  CameraIntrinsics intrinsics;
  ArrayGeometry geometry;
  FieldMetadata metadata;
  bool operator==(const FieldParts&) const = default;
};

/// Validated, immutable 5D varifocal field I(u, v, s, t, f). Copies share
/// storage.
class VFMVField {
 public:
  VFMVField() = default;

  const GridDims& dims() const { return data_->dims; }
  int width() const { return data_->views.front().width(); }
  int height() const { return data_->views.front().height(); }
  const std::vector<ViewImage>& views() const { return data_->views; }
  const ViewImage& view(ViewIndex i) const { return data_->views[dims().flat(i)]; }
  const std::vector<FocalPlane>& planes() const { return data_->planes; }
  const FocalPlane& plane_of(ViewIndex i) const;
  const CameraIntrinsics& intrinsics() const { return data_->intrinsics; }
  const ArrayGeometry& geometry() const { return data_->geometry; }
  const FieldMetadata& metadata() const { return data_->metadata; }
  bool valid() const { return data_ != nullptr; }

  /// Views in row-major grid order.
  const FieldParts& parts() const { return *data_; }

  friend VFMVField assemble_field(FieldParts parts);

 private:
  std::shared_ptr<const FieldParts> data_;
};

struct Violation {
  ErrorCode code;
  std::string message;  // e.g. "DuplicateView(0,0)"
  bool operator==(const Violation&) const = default;
};

/// Empty iff every field invariant holds.
std::vector<Violation> validate_field(const FieldParts& parts);
std::vector<Violation> validate_field(const VFMVField& field);

/// Validates and freezes. Views may be supplied in any order; they are
/// stored row-major. Throws Error with the first violation.
VFMVField assemble_field(FieldParts parts);

inline FieldParts disassemble(const VFMVField& field) { return field.parts(); }

/// Total map from grid position (row-major) to plane index.
std::vector<int> focal_assignment(const AssignmentPolicy& policy, GridDims dims,
                                  int num_planes);

/// n planes from near to far, evenly spaced in inverse depth (diopters), so
/// that the blur change between neighbouring planes is uniform.
std::vector<FocalPlane> make_planes(int n, double near_depth, double far_depth);

/// Index of the plane whose depth is closest in inverse depth to `depth`.
int nearest_plane(const std::vector<FocalPlane>& planes, double depth);

}  // namespace vfmv
