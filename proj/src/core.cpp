#include "vfmv/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace vfmv {

namespace {

std::string at(ViewIndex i) {
  return "(" + std::to_string(i.u) + "," + std::to_string(i.v) + ")";
}

}  // namespace

std::string AssignmentPolicy::name() const {
  switch (kind) {
    case Kind::raster_cycle: return "raster_cycle";
    case Kind::center_out: return "center_out";
    case Kind::uniform: return "uniform(" + std::to_string(plane) + ")";
  }
  return "raster_cycle";
}

AssignmentPolicy AssignmentPolicy::parse(const std::string& text) {
  if (text == "raster_cycle") return raster_cycle();
  if (text == "center_out") return center_out();
  if (text.rfind("uniform(", 0) == 0 && text.back() == ')') {
    const std::string inner = text.substr(8, text.size() - 9);
    try {
      std::size_t used = 0;
      const int k = std::stoi(inner, &used);
      if (used == inner.size()) return uniform(k);
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown assignment policy '" + text + "'");
}

const FocalPlane& VFMVField::plane_of(ViewIndex i) const {
  const int idx = view(i).plane;
  for (const auto& p : data_->planes) {
    if (p.index == idx) return p;
  }
  throw Error(ErrorCode::DanglingPlaneRef, "DanglingPlaneRef(" + std::to_string(idx) + ")");
}

std::vector<Violation> validate_field(const FieldParts& parts) {
  std::vector<Violation> out;
  const GridDims& dims = parts.dims;
  if (dims.rows < 1 || dims.cols < 1) {
    out.push_back({ErrorCode::InvalidArgument, "InvalidGridDims(" + std::to_string(dims.rows) +
                                                   "," + std::to_string(dims.cols) + ")"});
    return out;
  }

  std::vector<int> seen(dims.count(), 0);
  for (const auto& v : parts.views) {
    if (!dims.contains(v.view)) {
      out.push_back({ErrorCode::ViewOutOfGrid, "ViewOutOfGrid" + at(v.view)});
      continue;
    }
    if (++seen[dims.flat(v.view)] == 2) {
      out.push_back({ErrorCode::DuplicateView, "DuplicateView" + at(v.view)});
    }
  }
  for (int k = 0; k < dims.count(); ++k) {
    if (seen[k] == 0) out.push_back({ErrorCode::MissingView, "MissingView" + at(dims.unflat(k))});
  }

  if (!parts.views.empty()) {
    const int w = parts.views.front().width();
    const int h = parts.views.front().height();
    for (const auto& v : parts.views) {
      if (v.width() != w || v.height() != h || v.width() == 0 || v.height() == 0) {
        out.push_back({ErrorCode::ResolutionMismatch,
                       "ResolutionMismatch" + at(v.view) + ": " + std::to_string(v.width()) +
                           "x" + std::to_string(v.height()) + " vs " + std::to_string(w) + "x" +
                           std::to_string(h)});
      } else if (v.pixels.channels() != 3) {
        out.push_back({ErrorCode::ResolutionMismatch, "ChannelMismatch" + at(v.view)});
      }
    }
  }

  std::set<int> plane_ids;
  for (const auto& p : parts.planes) {
    if (!plane_ids.insert(p.index).second) {
      out.push_back({ErrorCode::PlaneOrderViolation,
                     "PlaneOrderViolation: duplicate plane index " + std::to_string(p.index)});
    }
    if (!(p.depth > 0.0)) {
      out.push_back({ErrorCode::NonPositiveDepth,
                     "NonPositiveDepth(plane " + std::to_string(p.index) + ")"});
    }
  }
  for (std::size_t i = 1; i < parts.planes.size(); ++i) {
    const auto& a = parts.planes[i - 1];
    const auto& b = parts.planes[i];
    if (!(b.depth > a.depth) || !(b.index > a.index)) {
      out.push_back({ErrorCode::PlaneOrderViolation,
                     "PlaneOrderViolation: plane " + std::to_string(b.index) +
                         " does not lie beyond plane " + std::to_string(a.index)});
    }
  }
  for (const auto& v : parts.views) {
    if (!plane_ids.contains(v.plane)) {
      out.push_back({ErrorCode::DanglingPlaneRef,
                     "DanglingPlaneRef(" + std::to_string(v.plane) + ") at view" + at(v.view)});
    }
  }

  const auto& k = parts.intrinsics;
  if (!parts.views.empty()) {
    const int w = parts.views.front().width();
    const int h = parts.views.front().height();
    if (!(k.fx > 0.0) || !(k.fy > 0.0) || k.cx < 0.0 || k.cx >= w || k.cy < 0.0 || k.cy >= h) {
      out.push_back({ErrorCode::InvalidArgument, "InvalidIntrinsics"});
    }
  }
  const auto& g = parts.geometry;
  if (g.baseline_x < 0.0 || g.baseline_y < 0.0 || !dims.contains(g.reference)) {
    out.push_back({ErrorCode::InvalidArgument, "InvalidGeometry"});
  }
  return out;
}

std::vector<Violation> validate_field(const VFMVField& field) {
  return validate_field(field.parts());
}

VFMVField assemble_field(FieldParts parts) {
  const auto violations = validate_field(parts);
  if (!violations.empty()) {
    throw Error(violations.front().code, violations.front().message);
  }
  std::sort(parts.views.begin(), parts.views.end(),
            [](const ViewImage& a, const ViewImage& b) { return a.view < b.view; });
  VFMVField field;
  field.data_ = std::make_shared<const FieldParts>(std::move(parts));
  return field;
}

std::vector<int> focal_assignment(const AssignmentPolicy& policy, GridDims dims, int num_planes) {
  if (num_planes < 1 || dims.count() < 1) {
    throw Error(ErrorCode::InvalidArgument, "focal_assignment needs n >= 1 and a non-empty grid");
  }
  const int n_views = dims.count();
  std::vector<int> map(n_views, 0);
  switch (policy.kind) {
    case AssignmentPolicy::Kind::uniform:
      if (policy.plane < 0 || policy.plane >= num_planes) {
        throw Error(ErrorCode::InvalidPlane, "InvalidPlane(" + std::to_string(policy.plane) + ")");
      }
      std::fill(map.begin(), map.end(), policy.plane);
      break;
    case AssignmentPolicy::Kind::raster_cycle:
      for (int i = 0; i < n_views; ++i) map[i] = i % num_planes;
      break;
    case AssignmentPolicy::Kind::center_out: {
      const double cu = 0.5 * (dims.rows - 1);
      const double cv = 0.5 * (dims.cols - 1);
      std::vector<int> order(n_views);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const ViewIndex ia = dims.unflat(a);
        const ViewIndex ib = dims.unflat(b);
        const double da = (ia.u - cu) * (ia.u - cu) + (ia.v - cv) * (ia.v - cv);
        const double db = (ib.u - cu) * (ib.u - cu) + (ib.v - cv) * (ib.v - cv);
        return da < db;
      });
      for (int rank = 0; rank < n_views; ++rank) {
        map[order[rank]] = static_cast<int>(static_cast<long long>(rank) * num_planes / n_views);
      }
      break;
    }
  }
  return map;
}

std::vector<FocalPlane> make_planes(int n, double near_depth, double far_depth) {
  if (n < 1 || !(near_depth > 0.0) || (n > 1 && !(far_depth > near_depth))) {
    throw Error(ErrorCode::InvalidArgument, "make_planes needs n >= 1 and 0 < near < far");
  }
  std::vector<FocalPlane> planes(n);
  const double inv_near = 1.0 / near_depth;
  const double inv_far = 1.0 / far_depth;
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    planes[i] = {i, 1.0 / (inv_near + t * (inv_far - inv_near))};
  }
  if (n > 1) planes.back().depth = far_depth;
  planes.front().depth = near_depth;
  return planes;
}

int nearest_plane(const std::vector<FocalPlane>& planes, double depth) {
  int best = planes.front().index;
  double best_d = 1e300;
  for (const auto& p : planes) {
    const double d = std::abs(1.0 / p.depth - 1.0 / depth);
    if (d < best_d) {
      best_d = d;
      best = p.index;
    }
  }
  return best;
}

}  // namespace vfmv
