#include "vfmv/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <Eigen/Geometry>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace vfmv {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Hartley conditioning: centroid to the origin, mean distance sqrt(2).
Matrix3d conditioning(const std::vector<Vector2d>& pts) {
  Vector2d c = Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 0.0 ? std::sqrt(2.0) / d : 1.0;
  Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

Vector2d apply(const Matrix3d& t, const Vector2d& p) {
  const Vector3d q = t * p.homogeneous();
  return q.hnormalized();
}

// Linear eight-point fit (any n >= 8) on normalized camera coordinates.
Matrix3d eight_point(const std::vector<Vector2d>& a, const std::vector<Vector2d>& b) {
  const Matrix3d ta = conditioning(a);
  const Matrix3d tb = conditioning(b);
  Eigen::MatrixXd m(a.size(), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vector2d p = apply(ta, a[i]);
    const Vector2d q = apply(tb, b[i]);
    m.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(), p.x(),
        p.y(), 1.0;
  }
  Eigen::Matrix<double, 9, 1> e;
  if (m.rows() < 9) {
    // Pad to a square system so that the full right singular basis exists.
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(9, 9);
    sq.topRows(m.rows()) = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sq, Eigen::ComputeFullV);
    e = svd.matrixV().col(8);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    e = svd.matrixV().col(8);
  }
  Matrix3d en;
  en << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  return tb.transpose() * en * ta;
}

Matrix3d four_point_homography(const std::vector<Vector2d>& a, const std::vector<Vector2d>& b) {
  const Matrix3d ta = conditioning(a);
  const Matrix3d tb = conditioning(b);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(std::max<std::size_t>(2 * a.size(), 9), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vector2d p = apply(ta, a[i]);
    const Vector2d q = apply(tb, b[i]);
    m.row(2 * i) << -p.x(), -p.y(), -1, 0, 0, 0, q.x() * p.x(), q.x() * p.y(), q.x();
    m.row(2 * i + 1) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto h = svd.matrixV().col(8);
  Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return tb.inverse() * hn * ta;
}

// k distinct indices out of n.
std::vector<int> sample_indices(std::mt19937_64& rng, int n, int k) {
  std::vector<int> idx;
  idx.reserve(k);
  while (static_cast<int>(idx.size()) < k) {
    const int i = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  return idx;
}

int needed_iterations(double inlier_ratio, int sample_size, double confidence, int cap) {
  const double p = std::pow(inlier_ratio, sample_size);
  if (p >= 1.0 - 1e-12) return 1;
  if (p <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p);
  if (!std::isfinite(n) || n > cap) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

Matrix3d fundamental(const Matrix3d& e, const Matrix3d& k_inv) {
  return k_inv.transpose() * e * k_inv;
}

// Homographic support among the given matches; the witness for missing
// parallax.
int homography_support(const std::vector<PointMatch>& matches, double thr, std::uint64_t seed) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) return n;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  int best = 0;
  int needed = 1000;
  for (int it = 0; it < needed && it < 1000; ++it) {
    const auto idx = sample_indices(rng, n, 4);
    std::vector<Vector2d> a, b;
    for (int i : idx) {
      a.push_back(matches[i].a);
      b.push_back(matches[i].b);
    }
    const Matrix3d h = four_point_homography(a, b);
    if (!h.allFinite()) continue;
    int support = 0;
    for (const auto& m : matches) {
      const Vector3d q = h * m.a.homogeneous();
      if (std::abs(q.z()) < 1e-12) continue;
      if ((q.hnormalized() - m.b).norm() <= thr) ++support;
    }
    if (support > best) {
      best = support;
      needed = needed_iterations(static_cast<double>(best) / n, 4, 0.999, 1000);
    }
  }
  return best;
}

struct Candidate {
  Matrix3d r;
  Vector3d t;
};

std::array<Candidate, 4> pose_candidates(const Matrix3d& e) {
  Eigen::JacobiSVD<Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU();
  Matrix3d v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Matrix3d r1 = u * w * v.transpose();
  const Matrix3d r2 = u * w.transpose() * v.transpose();
  const Vector3d t = u.col(2).normalized();
  return {{{r1, t}, {r1, -t}, {r2, t}, {r2, -t}}};
}

// DLT in normalized coordinates; false when the rays are parallel.
bool triangulate_point(const Vector2d& a, const Vector2d& b, const Matrix3d& r, const Vector3d& t,
                       Vector3d& x) {
  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>().setIdentity();
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = r;
  p2.col(3) = t;
  Eigen::Matrix4d m;
  m.row(0) = a.x() * p1.row(2) - p1.row(0);
  m.row(1) = a.y() * p1.row(2) - p1.row(1);
  m.row(2) = b.x() * p2.row(2) - p2.row(0);
  m.row(3) = b.y() * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (!(std::abs(h(3)) > 1e-12 * h.head<3>().norm())) return false;
  x = h.head<3>() / h(3);
  return x.allFinite();
}

Vector2d normalized(const Matrix3d& k_inv, const Vector2d& p) {
  return (k_inv * p.homogeneous()).hnormalized();
}

// Sampson residuals of the support set as a function of a rotation
// increment and a step in the tangent plane of the unit translation.
struct SampsonFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const std::vector<PointMatch>* matches;
  Matrix3d k_inv, r0;
  Vector3d t0, b1, b2;

  int inputs() const { return 5; }
  int values() const { return static_cast<int>(matches->size()); }

  Matrix3d essential(const Eigen::VectorXd& p) const {
    const Vector3d w = p.head<3>();
    const Matrix3d dr = w.norm() > 0.0 ? Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix()
                                       : Matrix3d::Identity();
    const Vector3d t = (t0 + p(3) * b1 + p(4) * b2).normalized();
    Matrix3d tx;
    tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    return tx * dr * r0;
  }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& out) const {
    const Matrix3d f = k_inv.transpose() * essential(p) * k_inv;
    for (int i = 0; i < values(); ++i) {
      const Vector3d x1 = (*matches)[i].a.homogeneous();
      const Vector3d x2 = (*matches)[i].b.homogeneous();
      const Vector3d fx1 = f * x1;
      const Vector3d ftx2 = f.transpose() * x2;
      const double den = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
      out(i) = den > 0.0 ? x2.dot(fx1) / std::sqrt(den) : 0.0;
    }
    return 0;
  }
};

// Least Sampson error essential matrix near e over the support matches.
Matrix3d refine_essential(const Matrix3d& e, const std::vector<PointMatch>& support, const Matrix3d& k_inv) {
  if (support.size() < 8) return e;
  Eigen::JacobiSVD<Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  Eigen::NumericalDiff<SampsonFunctor> fn;
  fn.matches = &support;
  fn.k_inv = k_inv;
  fn.r0 = u * w * v.transpose();
  fn.t0 = u.col(2);
  fn.b1 = u.col(0);
  fn.b2 = u.col(1);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<SampsonFunctor>> lm(fn);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
  lm.parameters.maxfev = 200;
  lm.minimize(p);
  const Matrix3d refined = project_essential(fn.essential(p));
  return refined.allFinite() ? refined : e;
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(name) + ": " + e.what());
  }
}

}  // namespace

void validate_ransac_config(const RansacConfig& c) {
  if (!(c.threshold > 0.0) || !(c.confidence > 0.0 && c.confidence < 1.0) || c.max_iterations < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "RansacConfig needs threshold > 0, 0 < confidence < 1, max_iterations >= 1");
  }
}

Matrix3d intrinsic_matrix(const CameraIntrinsics& k) {
  Matrix3d m;
  m << k.fx, k.skew, k.cx, 0, k.fy, k.cy, 0, 0, 1;
  return m;
}

Matrix3d project_essential(const Matrix3d& e) {
  Eigen::JacobiSVD<Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Vector3d(1.0, 1.0, 0.0).asDiagonal() * svd.matrixV().transpose();
}

double sampson_distance(const Matrix3d& f, const PointMatch& m) {
  const Vector3d x1 = m.a.homogeneous();
  const Vector3d x2 = m.b.homogeneous();
  const Vector3d fx1 = f * x1;
  const Vector3d ftx2 = f.transpose() * x2;
  const double num = x2.dot(fx1);
  const double den = fx1.x() * fx1.x() + fx1.y() * fx1.y() + ftx2.x() * ftx2.x() + ftx2.y() * ftx2.y();
  if (!(den > 0.0)) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(num) / std::sqrt(den);
}

EssentialEstimate estimate_essential(const std::vector<PointMatch>& matches, const CameraIntrinsics& k,
                                     const RansacConfig& config) {
  validate_ransac_config(config);
  const int n = static_cast<int>(matches.size());
  if (n < 8) {
    throw Error(ErrorCode::InsufficientMatches, "InsufficientMatches(" + std::to_string(n) + " < 8)");
  }
  const Matrix3d k_inv = intrinsic_matrix(k).inverse();
  std::vector<Vector2d> na(n), nb(n);
  for (int i = 0; i < n; ++i) {
    na[i] = normalized(k_inv, matches[i].a);
    nb[i] = normalized(k_inv, matches[i].b);
  }

  // Support first; the summed squared inlier distance breaks ties. (A
  // truncated-quadratic cost favours single-plane models on layered scenes.)
  auto score = [&](const Matrix3d& e, std::vector<bool>* mask, int& support) {
    const Matrix3d f = fundamental(e, k_inv);
    double cost = 0.0;
    support = 0;
    if (mask) mask->assign(n, false);
    for (int i = 0; i < n; ++i) {
      const double d = sampson_distance(f, matches[i]);
      if (d <= config.threshold) {
        ++support;
        if (mask) (*mask)[i] = true;
        cost += d * d;
      }
    }
    return cost;
  };
  auto better = [](int s1, double c1, int s2, double c2) { return s1 > s2 || (s1 == s2 && c1 < c2); };
  // Least-squares refits on the support set, kept while they improve.
  auto polish = [&](Matrix3d& e, std::vector<bool>& mask, int& support, double& cost) {
    for (int round = 0; round < 4 && support >= 8; ++round) {
      std::vector<Vector2d> ia, ib;
      for (int i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        ia.push_back(na[i]);
        ib.push_back(nb[i]);
      }
      const Matrix3d refit = project_essential(eight_point(ia, ib));
      if (!refit.allFinite()) break;
      std::vector<bool> m2;
      int s2 = 0;
      const double c2 = score(refit, &m2, s2);
      if (!better(s2, c2, support, cost)) break;
      e = refit;
      mask = std::move(m2);
      support = s2;
      cost = c2;
    }
  };

  std::mt19937_64 rng(config.seed);
  EssentialEstimate best;
  best.inlier_count = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  int needed = config.max_iterations;
  // The adaptive bound assumes every all-inlier sample is non-degenerate;
  // samples from one dominant plane break that, so half of the budget is
  // always spent.
  const int floor_iterations = std::max(1, config.max_iterations / 2);
  int it = 0;
  std::vector<Vector2d> sa(8), sb(8);
  std::vector<bool> mask;
  for (; it < needed; ++it) {
    const auto idx = sample_indices(rng, n, 8);
    for (int j = 0; j < 8; ++j) {
      sa[j] = na[idx[j]];
      sb[j] = nb[idx[j]];
    }
    Matrix3d e = project_essential(eight_point(sa, sb));
    if (!e.allFinite()) continue;
    int support = 0;
    double cost = score(e, &mask, support);
    if (!better(support, cost, best.inlier_count, best_cost)) continue;
    polish(e, mask, support, cost);
    best_cost = cost;
    best.inlier_count = support;
    best.e.e = e;
    best.inliers = mask;
    needed = std::max(needed_iterations(static_cast<double>(support) / n, 8, config.confidence,
                                        config.max_iterations),
                      floor_iterations);
  }
  best.iterations = it;
  // Near the solution the truncated quadratic is the better judge: it keeps
  // a refit that trades a marginal match for a much tighter fit.
  const double th2 = config.threshold * config.threshold;
  auto truncated = [&](int support, double cost) { return cost + (n - support) * th2; };
  for (int round = 0; round < 5 && best.inlier_count >= 8; ++round) {
    std::vector<PointMatch> support;
    for (int i = 0; i < n; ++i) {
      if (best.inliers[i]) support.push_back(matches[i]);
    }
    const Matrix3d e = refine_essential(best.e.e, support, k_inv);
    int s2 = 0;
    const double c2 = score(e, &mask, s2);
    if (!(truncated(s2, c2) < truncated(best.inlier_count, best_cost))) break;
    best.e.e = e;
    best.inliers = mask;
    best.inlier_count = s2;
    best_cost = c2;
  }
  if (best.inliers.empty()) {
    best.inliers.assign(n, false);
    best.inlier_count = 0;
  }

  if (best.inlier_count < 8) {
    throw Error(ErrorCode::InsufficientMatches,
                "InsufficientMatches(" + std::to_string(best.inlier_count) + " inliers)");
  }
  std::vector<PointMatch> support;
  for (int i = 0; i < n; ++i) {
    if (best.inliers[i]) support.push_back(matches[i]);
  }
  const int h_support = homography_support(support, 2.0 * config.threshold, config.seed);
  if (h_support >= 0.9 * best.inlier_count) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "DegenerateConfiguration(one homography explains " + std::to_string(h_support) + " of " +
                    std::to_string(best.inlier_count) + " inliers)");
  }
  return best;
}

RelativePose recover_pose(const EssentialMatrix& e, const std::vector<PointMatch>& matches,
                          const CameraIntrinsics& k, const std::vector<bool>* inliers) {
  const Matrix3d k_inv = intrinsic_matrix(k).inverse();
  const auto cands = pose_candidates(e.e);
  std::array<int, 4> votes{};
  int used = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (inliers && !(*inliers)[i]) continue;
    ++used;
    const Vector2d a = normalized(k_inv, matches[i].a);
    const Vector2d b = normalized(k_inv, matches[i].b);
    for (int c = 0; c < 4; ++c) {
      Vector3d x;
      if (!triangulate_point(a, b, cands[c].r, cands[c].t, x)) continue;
      const double z2 = (cands[c].r * x + cands[c].t).z();
      if (x.z() > 0.0 && z2 > 0.0) ++votes[c];
    }
  }
  if (used == 0) throw Error(ErrorCode::InsufficientMatches, "recover_pose: no matches");
  const int best = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  for (int c = 0; c < 4; ++c) {
    if (c != best && votes[c] == votes[best]) {
      throw Error(ErrorCode::AmbiguousPose, "AmbiguousPose(votes " + std::to_string(votes[0]) + "," +
                                                std::to_string(votes[1]) + "," + std::to_string(votes[2]) +
                                                "," + std::to_string(votes[3]) + ")");
    }
  }
  RelativePose pose;
  pose.rotation = cands[best].r;
  pose.translation = cands[best].t;
  return pose;
}

PointCloud triangulate(const std::vector<PointMatch>& matches, const RelativePose& pose,
                       const CameraIntrinsics& k, double max_reproj, const std::vector<bool>* inliers) {
  const Matrix3d km = intrinsic_matrix(k);
  const Matrix3d k_inv = km.inverse();
  PointCloud cloud;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (inliers && !(*inliers)[i]) continue;
    const auto& m = matches[i];
    Vector3d x;
    if (!triangulate_point(normalized(k_inv, m.a), normalized(k_inv, m.b), pose.rotation, pose.translation, x)) {
      continue;
    }
    const Vector3d xb = pose.rotation * x + pose.translation;
    if (!(x.z() > 0.0) || !(xb.z() > 0.0)) continue;
    const Vector2d pa = (km * x).hnormalized();
    const Vector2d pb = (km * xb).hnormalized();
    const double ea = (pa - m.a).norm();
    const double eb = (pb - m.b).norm();
    if (std::max(ea, eb) > max_reproj) continue;
    cloud.points.push_back(x);
    cloud.reproj_error.push_back(0.5 * (ea + eb));
    cloud.source.push_back(static_cast<int>(i));
  }
  return cloud;
}

TwoViewResult reconstruct_two_view(const ViewImage& a, const ViewImage& b, const CameraIntrinsics& k,
                                   const ScaleSpaceConfig& detector, const RansacConfig& ransac,
                                   double ratio) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ResolutionMismatch, "reconstruct_two_view: views differ in size");
  }
  TwoViewResult res;
  const FeatureSet fa = run_stage("detect", [&] { return detect_features(to_gray(a.pixels), detector, {false, a.view}); });
  const FeatureSet fb = run_stage("detect", [&] { return detect_features(to_gray(b.pixels), detector, {false, b.view}); });
  res.diagnostics.push_back({"detect_a", static_cast<int>(fa.keypoints.size()), 0.0});
  res.diagnostics.push_back({"detect_b", static_cast<int>(fb.keypoints.size()), 0.0});

  const auto pairs = match_features(fa, fb, ratio);
  for (const auto& [i, j] : pairs) {
    res.matches.push_back({{fa.keypoints[i].x, fa.keypoints[i].y}, {fb.keypoints[j].x, fb.keypoints[j].y}});
  }
  const std::size_t denom = std::max<std::size_t>(1, std::min(fa.keypoints.size(), fb.keypoints.size()));
  res.diagnostics.push_back({"match", static_cast<int>(res.matches.size()),
                             static_cast<double>(res.matches.size()) / denom});

  const auto est = run_stage("essential", [&] { return estimate_essential(res.matches, k, ransac); });
  res.inliers = est.inliers;
  res.diagnostics.push_back({"essential", est.inlier_count,
                             static_cast<double>(est.inlier_count) / res.matches.size()});

  res.pose = run_stage("pose", [&] { return recover_pose(est.e, res.matches, k, &res.inliers); });
  const auto in_front = triangulate(res.matches, res.pose, k, std::numeric_limits<double>::infinity(), &res.inliers);
  res.diagnostics.push_back({"pose", static_cast<int>(in_front.points.size()),
                             static_cast<double>(in_front.points.size()) / est.inlier_count});

  res.cloud = triangulate(res.matches, res.pose, k, 3.0 * ransac.threshold, &res.inliers);
  for (int src : res.cloud.source) {
    std::array<float, 3> c{0.0f, 0.0f, 0.0f};
    const auto& p = res.matches[src].a;
    for (int ch = 0; ch < 3; ++ch) {
      double v = 0.0;
      if (sample_bilinear(a.pixels, p.x(), p.y(), ch, v)) c[ch] = static_cast<float>(v);
    }
    res.cloud.colors.push_back(c);
  }
  double mean = 0.0;
  for (double e : res.cloud.reproj_error) mean += e;
  if (!res.cloud.points.empty()) mean /= res.cloud.points.size();
  res.diagnostics.push_back({"triangulate", static_cast<int>(res.cloud.points.size()), mean});
  return res;
}

Similarity align_similarity(const std::vector<Vector3d>& src, const std::vector<Vector3d>& dst) {
  if (src.size() != dst.size() || src.size() < 3) {
    throw Error(ErrorCode::NoCorrespondences, "NoCorrespondences(" + std::to_string(src.size()) + ")");
  }
  Eigen::Matrix3Xd s(3, src.size()), d(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    s.col(i) = src[i];
    d.col(i) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, true);
  Similarity sim;
  const Matrix3d sr = t.topLeftCorner<3, 3>();
  sim.scale = std::cbrt(sr.determinant());
  sim.rotation = sr / sim.scale;
  sim.translation = t.topRightCorner<3, 1>();
  return sim;
}

CloudQuality cloud_quality(const PointCloud& cloud, const std::vector<Vector3d>& truth, double tolerance) {
  if (cloud.points.size() != truth.size() || cloud.points.size() < 3) {
    throw Error(ErrorCode::NoCorrespondences, "NoCorrespondences(cloud " + std::to_string(cloud.points.size()) +
                                                  ", truth " + std::to_string(truth.size()) + ")");
  }
  CloudQuality q;
  q.alignment = align_similarity(cloud.points, truth);
  double sq = 0.0;
  int within = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = (q.alignment.apply(cloud.points[i]) - truth[i]).norm();
    sq += e * e;
    if (e <= tolerance) ++within;
  }
  q.rms = std::sqrt(sq / truth.size());
  q.completeness = static_cast<double>(within) / truth.size();
  if (!cloud.reproj_error.empty()) {
    q.mean_reprojection = std::accumulate(cloud.reproj_error.begin(), cloud.reproj_error.end(), 0.0) /
                          cloud.reproj_error.size();
  }
  return q;
}

FocalSweep self_calibrate_focal(const std::vector<PointMatch>& matches, int width, int height,
                                const RansacConfig& config, const std::vector<double>& focals) {
  FocalSweep sweep;
  for (double f : focals) {
    CameraIntrinsics k{f, f, 0.5 * (width - 1), 0.5 * (height - 1), 0.0};
    int support = 0;
    try {
      support = estimate_essential(matches, k, config).inlier_count;
    } catch (const Error&) {
      support = 0;
    }
    sweep.trials.emplace_back(f, support);
    if (support > sweep.inliers) {
      sweep.inliers = support;
      sweep.focal = f;
    }
  }
  return sweep;
}

void write_ply(std::ostream& out, const PointCloud& cloud, const RelativePose& pose, std::uint64_t seed,
               const std::string& extra_comment) {
  char buf[96];
  const bool colored = cloud.colors.size() == cloud.points.size() && !cloud.points.empty();
  out << "ply\nformat ascii 1.0\ncomment pose R";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", pose.rotation(r, c));
      out << buf;
    }
  }
  out << " t";
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof buf, " %.17g", pose.translation(i));
    out << buf;
  }
  out << " gauge unit_baseline seed " << seed;
  if (!extra_comment.empty()) out << ' ' << extra_comment;
  out << "\nelement vertex " << cloud.points.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (colored) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x(), p.y(), p.z());
    out << buf;
    if (colored) {
      for (float c : cloud.colors[i]) {
        // sRGB-encoded for viewers
        const double v = std::clamp(static_cast<double>(c), 0.0, 1.0);
        const double s = v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
        out << ' ' << static_cast<int>(std::lround(s * 255.0));
      }
    }
    out << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const std::vector<StageDiagnostic>& diagnostics) {
  out << "stage,count,metric\n";
  char buf[64];
  for (const auto& d : diagnostics) {
    std::snprintf(buf, sizeof buf, "%.17g", d.metric);
    out << d.stage << ',' << d.count << ',' << buf << '\n';
  }
}

}  // namespace vfmv
