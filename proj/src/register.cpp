#include "vfmv/register.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "vfmv/filters.hpp"
#include "vfmv/parallel.hpp"

namespace vfmv {

Homography::Homography(const Eigen::Matrix3d& m) : m_(m) {
  if (m_(2, 2) != 0.0) m_ /= m_(2, 2);
  const double det = m_.determinant();
  if (!std::isfinite(det) || std::abs(det) <= 1e-12) {
    throw Error(ErrorCode::SingularHomography, "SingularHomography(det=" + std::to_string(det) + ")");
  }
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scale_about(double s, double cx, double cy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = s;
  m(1, 1) = s;
  m(0, 2) = cx * (1.0 - s);
  m(1, 2) = cy * (1.0 - s);
  return Homography(m);
}

Homography Homography::from_params(const std::array<double, 8>& p) {
  Eigen::Matrix3d m;
  m << p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0;
  return Homography(m);
}

std::array<double, 8> Homography::params() const {
  return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1)};
}

std::array<double, 9> Homography::row_major() const {
  return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2)};
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& p) const {
  const Eigen::Vector3d q = m_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

Homography Homography::inverse() const { return Homography(Eigen::Matrix3d(m_.inverse())); }

Homography Homography::operator*(const Homography& rhs) const {
  return Homography(Eigen::Matrix3d(m_ * rhs.m_));
}

Homography Homography::rescaled(double f) const {
  const Eigen::Matrix3d s = Eigen::Vector3d(f, f, 1.0).asDiagonal();
  const Eigen::Matrix3d s_inv = Eigen::Vector3d(1.0 / f, 1.0 / f, 1.0).asDiagonal();
  return Homography(Eigen::Matrix3d(s * m_ * s_inv));
}

HomographyBlocks decompose_homography(const Eigen::Matrix3d& m) {
  HomographyBlocks b;
  b.A = m.block<2, 2>(0, 0);
  b.T = m.block<2, 1>(0, 2);
  b.V = m.block<1, 2>(2, 0);
  b.h = m(2, 2);
  return b;
}

Eigen::Matrix3d compose_homography(const HomographyBlocks& b) {
  Eigen::Matrix3d m;
  m.block<2, 2>(0, 0) = b.A;
  m.block<2, 1>(0, 2) = b.T;
  m.block<1, 2>(2, 0) = b.V;
  m(2, 2) = b.h;
  return m;
}

double homography_scale(const Homography& h) {
  const auto b = decompose_homography(h);
  return std::sqrt(std::abs(b.A.determinant())) / b.h;
}

double homography_scale_at(const Homography& h, const Eigen::Vector2d& p) {
  const auto& m = h.matrix();
  const double w = m(2, 0) * p.x() + m(2, 1) * p.y() + m(2, 2);
  const Eigen::Vector2d q = h.apply(p);
  Eigen::Matrix2d j;
  for (int r = 0; r < 2; ++r) {
    j(r, 0) = (m(r, 0) - q[r] * m(2, 0)) / w;
    j(r, 1) = (m(r, 1) - q[r] * m(2, 1)) / w;
  }
  return std::sqrt(std::abs(j.determinant()));
}

double distance_to_identity(const Homography& h) {
  return (h.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

void validate_ecc_config(const EccConfig& config) {
  if (config.max_iterations < 1 || !(config.epsilon > 0.0) || config.pyramid_levels < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "EccConfig needs max_iterations >= 1, epsilon > 0, pyramid_levels >= 1");
  }
}

double ecc_score(const GrayImage& templ, const GrayImage& candidate, const Mask* mask) {
  if (!same_size(templ, candidate) || (mask && !same_size(templ, *mask))) {
    throw Error(ErrorCode::InvalidArgument, "ecc_score needs equally sized inputs");
  }
  auto t = templ.values();
  auto c = candidate.values();
  double st = 0.0, sc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (mask && !mask->values()[i]) continue;
    st += t[i];
    sc += c[i];
    ++n;
  }
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "DegenerateInput(fewer than 2 valid pixels)");
  const double mt = st / static_cast<double>(n);
  const double mc = sc / static_cast<double>(n);
  double tt = 0.0, cc = 0.0, tc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (mask && !mask->values()[i]) continue;
    const double a = t[i] - mt;
    const double b = c[i] - mc;
    tt += a * a;
    cc += b * b;
    tc += a * b;
  }
  // rounding in the mean leaves a residue of order n * (eps * value)^2
  const double floor = 1e-20 * static_cast<double>(n);
  if (!(tt > floor) || !(cc > floor)) {
    throw Error(ErrorCode::DegenerateInput, "DegenerateInput(constant image under mask)");
  }
  return std::clamp(tc / std::sqrt(tt * cc), -1.0, 1.0);
}

namespace {

template <typename T>
WarpResult<T> warp_impl(const Image<T>& image, const Homography& h) {
  const Eigen::Matrix3d inv = h.inverse().matrix();
  WarpResult<T> out{Image<T>(image.width(), image.height(), image.channels()),
                    Mask(image.width(), image.height(), 1, 0)};
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
      const double sx = (inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) / w;
      const double sy = (inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) / w;
      bool ok = true;
      for (int c = 0; c < image.channels() && ok; ++c) {
        double v = 0.0;
        ok = sample_bilinear(image, sx, sy, c, v);
        out.image.at(x, y, c) = ok ? static_cast<T>(v) : T{};
      }
      out.mask.at(x, y) = ok ? 1 : 0;
    }
  }
  return out;
}

// Which of the 8 homography parameters each warp model estimates.
std::vector<int> active_params(WarpModel model) {
  switch (model) {
    case WarpModel::translation: return {2, 5};
    case WarpModel::affine: return {0, 1, 2, 3, 4, 5};
    case WarpModel::homography: return {0, 1, 2, 3, 4, 5, 6, 7};
  }
  return {};
}

struct Level {
  GrayImage templ;
  GrayImage moving;
  GrayImage gx;
  GrayImage gy;
};

struct Evaluation {
  bool ok = false;
  double ecc = -1.0;
  std::size_t valid = 0;
  Eigen::VectorXd step;  // ECC update (only when requested)
};

class EccSolver {
 public:
  EccSolver(const Level& level, const std::vector<int>& active) : level_(level), active_(active) {}

  // Computes the correlation at H and, when `with_step`, the closed-form ECC
  // parameter update.
  Evaluation evaluate(const Homography& h, bool with_step) const {
    const int w = level_.templ.width();
    const int ht = level_.templ.height();
    const int mw = level_.moving.width();
    const int mh = level_.moving.height();
    const auto& m = h.matrix();
    const int k = static_cast<int>(active_.size());

    std::vector<double> tv, iv;
    std::vector<double> jac;
    tv.reserve(static_cast<std::size_t>(w) * ht);
    iv.reserve(static_cast<std::size_t>(w) * ht);
    if (with_step) jac.reserve(static_cast<std::size_t>(w) * ht * k);

    double full[8];
    for (int y = 0; y < ht; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = m(2, 0) * x + m(2, 1) * y + 1.0;
        if (!(d > 1e-12)) continue;
        const double xp = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / d;
        const double yp = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / d;
        if (!(xp >= 0.0 && yp >= 0.0 && xp <= mw - 1 && yp <= mh - 1)) continue;
        double iw = 0.0;
        sample_bilinear(level_.moving, xp, yp, 0, iw);
        tv.push_back(level_.templ.at(x, y));
        iv.push_back(iw);
        if (with_step) {
          double gx = 0.0, gy = 0.0;
          sample_bilinear(level_.gx, xp, yp, 0, gx);
          sample_bilinear(level_.gy, xp, yp, 0, gy);
          const double inv_d = 1.0 / d;
          full[0] = gx * x * inv_d;
          full[1] = gx * y * inv_d;
          full[2] = gx * inv_d;
          full[3] = gy * x * inv_d;
          full[4] = gy * y * inv_d;
          full[5] = gy * inv_d;
          full[6] = -(gx * xp + gy * yp) * x * inv_d;
          full[7] = -(gx * xp + gy * yp) * y * inv_d;
          for (int a = 0; a < k; ++a) jac.push_back(full[active_[a]]);
        }
      }
    }

    Evaluation e;
    e.valid = tv.size();
    const std::size_t n = tv.size();
    if (n < 16 || n < static_cast<std::size_t>(w) * ht / 10) return e;
    double st = 0.0, si = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      st += tv[i];
      si += iv[i];
    }
    const double mt = st / n;
    const double mi = si / n;
    double tt = 0.0, ii = 0.0, ti = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tv[i] -= mt;
      iv[i] -= mi;
      tt += tv[i] * tv[i];
      ii += iv[i] * iv[i];
      ti += tv[i] * iv[i];
    }
    if (!(tt > 0.0) || !(ii > 0.0)) return e;
    e.ok = true;
    e.ecc = std::clamp(ti / std::sqrt(tt * ii), -1.0, 1.0);
    if (!with_step) return e;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd gt = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd gi = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Map<const Eigen::VectorXd> j(&jac[i * k], k);
      hess.selfadjointView<Eigen::Lower>().rankUpdate(j);
      mean += j;
      gt += j * tv[i];
      gi += j * iv[i];
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    mean /= static_cast<double>(n);
    hess -= static_cast<double>(n) * mean * mean.transpose();

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) return e;
    const Eigen::VectorXd hgi = ldlt.solve(gi);
    const double num = ii - gi.dot(hgi);
    const double den = ti - gt.dot(hgi);
    if (!(den > 0.0)) {
      throw Error(ErrorCode::Diverged, "Diverged(correlation would be minimized)");
    }
    const double lambda = num / den;
    e.step = ldlt.solve(lambda * gt - gi);
    if (!e.step.allFinite()) throw Error(ErrorCode::Diverged, "Diverged(non-finite update)");
    return e;
  }

 private:
  const Level& level_;
  const std::vector<int>& active_;
};

std::vector<Level> build_pyramid(const GrayImage& templ, const GrayImage& moving, int levels) {
  std::vector<Level> pyr;
  GrayImage t = gaussian_blur(templ, 1.0);
  GrayImage m = gaussian_blur(moving, 1.0);
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      if (std::min(t.width(), t.height()) < 32) break;
      t = gaussian_blur(decimate2(t), 1.0);
      m = gaussian_blur(decimate2(m), 1.0);
    }
    Level level{t, m, {}, {}};
    central_gradient(level.moving, level.gx, level.gy);
    pyr.push_back(std::move(level));
  }
  return pyr;
}

}  // namespace

WarpResult<double> warp_image(const GrayImage& image, const Homography& h) {
  return warp_impl(image, h);
}

WarpResult<float> warp_image(const ColorImage& image, const Homography& h) {
  return warp_impl(image, h);
}

RegistrationResult ecc_align(const GrayImage& templ, const GrayImage& moving,
                             const EccConfig& config, const Homography& initial) {
  validate_ecc_config(config);
  if (!same_size(templ, moving) || templ.empty()) {
    throw Error(ErrorCode::InvalidArgument, "ecc_align needs equally sized non-empty images");
  }
  const auto pyramid = build_pyramid(templ, moving, config.pyramid_levels);
  const auto active = active_params(config.warp_model);
  const int top = static_cast<int>(pyramid.size()) - 1;

  RegistrationResult result;
  Homography h = initial.rescaled(std::ldexp(1.0, -top));
  for (int level = top; level >= 0; --level) {
    if (level != top) h = h.rescaled(2.0);
    const EccSolver solver(pyramid[level], active);
    Evaluation cur = solver.evaluate(h, true);
    if (!cur.ok) throw Error(ErrorCode::Diverged, "Diverged(no overlap at level " + std::to_string(level) + ")");
    int accepted = 0;
    result.per_level_trace.push_back({level, accepted, cur.ecc});
    bool level_converged = false;
    double last_norm = 0.0;
    for (int it = 0; it < config.max_iterations; ++it) {
      const double norm = cur.step.norm();
      if (norm < config.epsilon) {
        last_norm = norm;
        level_converged = true;
        break;
      }
      if (norm > 1e8) throw Error(ErrorCode::Diverged, "Diverged(update norm " + std::to_string(norm) + ")");
      double alpha = 1.0;
      bool stepped = false;
      Homography candidate;
      Evaluation next;
      const auto base = h.params();
      for (int halving = 0; halving <= 8; ++halving, alpha *= 0.5) {
        auto p = base;
        for (std::size_t a = 0; a < active.size(); ++a) p[active[a]] += alpha * cur.step[a];
        try {
          candidate = Homography::from_params(p);
        } catch (const Error&) {
          continue;
        }
        next = solver.evaluate(candidate, true);
        if (next.ok && next.ecc >= cur.ecc) {
          stepped = true;
          break;
        }
      }
      if (!stepped) {
        // No improving step along the update direction: a local maximum.
        last_norm = norm * std::ldexp(1.0, -8);
        level_converged = true;
        break;
      }
      const double gain = next.ecc - cur.ecc;
      h = candidate;
      cur = std::move(next);
      ++accepted;
      ++result.iterations;
      last_norm = alpha * norm;
      result.per_level_trace.push_back({level, accepted, cur.ecc});
      if (last_norm < config.epsilon || gain < config.epsilon) {
        level_converged = true;
        break;
      }
    }
    if (level == 0) {
      result.converged = level_converged;
      result.last_update_norm = last_norm;
      result.ecc = cur.ecc;
    }
  }
  result.homography = h;
  return result;
}

ColorImage apply_registration(const ColorImage& moving, const Homography& h) {
  const auto& m = h.matrix();
  ColorImage out(moving.width(), moving.height(), moving.channels());
  for (int y = 0; y < moving.height(); ++y) {
    for (int x = 0; x < moving.width(); ++x) {
      const double d = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      const double sx = std::clamp((m(0, 0) * x + m(0, 1) * y + m(0, 2)) / d, 0.0, moving.width() - 1.0);
      const double sy = std::clamp((m(1, 0) * x + m(1, 1) * y + m(1, 2)) / d, 0.0, moving.height() - 1.0);
      for (int c = 0; c < moving.channels(); ++c) {
        double v = 0.0;
        sample_bilinear(moving, sx, sy, c, v);
        out.at(x, y, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

RegisteredField register_field(const VFMVField& field, std::optional<ViewIndex> reference,
                               const EccConfig& config) {
  validate_ecc_config(config);
  const ViewIndex ref = reference.value_or(field.dims().center());
  if (!field.dims().contains(ref)) {
    throw Error(ErrorCode::ViewOutOfGrid, "reference view outside grid");
  }
  const GrayImage templ = to_gray(field.view(ref).pixels);
  FieldParts parts = disassemble(field);
  const int n = field.dims().count();
  std::vector<RegistrationResult> results(n);
  parallel_for(n, [&](int i) {
    const ViewIndex idx = field.dims().unflat(i);
    RegistrationResult& r = results[i];
    if (idx == ref) {
      r.ecc = ecc_score(templ, templ);
      r.converged = true;
      r.per_level_trace.push_back({0, 0, r.ecc});
      return;
    }
    const GrayImage moving = to_gray(field.view(idx).pixels);
    try {
      r = ecc_align(templ, moving, config);
      parts.views[i].pixels = apply_registration(field.view(idx).pixels, r.homography);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Diverged && e.code() != ErrorCode::SingularHomography) throw;
      r = RegistrationResult{};
      r.ecc = ecc_score(templ, moving);
      r.converged = false;
    }
  });
  parts.metadata.registered = true;
  parts.metadata.view_homographies.clear();
  for (const auto& r : results) parts.metadata.view_homographies.push_back(r.homography.row_major());
  return {assemble_field(std::move(parts)), std::move(results)};
}

void write_registration_csv(std::ostream& out, const VFMVField& field,
                            const std::vector<RegistrationResult>& results) {
  out << "u,v,plane,ecc,iterations,converged,h00,h01,h02,h10,h11,h12,h20,h21,h22\n";
  char buf[64];
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& view = field.views()[i];
    const auto& r = results[i];
    std::snprintf(buf, sizeof buf, "%.17g", r.ecc);
    out << view.view.u << ',' << view.view.v << ',' << view.plane << ',' << buf << ','
        << r.iterations << ',' << (r.converged ? 1 : 0);
    for (double v : r.homography.row_major()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace vfmv
