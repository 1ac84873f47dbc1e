#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vfmv/core.hpp"
#include "vfmv/image.hpp"

namespace vfmv {

/// Invertible projective warp. Stored normalized so that m(2,2) == 1
/// whenever it is nonzero.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  /// Normalizes and checks invertibility; throws SingularHomography.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography translation(double tx, double ty);
  static Homography scale_about(double s, double cx, double cy);
  /// The 8 free parameters (row-major, m(2,2) fixed at 1).
  static Homography from_params(const std::array<double, 8>& p);
  std::array<double, 8> params() const;

  const Eigen::Matrix3d& matrix() const { return m_; }
  std::array<double, 9> row_major() const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;
  /// Conjugates by an isotropic coordinate scale: returns S H S^-1 with
  /// S = diag(f, f, 1).
  Homography rescaled(double f) const;

 private:
  Eigen::Matrix3d m_;
};

/// Block view of a 3x3 warp [A T; V h].
struct HomographyBlocks {
  Eigen::Matrix2d A;      // scale, rotation and shear
  Eigen::Vector2d T;      // translation
  Eigen::RowVector2d V;   // projective (line intersection) terms
  double h = 1.0;         // scaling factor
};

HomographyBlocks decompose_homography(const Eigen::Matrix3d& m);
inline HomographyBlocks decompose_homography(const Homography& h) {
  return decompose_homography(h.matrix());
}
Eigen::Matrix3d compose_homography(const HomographyBlocks& b);

/// Isotropic scale carried by the A block, sqrt(|det A|) / h.
double homography_scale(const Homography& h);
/// Local isotropic scale sqrt(|det J|) of the mapping at p. Equals
/// homography_scale when the projective terms vanish.
double homography_scale_at(const Homography& h, const Eigen::Vector2d& p);

/// Max-abs elementwise difference to the identity.
double distance_to_identity(const Homography& h);

enum class WarpModel { translation, affine, homography };

struct EccConfig {
  int max_iterations = 200;  // per pyramid level
  double epsilon = 1e-6;     // on the update norm and on the per-step ecc gain
  int pyramid_levels = 3;
  WarpModel warp_model = WarpModel::homography;
};

void validate_ecc_config(const EccConfig& config);

struct TraceEntry {
  int level;      // 0 = finest
  int iteration;  // accepted steps so far at this level
  double ecc;
};

struct RegistrationResult {
  Homography homography;  // maps template coordinates into the moving image
  double ecc = 0.0;
  int iterations = 0;     // accepted update steps over all levels
  bool converged = false;
  double last_update_norm = 0.0;
  std::vector<TraceEntry> per_level_trace;
};

/// Correlation of the zero-mean, unit-norm vectorizations over the mask
/// (all pixels when absent). Throws DegenerateInput when either image is
/// constant under the mask or fewer than two pixels are valid.
double ecc_score(const GrayImage& templ, const GrayImage& candidate,
                 const Mask* mask = nullptr);

template <typename T>
struct WarpResult {
  Image<T> image;
  Mask mask;  // 1 where the source was sampled inside its extent
};

/// Inverse mapping: output (s*, t*) samples the input at H^-1 (s*, t*, 1),
/// bilinear. Output pixels that map outside the input are 0 and masked out.
WarpResult<double> warp_image(const GrayImage& image, const Homography& h);
WarpResult<float> warp_image(const ColorImage& image, const Homography& h);

/// Finds H maximizing ecc_score(templ, moving(H x)) by forward-additive
/// Gauss-Newton (ECC closed-form step) over a coarse-to-fine pyramid, with step
/// halving so that the correlation never decreases within a level.
RegistrationResult ecc_align(const GrayImage& templ, const GrayImage& moving,
                             const EccConfig& config = {},
                             const Homography& initial = Homography());

/// Registered image of `moving` in the template frame: moving(H x), with
/// replicated borders.
ColorImage apply_registration(const ColorImage& moving, const Homography& h);

struct RegisteredField {
  VFMVField field;
  std::vector<RegistrationResult> results;  // grid order
};

/// Aligns every view to the reference view (default: grid center). The
/// reference is left untouched and reported as identity with ecc = 1.
RegisteredField register_field(const VFMVField& field,
                               std::optional<ViewIndex> reference = std::nullopt,
                               const EccConfig& config = {});

/// CSV: u,v,plane,ecc,iterations,converged,h00..h22.
void write_registration_csv(std::ostream& out, const VFMVField& field,
                            const std::vector<RegistrationResult>& results);

}  // namespace vfmv
