#include "vfmv/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>

#include "vfmv/filters.hpp"

namespace vfmv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Abstract scale coordinate in units of levels: log2(sigma / base) * L.
double scale_coordinate(const ScaleSpaceConfig& c, double sigma) {
  return std::log2(sigma / c.base_sigma) * c.levels_per_octave;
}

// Buckets keypoints on a coarse grid for neighbourhood queries.
class PointGrid {
 public:
  PointGrid(const std::vector<Keypoint>& kps, double cell) : kps_(kps), cell_(cell) {
    for (int i = 0; i < static_cast<int>(kps.size()); ++i) {
      cells_[key(cell_of(kps[i].x), cell_of(kps[i].y))].push_back(i);
    }
  }

  template <typename Fn>
  void near(double x, double y, double radius, Fn&& fn) const {
    const int cx0 = cell_of(x - radius), cx1 = cell_of(x + radius);
    const int cy0 = cell_of(y - radius), cy1 = cell_of(y + radius);
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        auto it = cells_.find(key(cx, cy));
        if (it == cells_.end()) continue;
        for (int i : it->second) {
          const double dx = kps_[i].x - x, dy = kps_[i].y - y;
          if (dx * dx + dy * dy <= radius * radius) fn(i);
        }
      }
    }
  }

 private:
  int cell_of(double v) const { return static_cast<int>(std::floor(v / cell_)); }
  static long long key(int a, int b) { return (static_cast<long long>(a) << 32) ^ (b & 0xffffffffLL); }

  const std::vector<Keypoint>& kps_;
  double cell_;
  std::unordered_map<long long, std::vector<int>> cells_;
};

// Refines a DoG extremum; returns false when it drifts out or does not settle.
bool refine_extremum(const Octave& oct, const ScaleSpaceConfig& c, int x, int y, int s,
                     Keypoint& kp) {
  const int w = oct.dogs[0].width();
  const int h = oct.dogs[0].height();
  const int L = c.levels_per_octave;
  Eigen::Vector3d off = Eigen::Vector3d::Zero();
  Eigen::Vector3d g;
  bool settled = false;
  for (int iter = 0; iter < 5; ++iter) {
    const GrayImage& d0 = oct.dogs[s - 1];
    const GrayImage& d1 = oct.dogs[s];
    const GrayImage& d2 = oct.dogs[s + 1];
    const double v = d1.at(x, y);
    g << 0.5 * (d1.at(x + 1, y) - d1.at(x - 1, y)), 0.5 * (d1.at(x, y + 1) - d1.at(x, y - 1)),
        0.5 * (d2.at(x, y) - d0.at(x, y));
    Eigen::Matrix3d hm;
    const double dxx = d1.at(x + 1, y) + d1.at(x - 1, y) - 2.0 * v;
    const double dyy = d1.at(x, y + 1) + d1.at(x, y - 1) - 2.0 * v;
    const double dss = d2.at(x, y) + d0.at(x, y) - 2.0 * v;
    const double dxy = 0.25 * (d1.at(x + 1, y + 1) - d1.at(x - 1, y + 1) - d1.at(x + 1, y - 1) +
                               d1.at(x - 1, y - 1));
    const double dxs = 0.25 * (d2.at(x + 1, y) - d2.at(x - 1, y) - d0.at(x + 1, y) + d0.at(x - 1, y));
    const double dys = 0.25 * (d2.at(x, y + 1) - d2.at(x, y - 1) - d0.at(x, y + 1) + d0.at(x, y - 1));
    hm << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(hm);
    if (!lu.isInvertible()) return false;
    off = -lu.solve(g);
    if (!off.allFinite()) return false;
    if (std::abs(off.x()) < 0.5 && std::abs(off.y()) < 0.5 && std::abs(off.z()) < 0.5) {
      const double refined = v + 0.5 * g.dot(off);
      if (std::abs(refined) < c.peak_threshold) return false;
      const double tr = dxx + dyy;
      const double det = dxx * dyy - dxy * dxy;
      const double r = c.edge_threshold;
      if (!(det > 0.0) || !(tr * tr / det < (r + 1.0) * (r + 1.0) / r)) return false;
      const double scale = std::ldexp(1.0, oct.index);
      kp.x = (x + off.x()) * scale;
      kp.y = (y + off.y()) * scale;
      kp.level = s + off.z();
      kp.octave = oct.index;
      kp.sigma = c.base_sigma * std::exp2(oct.index + (kp.level + 0.5) / L);
      kp.response = std::abs(refined);
      settled = true;
      break;
    }
    x += static_cast<int>(std::lround(off.x()));
    y += static_cast<int>(std::lround(off.y()));
    s += static_cast<int>(std::lround(off.z()));
    if (x < 1 || y < 1 || x > w - 2 || y > h - 2 || s < 1 || s > L) return false;
  }
  return settled;
}

bool is_extremum(const Octave& oct, int s, int x, int y, double v) {
  const bool is_max = v > 0.0;
  for (int ds = -1; ds <= 1; ++ds) {
    const GrayImage& d = oct.dogs[s + ds];
    for (int dy = -1; dy <= 1; ++dy) {
      const double* row = d.row(y + dy);
      for (int dx = -1; dx <= 1; ++dx) {
        if (ds == 0 && dx == 0 && dy == 0) continue;
        const double n = row[x + dx];
        if (is_max ? !(v > n) : !(v < n)) return false;
      }
    }
  }
  return true;
}

// Gaussian level nearest to the keypoint scale, and its blur in octave pixels.
std::pair<const GrayImage*, double> keypoint_level(const ScaleSpace& space, const Keypoint& kp,
                                                   int& octave_slot) {
  const auto& c = space.config;
  octave_slot = std::clamp(kp.octave - c.first_octave, 0, static_cast<int>(space.octaves.size()) - 1);
  const Octave& oct = space.octaves[octave_slot];
  const double gl = kp.level + 0.5;
  const int l = std::clamp(static_cast<int>(std::lround(gl)), 0, static_cast<int>(oct.levels.size()) - 1);
  const double sigma_oct = kp.sigma / std::ldexp(1.0, oct.index);
  return {&oct.levels[l], sigma_oct};
}

inline void pixel_gradient(const GrayImage& img, int x, int y, double& mag, double& ang) {
  const int w = img.width(), h = img.height();
  const double gx = 0.5 * (img.at(std::min(x + 1, w - 1), y) - img.at(std::max(x - 1, 0), y));
  const double gy = 0.5 * (img.at(x, std::min(y + 1, h - 1)) - img.at(x, std::max(y - 1, 0)));
  mag = std::sqrt(gx * gx + gy * gy);
  ang = std::atan2(gy, gx);
}

Descriptor describe(const ScaleSpace& space, const Keypoint& kp) {
  int slot = 0;
  const auto [img_ptr, sigma] = keypoint_level(space, kp, slot);
  const GrayImage& img = *img_ptr;
  const double scale = std::ldexp(1.0, space.octaves[slot].index);
  const double xo = kp.x / scale;
  const double yo = kp.y / scale;
  constexpr int nb = 4;
  constexpr int no = 8;
  const double bin_w = 3.0 * sigma;
  const int radius = static_cast<int>(std::ceil(std::numbers::sqrt2 * bin_w * (nb + 1) * 0.5));
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  std::array<double, nb * nb * no> hist{};
  const int xi = static_cast<int>(std::lround(xo));
  const int yi = static_cast<int>(std::lround(yo));
  for (int y = yi - radius; y <= yi + radius; ++y) {
    if (y < 0 || y >= img.height()) continue;
    for (int x = xi - radius; x <= xi + radius; ++x) {
      if (x < 0 || x >= img.width()) continue;
      const double dx = x - xo;
      const double dy = y - yo;
      const double rx = (c * dx + s * dy) / bin_w;
      const double ry = (-s * dx + c * dy) / bin_w;
      const double bx = rx + 0.5 * nb - 0.5;
      const double by = ry + 0.5 * nb - 0.5;
      if (bx <= -1.0 || by <= -1.0 || bx >= nb || by >= nb) continue;
      double mag = 0.0, ang = 0.0;
      pixel_gradient(img, x, y, mag, ang);
      if (mag == 0.0) continue;
      const double wgt = std::exp(-(rx * rx + ry * ry) / (2.0 * 0.25 * nb * nb));
      double ob = (ang - kp.orientation) / kTwoPi * no;
      ob -= std::floor(ob / no) * no;
      const int x0 = static_cast<int>(std::floor(bx));
      const int y0 = static_cast<int>(std::floor(by));
      const int o0 = static_cast<int>(std::floor(ob));
      const double fx = bx - x0, fy = by - y0, fo = ob - o0;
      for (int iy = 0; iy < 2; ++iy) {
        const int yy = y0 + iy;
        if (yy < 0 || yy >= nb) continue;
        const double wy = iy ? fy : 1.0 - fy;
        for (int ix = 0; ix < 2; ++ix) {
          const int xx = x0 + ix;
          if (xx < 0 || xx >= nb) continue;
          const double wx = ix ? fx : 1.0 - fx;
          for (int io = 0; io < 2; ++io) {
            const int oo = (o0 + io) % no;
            const double wo = io ? fo : 1.0 - fo;
            hist[(yy * nb + xx) * no + oo] += wgt * mag * wx * wy * wo;
          }
        }
      }
    }
  }
  auto normalize = [&hist] {
    double n = 0.0;
    for (double v : hist) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& v : hist) v /= n;
    }
    return n > 0.0;
  };
  Descriptor out{};
  if (!normalize()) {
    out.fill(static_cast<float>(1.0 / std::sqrt(128.0)));
    return out;
  }
  for (double& v : hist) v = std::min(v, 0.2);
  normalize();
  double n = 0.0;
  for (int i = 0; i < 128; ++i) {
    out[i] = static_cast<float>(hist[i]);
    n += static_cast<double>(out[i]) * out[i];
  }
  n = std::sqrt(n);
  for (float& v : out) v = static_cast<float>(v / n);
  return out;
}

void describe_all(const ScaleSpace& space, std::vector<Keypoint>& kps, std::vector<Descriptor>& out) {
  out.resize(kps.size());
  for (std::size_t i = 0; i < kps.size(); ++i) {
    kps[i].orientation = keypoint_orientation(space, kps[i]);
    out[i] = describe(space, kps[i]);
  }
}

}  // namespace

void validate_scale_space_config(const ScaleSpaceConfig& c) {
  if (c.num_octaves < 1 || c.levels_per_octave < 1 || !(c.peak_threshold > 0.0) ||
      !(c.edge_threshold > 0.0) || !(c.base_sigma > 0.0) || c.first_octave < -1) {
    throw Error(ErrorCode::InvalidArgument,
                "ScaleSpaceConfig needs octaves >= 1, levels >= 1, positive thresholds, first octave >= -1");
  }
}

double ScaleSpace::sigma(int octave, double level) const {
  return config.base_sigma * std::exp2(octave + level / config.levels_per_octave);
}

ScaleSpace gaussian_scale_space(const GrayImage& image, const ScaleSpaceConfig& config) {
  validate_scale_space_config(config);
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "gaussian_scale_space: empty image");
  const int L = config.levels_per_octave;
  ScaleSpace space;
  space.config = config;
  space.width = image.width();
  space.height = image.height();

  // Octave sizes first, so that a too-small input fails before any work.
  {
    int w = image.width(), h = image.height();
    if (config.first_octave < 0) {
      w *= 2;
      h *= 2;
    }
    for (int o = 0; o < config.first_octave; ++o) {
      w = (w + 1) / 2;
      h = (h + 1) / 2;
    }
    for (int i = 0; i < config.num_octaves; ++i) {
      if (w < 8 || h < 8) {
        throw Error(ErrorCode::ImageTooSmall,
                    "ImageTooSmall(octave " + std::to_string(config.first_octave + i) + " would be " +
                        std::to_string(w) + "x" + std::to_string(h) + ")");
      }
      w = (w + 1) / 2;
      h = (h + 1) / 2;
    }
  }

  GrayImage base = image;
  double prior_variance = 0.0;
  if (config.first_octave < 0) {
    base = upsample2(image);
    prior_variance = 0.5;  // the bilinear midpoint filter [1/4 1/2 1/4]
  }
  for (int o = 0; o < config.first_octave; ++o) base = decimate2(base);

  const double s0 = config.base_sigma;
  for (int i = 0; i < config.num_octaves; ++i) {
    Octave oct;
    oct.index = config.first_octave + i;
    if (i == 0) {
      oct.levels.push_back(gaussian_blur(base, std::sqrt(std::max(0.0, s0 * s0 - prior_variance))));
    } else {
      oct.levels.push_back(decimate2(space.octaves.back().levels[L]));
    }
    for (int l = 1; l < L + 3; ++l) {
      const double prev = s0 * std::exp2(static_cast<double>(l - 1) / L);
      const double cur = s0 * std::exp2(static_cast<double>(l) / L);
      oct.levels.push_back(gaussian_blur(oct.levels.back(), std::sqrt(cur * cur - prev * prev)));
    }
    for (int l = 0; l + 1 < L + 3; ++l) {
      GrayImage d(oct.levels[l].width(), oct.levels[l].height());
      auto a = oct.levels[l].values();
      auto b = oct.levels[l + 1].values();
      auto out = d.values();
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = b[k] - a[k];
      oct.dogs.push_back(std::move(d));
    }
    space.octaves.push_back(std::move(oct));
  }
  return space;
}

namespace {

// Integer scale-space position a keypoint was seeded from.
struct Seed {
  int slot, s, x, y;
  double v;
};

std::vector<Keypoint> extrema_with_seeds(const ScaleSpace& space, std::vector<Seed>* seeds_out) {
  const auto& c = space.config;
  const int L = c.levels_per_octave;
  const double pre = 0.5 * c.peak_threshold;
  std::vector<Keypoint> found;
  std::vector<Seed> seeds;
  for (std::size_t slot = 0; slot < space.octaves.size(); ++slot) {
    const Octave& oct = space.octaves[slot];
    const int w = oct.dogs[0].width();
    const int h = oct.dogs[0].height();
    for (int s = 1; s <= L; ++s) {
      const GrayImage& d = oct.dogs[s];
      for (int y = 1; y < h - 1; ++y) {
        const double* row = d.row(y);
        for (int x = 1; x < w - 1; ++x) {
          const double v = row[x];
          if (!(std::abs(v) > pre) || !is_extremum(oct, s, x, y, v)) continue;
          Keypoint kp;
          if (!refine_extremum(oct, c, x, y, s, kp)) continue;
          if (kp.x < 0.0 || kp.y < 0.0 || kp.x > space.width - 1 || kp.y > space.height - 1) continue;
          found.push_back(kp);
          seeds.push_back({static_cast<int>(slot), s, x, y, v});
        }
      }
    }
  }
  // Strongest first; the same structure can surface in two octaves or drift
  // onto the same refined location from two seeds.
  std::vector<int> order(found.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&found](int a, int b) { return found[a].response > found[b].response; });
  std::vector<Keypoint> kept;
  std::unordered_map<long long, std::vector<int>> cells;
  auto key = [](int a, int b) { return (static_cast<long long>(a) << 32) ^ (b & 0xffffffffLL); };
  for (const int idx : order) {
    const Keypoint& kp = found[idx];
    const int cx = static_cast<int>(std::floor(kp.x));
    const int cy = static_cast<int>(std::floor(kp.y));
    const double sc = scale_coordinate(c, kp.sigma);
    bool dup = false;
    for (int yy = cy - 1; yy <= cy + 1 && !dup; ++yy) {
      for (int xx = cx - 1; xx <= cx + 1 && !dup; ++xx) {
        auto it = cells.find(key(xx, yy));
        if (it == cells.end()) continue;
        for (int j : it->second) {
          const auto& o = kept[j];
          const double dx = o.x - kp.x, dy = o.y - kp.y;
          if (dx * dx + dy * dy <= 1.0 && std::abs(scale_coordinate(c, o.sigma) - sc) < 0.5) {
            dup = true;
            break;
          }
        }
      }
    }
    if (dup) continue;
    cells[key(cx, cy)].push_back(static_cast<int>(kept.size()));
    kept.push_back(kp);
    if (seeds_out) seeds_out->push_back(seeds[idx]);
  }
  return kept;
}

// True when the seed value is not exceeded in magnitude, with the same sign,
// anywhere in the 3x3x3 neighbourhood of the same position in `other`.
bool dominates(const ScaleSpace& other, const Seed& seed) {
  const Octave& oct = other.octaves[seed.slot];
  const bool is_max = seed.v > 0.0;
  for (int ds = -1; ds <= 1; ++ds) {
    const GrayImage& d = oct.dogs[seed.s + ds];
    for (int dy = -1; dy <= 1; ++dy) {
      const double* row = d.row(seed.y + dy);
      for (int dx = -1; dx <= 1; ++dx) {
        const double n = row[seed.x + dx];
        if (is_max ? !(seed.v > n) : !(seed.v < n)) return false;
      }
    }
  }
  return true;
}

}  // namespace

std::vector<Keypoint> dog_extrema(const ScaleSpace& space) { return extrema_with_seeds(space, nullptr); }

double keypoint_orientation(const ScaleSpace& space, const Keypoint& kp) {
  int slot = 0;
  const auto [img_ptr, sigma] = keypoint_level(space, kp, slot);
  const GrayImage& img = *img_ptr;
  const double scale = std::ldexp(1.0, space.octaves[slot].index);
  const double xo = kp.x / scale;
  const double yo = kp.y / scale;
  const double sw = 1.5 * sigma;
  const int radius = static_cast<int>(std::ceil(3.0 * sw));
  constexpr int nbins = 36;
  std::array<double, nbins> hist{};
  const int xi = static_cast<int>(std::lround(xo));
  const int yi = static_cast<int>(std::lround(yo));
  for (int y = std::max(0, yi - radius); y <= std::min(img.height() - 1, yi + radius); ++y) {
    for (int x = std::max(0, xi - radius); x <= std::min(img.width() - 1, xi + radius); ++x) {
      const double dx = x - xo, dy = y - yo;
      const double r2 = dx * dx + dy * dy;
      if (r2 > radius * radius) continue;
      double mag = 0.0, ang = 0.0;
      pixel_gradient(img, x, y, mag, ang);
      double b = ang / kTwoPi * nbins;
      b -= std::floor(b / nbins) * nbins;
      const int b0 = static_cast<int>(b) % nbins;
      hist[b0] += mag * std::exp(-r2 / (2.0 * sw * sw));
    }
  }
  for (int pass = 0; pass < 6; ++pass) {
    std::array<double, nbins> sm{};
    for (int i = 0; i < nbins; ++i) {
      sm[i] = (hist[(i + nbins - 1) % nbins] + hist[i] + hist[(i + 1) % nbins]) / 3.0;
    }
    hist = sm;
  }
  int best = 0;
  for (int i = 1; i < nbins; ++i) {
    if (hist[i] > hist[best]) best = i;
  }
  const double l = hist[(best + nbins - 1) % nbins];
  const double r = hist[(best + 1) % nbins];
  const double m = hist[best];
  const double denom = l - 2.0 * m + r;
  const double off = denom < 0.0 ? 0.5 * (l - r) / denom : 0.0;
  double theta = (best + 0.5 + off) / nbins * kTwoPi;
  theta -= std::floor(theta / kTwoPi) * kTwoPi;
  return theta;
}

Descriptor compute_descriptor(const ScaleSpace& space, const Keypoint& kp) {
  if (!(kp.x >= 1.0 && kp.y >= 1.0 && kp.x <= space.width - 2.0 && kp.y <= space.height - 2.0)) {
    throw Error(ErrorCode::WindowOutOfBounds, "WindowOutOfBounds(" + std::to_string(kp.x) + "," +
                                                  std::to_string(kp.y) + ")");
  }
  return describe(space, kp);
}

Descriptor compute_descriptor(const GrayImage& image, const Keypoint& kp,
                              const ScaleSpaceConfig& config) {
  const ScaleSpace space = gaussian_scale_space(image, config);
  Keypoint k = kp;
  // Map the scale back to a level position when the caller gave only sigma.
  const double sc = scale_coordinate(config, k.sigma) - 0.5;
  const int L = config.levels_per_octave;
  int o = static_cast<int>(std::floor((sc - 0.5) / L));
  o = std::clamp(o, config.first_octave, config.first_octave + config.num_octaves - 1);
  k.octave = o;
  k.level = sc - o * L;
  return compute_descriptor(space, k);
}

FeatureSet detect_features(const GrayImage& image, const ScaleSpaceConfig& config,
                           FeatureSource source) {
  const ScaleSpace space = gaussian_scale_space(image, config);
  FeatureSet set;
  set.source = source;
  set.keypoints = dog_extrema(space);
  describe_all(space, set.keypoints, set.descriptors);
  return set;
}

std::vector<GrayImage> refocus_slices(const VFMVField& field, const std::vector<double>& slopes) {
  const int w = field.width();
  const int h = field.height();
  const ViewIndex ref = field.geometry().reference;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::vector<double>> sums(slopes.size(), std::vector<double>(n, 0.0));
  std::vector<std::vector<unsigned short>> counts(slopes.size(), std::vector<unsigned short>(n, 0));
  for (const auto& view : field.views()) {
    const GrayImage g = to_gray(view.pixels);
    const int du = view.view.u - ref.u;
    const int dv = view.view.v - ref.v;
    for (std::size_t j = 0; j < slopes.size(); ++j) {
      // out(x, y) = view(x - slope * dv, y - slope * du)
      const double sx = -slopes[j] * dv;
      const double sy = -slopes[j] * du;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const int ix = static_cast<int>(fx0), iy = static_cast<int>(fy0);
      const double fx = sx - fx0, fy = sy - fy0;
      auto& sum = sums[j];
      auto& cnt = counts[j];
      for (int y = 0; y < h; ++y) {
        const int y0 = y + iy;
        const int y1 = fy > 0.0 ? y0 + 1 : y0;
        if (y0 < 0 || y1 >= h) continue;
        const double* r0 = g.row(y0);
        const double* r1 = g.row(y1);
        const int x_lo = std::max(0, -ix);
        const int x_hi = std::min(w - 1, (fx > 0.0 ? w - 2 : w - 1) - ix);
        double* srow = &sum[static_cast<std::size_t>(y) * w];
        unsigned short* crow = &cnt[static_cast<std::size_t>(y) * w];
        for (int x = x_lo; x <= x_hi; ++x) {
          const int x0 = x + ix;
          double v;
          if (fx == 0.0 && fy == 0.0) {
            v = r0[x0];
          } else {
            const double x1v0 = fx > 0.0 ? r0[x0 + 1] : r0[x0];
            const double x1v1 = fx > 0.0 ? r1[x0 + 1] : r1[x0];
            const double top = r0[x0] + fx * (x1v0 - r0[x0]);
            const double bot = r1[x0] + fx * (x1v1 - r1[x0]);
            v = fy > 0.0 ? top + fy * (bot - top) : top;
          }
          srow[x] += v;
          ++crow[x];
        }
      }
    }
  }
  std::vector<GrayImage> out;
  out.reserve(slopes.size());
  for (std::size_t j = 0; j < slopes.size(); ++j) {
    GrayImage img(w, h);
    auto vals = img.values();
    for (std::size_t k = 0; k < n; ++k) {
      vals[k] = counts[j][k] ? sums[j][k] / counts[j][k] : 0.0;
    }
    out.push_back(std::move(img));
  }
  return out;
}

GrayImage refocus_slice(const VFMVField& field, double slope) {
  return std::move(refocus_slices(field, {slope}).front());
}

std::vector<double> slope_grid(double max_slope, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "slope_grid needs n >= 1");
  if (n == 1) return {0.0};
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = -max_slope + 2.0 * max_slope * i / (n - 1);
  return s;
}

FeatureSet detect_field_features(const VFMVField& field, const ScaleSpaceConfig& config,
                                 const std::vector<double>& slope_list) {
  if (slope_list.empty()) throw Error(ErrorCode::InvalidArgument, "detect_field_features needs >= 1 slope");
  // repeated slopes give identical stacks, which no strict extremum can beat
  std::vector<double> slopes = slope_list;
  slopes.erase(std::unique(slopes.begin(), slopes.end()), slopes.end());
  validate_scale_space_config(config);
  const auto slices = refocus_slices(field, slopes);
  const int ns = static_cast<int>(slopes.size());
  std::vector<std::vector<Keypoint>> per(ns);
  std::vector<std::vector<Descriptor>> desc(ns);

  // Slope-axis extremum test against the DoG stacks of the neighbouring
  // slopes; only three scale spaces are alive at a time.
  std::vector<std::optional<ScaleSpace>> window(ns);
  auto space_of = [&](int j) -> const ScaleSpace& {
    if (!window[j]) window[j] = gaussian_scale_space(slices[j], config);
    return *window[j];
  };
  for (int j = 0; j < ns; ++j) {
    if (j >= 2) window[j - 2].reset();
    const ScaleSpace& space = space_of(j);
    std::vector<Seed> seeds;
    auto found = extrema_with_seeds(space, &seeds);
    std::vector<Keypoint> kept;
    for (std::size_t i = 0; i < found.size(); ++i) {
      bool ok = true;
      for (int nj : {j - 1, j + 1}) {
        if (ok && nj >= 0 && nj < ns) ok = dominates(space_of(nj), seeds[i]);
      }
      if (!ok) continue;
      found[i].slope = slopes[j];
      kept.push_back(found[i]);
    }
    per[j] = std::move(kept);
    describe_all(space, per[j], desc[j]);
  }
  window.clear();

  std::vector<PointGrid> grids;
  grids.reserve(ns);
  for (int j = 0; j < ns; ++j) grids.emplace_back(per[j], 2.0);

  FeatureSet set;
  set.source.field_level = true;
  for (int j = 0; j < ns; ++j) {
    for (std::size_t i = 0; i < per[j].size(); ++i) {
      const Keypoint& kp = per[j][i];
      const double sc = scale_coordinate(config, kp.sigma);
      bool suppressed = false;
      for (int nj : {j - 1, j + 1}) {
        if (nj < 0 || nj >= ns || suppressed) continue;
        grids[nj].near(kp.x, kp.y, 1.5, [&](int k) {
          const Keypoint& o = per[nj][k];
          if (std::abs(scale_coordinate(config, o.sigma) - sc) >= 0.5) return;
          // Ties go to the lower slope index.
          if (o.response > kp.response || (o.response == kp.response && nj < j)) suppressed = true;
        });
      }
      if (suppressed) continue;
      set.keypoints.push_back(kp);
      set.descriptors.push_back(desc[j][i]);
    }
  }
  return set;
}

std::vector<std::pair<int, int>> match_features(const FeatureSet& a, const FeatureSet& b, double ratio) {
  std::vector<std::pair<int, int>> out;
  if (a.descriptors.empty() || b.descriptors.empty()) return out;
  const double r2 = ratio * ratio;
  const std::size_t nb = b.descriptors.size();
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) {
    const float* da = a.descriptors[i].data();
    double best = 1e300, second = 1e300;
    int best_j = -1;
    for (std::size_t j = 0; j < nb; ++j) {
      const float* db = b.descriptors[j].data();
      float acc = 0.0f;
      for (int k = 0; k < 128; ++k) {
        const float d = da[k] - db[k];
        acc += d * d;
      }
      const double d = acc;
      if (d < best) {
        second = best;
        best = d;
        best_j = static_cast<int>(j);
      } else if (d < second) {
        second = d;
      }
    }
    if (best_j < 0) continue;
    if (nb == 1 || best < r2 * second) out.emplace_back(static_cast<int>(i), best_j);
  }
  return out;
}

double spatial_coverage(const std::vector<Keypoint>& keypoints, int width, int height, int cells) {
  if (keypoints.empty() || width <= 0 || height <= 0 || cells <= 0) return 0.0;
  std::vector<char> hit(static_cast<std::size_t>(cells) * cells, 0);
  for (const auto& kp : keypoints) {
    const int cx = std::clamp(static_cast<int>(std::floor(kp.x * cells / width)), 0, cells - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(kp.y * cells / height)), 0, cells - 1);
    hit[cy * cells + cx] = 1;
  }
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / (cells * cells);
}

ColorImage draw_keypoints(const ColorImage& image, const std::vector<Keypoint>& keypoints,
                          std::array<float, 3> color) {
  ColorImage out = image;
  for (const auto& kp : keypoints) {
    const double r = std::max(2.0, 2.0 * kp.sigma);
    const int steps = std::max(16, static_cast<int>(2.0 * std::numbers::pi * r));
    for (int i = 0; i < steps; ++i) {
      const double a = kTwoPi * i / steps;
      const int x = static_cast<int>(std::lround(kp.x + r * std::cos(a)));
      const int y = static_cast<int>(std::lround(kp.y + r * std::sin(a)));
      if (!out.contains(x, y)) continue;
      for (int c = 0; c < std::min(3, out.channels()); ++c) out.at(x, y, c) = color[c];
    }
  }
  return out;
}

std::vector<FeatureReportEntry> feature_report(
    const std::vector<std::pair<std::string, FeatureSet>>& sets, const ColorImage& reference) {
  static constexpr std::array<std::array<float, 3>, 4> palette{
      {{1.0f, 0.1f, 0.1f}, {0.1f, 1.0f, 0.1f}, {0.2f, 0.4f, 1.0f}, {1.0f, 1.0f, 0.1f}}};
  std::vector<FeatureReportEntry> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& [name, set] = sets[i];
    FeatureReportEntry e;
    e.name = name;
    e.count = static_cast<int>(set.keypoints.size());
    e.coverage = spatial_coverage(set.keypoints, reference.width(), reference.height());
    e.overlay = draw_keypoints(reference, set.keypoints, palette[i % palette.size()]);
    out.push_back(std::move(e));
  }
  return out;
}

void write_feature_set(std::ostream& out, const FeatureSet& set) {
  out << "# x y sigma response slope orientation d0..d127\n";
  if (set.source.field_level) {
    out << "source field_level\n";
  } else {
    out << "source view " << set.source.view.u << ' ' << set.source.view.v << '\n';
  }
  out << "count " << set.keypoints.size() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < set.keypoints.size(); ++i) {
    const auto& k = set.keypoints[i];
    const double vals[6] = {k.x, k.y, k.sigma, k.response, k.slope ? *k.slope : std::nan(""),
                            k.orientation};
    for (int j = 0; j < 6; ++j) {
      if (j == 4 && !k.slope) {
        out << "nan";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", vals[j]);
        out << buf;
      }
      out << ' ';
    }
    for (int j = 0; j < 128; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(set.descriptors[i][j]));
      out << buf << (j == 127 ? '\n' : ' ');
    }
  }
}

FeatureSet read_feature_set(std::istream& in) {
  FeatureSet set;
  std::string line;
  auto fail = [](const std::string& why) {
    return Error(ErrorCode::InvalidDataset, "feature table: " + why);
  };
  if (!std::getline(in, line) || line.empty() || line[0] != '#') throw fail("missing header");
  if (!std::getline(in, line)) throw fail("missing source line");
  {
    std::istringstream ss(line);
    std::string tag, kind;
    ss >> tag >> kind;
    if (tag != "source") throw fail("bad source line");
    if (kind == "field_level") {
      set.source.field_level = true;
    } else if (kind == "view") {
      ss >> set.source.view.u >> set.source.view.v;
    } else {
      throw fail("bad source kind");
    }
  }
  std::size_t count = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "count %zu", &count) != 1) {
    throw fail("bad count line");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw fail("truncated");
    std::istringstream ss(line);
    std::string tok[6];
    double v[6];
    for (int j = 0; j < 6; ++j) {
      if (!(ss >> tok[j])) throw fail("short row");
      v[j] = std::strtod(tok[j].c_str(), nullptr);
    }
    Keypoint k;
    k.x = v[0];
    k.y = v[1];
    k.sigma = v[2];
    k.response = v[3];
    if (tok[4] != "nan") k.slope = v[4];
    k.orientation = v[5];
    Descriptor d{};
    for (int j = 0; j < 128; ++j) {
      std::string t;
      if (!(ss >> t)) throw fail("short descriptor");
      d[j] = std::strtof(t.c_str(), nullptr);
    }
    set.keypoints.push_back(k);
    set.descriptors.push_back(d);
  }
  return set;
}

}  // namespace vfmv
