#include "vfmv/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "vfmv/dataset.hpp"
#include "vfmv/parallel.hpp"
#include "vfmv/png_io.hpp"

namespace vfmv {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "InvalidConfig(" + path + "): " + why);
}

std::string warp_model_name(WarpModel m) {
  switch (m) {
    case WarpModel::translation: return "translation";
    case WarpModel::affine: return "affine";
    case WarpModel::homography: return "homography";
  }
  return "homography";
}

WarpModel parse_warp_model(const std::string& s, const std::string& path) {
  if (s == "translation") return WarpModel::translation;
  if (s == "affine") return WarpModel::affine;
  if (s == "homography") return WarpModel::homography;
  bad_config(path, "unknown warp model '" + s + "'");
}

// The patch may only touch keys that exist in the canonical layout, with a
// compatible type. Integers may feed floating fields, not the other way.
void check_patch(const json& patch, const json& base, const std::string& path) {
  if (base.is_object()) {
    if (!patch.is_object()) bad_config(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, value] : patch.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!base.contains(key)) bad_config(sub, "unknown field");
      check_patch(value, base.at(key), sub);
    }
    return;
  }
  const bool ok = (base.is_boolean() && patch.is_boolean()) ||
                  (base.is_string() && patch.is_string()) ||
                  (base.is_array() && patch.is_array()) ||
                  (base.is_number_float() && patch.is_number()) ||
                  (base.is_number_integer() && patch.is_number_integer());
  if (!ok) bad_config(path, std::string("expected ") + base.type_name() + ", got " + patch.type_name());
}

void merge(json& dst, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && dst.contains(key) && dst[key].is_object()) {
      merge(dst[key], value);
    } else {
      dst[key] = value;
    }
  }
}

ViewIndex parse_view_pair(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    bad_config(path, "expected [u, v]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

double mid_depth_of(const PipelineConfig& c) { return c.mid_depth; }

double pair_focus_a(const PipelineConfig& c) {
  return c.pair_focus_a > 0.0 ? c.pair_focus_a : mid_depth_of(c);
}

double pair_focus_b(const PipelineConfig& c) {
  if (c.pair_focus_b > 0.0) return c.pair_focus_b;
  return 2.0 / (1.0 / c.mid_depth + 1.0 / c.far_depth);
}

double nearest_layer_depth(const LayeredScene& scene) {
  double z = std::numeric_limits<double>::infinity();
  for (const auto& l : scene.layers) z = std::min(z, l.depth);
  return z;
}

// Main layers that define the depth bands of the layer-coverage measure:
// near/mid/far for the desk scene, every layer of a scene file.
void main_layers(const PipelineConfig& c, const LayeredScene& scene, std::vector<double>& depths,
                 std::vector<std::string>& names) {
  depths.clear();
  names.clear();
  if (c.scene_file.empty()) {
    for (const char* n : {"near", "mid", "far"}) {
      const int i = find_layer(scene, n);
      if (i >= 0) {
        depths.push_back(scene.layers[i].depth);
        names.push_back(n);
      }
    }
    return;
  }
  for (auto it = scene.layers.rbegin(); it != scene.layers.rend(); ++it) {
    depths.push_back(it->depth);
    names.push_back(it->name);
  }
}

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double rotation_angle_deg(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

nlohmann::json config_to_json(const PipelineConfig& c) {
  json j;
  j["scene"] = {{"file", c.scene_file},       {"width", c.width},
                {"height", c.height},         {"near_depth", c.near_depth},
                {"mid_depth", c.mid_depth},   {"far_depth", c.far_depth},
                {"focus_ruler", c.focus_ruler}, {"seed", c.scene_seed}};
  j["grid"] = {{"rows", c.rows}, {"cols", c.cols}};
  j["planes"] = {{"count", c.num_planes}, {"near", c.plane_near},      {"far", c.plane_far},
                 {"policy", c.policy},    {"variant", c.variant},      {"fixed_plane", c.fixed_plane}};
  j["lens"] = {{"focal_length", c.lens.focal_length},
               {"aperture_diameter", c.lens.aperture_diameter},
               {"pixels_per_unit", c.lens.pixels_per_unit}};
  j["capture"] = {{"kappa", c.kappa},
                  {"noise_sigma", c.noise_sigma},
                  {"baseline", c.baseline},
                  {"max_disparity", c.max_disparity},
                  {"pair_baseline", c.pair_baseline},
                  {"pair_focus_a", c.pair_focus_a},
                  {"pair_focus_b", c.pair_focus_b}};
  j["ecc"] = {{"max_iterations", c.ecc.max_iterations},
              {"epsilon", c.ecc.epsilon},
              {"pyramid_levels", c.ecc.pyramid_levels},
              {"warp_model", warp_model_name(c.ecc.warp_model)}};
  j["detect"] = {{"register", c.register_before_detect},
                 {"mode", c.detect_mode},
                 {"num_octaves", c.detector.num_octaves},
                 {"first_octave", c.detector.first_octave},
                 {"levels_per_octave", c.detector.levels_per_octave},
                 {"peak_threshold", c.detector.peak_threshold},
                 {"edge_threshold", c.detector.edge_threshold},
                 {"base_sigma", c.detector.base_sigma},
                 {"num_slopes", c.num_slopes},
                 {"max_slope", c.max_slope}};
  j["reconstruct"] = {{"threshold", c.ransac.threshold},
                      {"confidence", c.ransac.confidence},
                      {"max_iterations", c.ransac.max_iterations},
                      {"ratio", c.match_ratio},
                      {"views", {{c.pair_views[0].u, c.pair_views[0].v},
                                 {c.pair_views[1].u, c.pair_views[1].v}}},
                      {"self_calibrate", c.self_calibrate}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& patch, PipelineConfig base) {
  json full = config_to_json(base);
  check_patch(patch, full, "");
  merge(full, patch);
  PipelineConfig c;
  try {
    const auto& s = full.at("scene");
    c.scene_file = s.at("file").get<std::string>();
    c.width = s.at("width").get<int>();
    c.height = s.at("height").get<int>();
    c.near_depth = s.at("near_depth").get<double>();
    c.mid_depth = s.at("mid_depth").get<double>();
    c.far_depth = s.at("far_depth").get<double>();
    c.focus_ruler = s.at("focus_ruler").get<bool>();
    c.scene_seed = s.at("seed").get<std::uint64_t>();
    const auto& g = full.at("grid");
    c.rows = g.at("rows").get<int>();
    c.cols = g.at("cols").get<int>();
    const auto& p = full.at("planes");
    c.num_planes = p.at("count").get<int>();
    c.plane_near = p.at("near").get<double>();
    c.plane_far = p.at("far").get<double>();
    c.policy = p.at("policy").get<std::string>();
    c.variant = p.at("variant").get<std::string>();
    c.fixed_plane = p.at("fixed_plane").get<int>();
    const auto& l = full.at("lens");
    c.lens.focal_length = l.at("focal_length").get<double>();
    c.lens.aperture_diameter = l.at("aperture_diameter").get<double>();
    c.lens.pixels_per_unit = l.at("pixels_per_unit").get<double>();
    const auto& cap = full.at("capture");
    c.kappa = cap.at("kappa").get<double>();
    c.noise_sigma = cap.at("noise_sigma").get<double>();
    c.baseline = cap.at("baseline").get<double>();
    c.max_disparity = cap.at("max_disparity").get<double>();
    c.pair_baseline = cap.at("pair_baseline").get<double>();
    c.pair_focus_a = cap.at("pair_focus_a").get<double>();
    c.pair_focus_b = cap.at("pair_focus_b").get<double>();
    const auto& e = full.at("ecc");
    c.ecc.max_iterations = e.at("max_iterations").get<int>();
    c.ecc.epsilon = e.at("epsilon").get<double>();
    c.ecc.pyramid_levels = e.at("pyramid_levels").get<int>();
    c.ecc.warp_model = parse_warp_model(e.at("warp_model").get<std::string>(), "ecc.warp_model");
    const auto& d = full.at("detect");
    c.register_before_detect = d.at("register").get<bool>();
    c.detect_mode = d.at("mode").get<std::string>();
    c.detector.num_octaves = d.at("num_octaves").get<int>();
    c.detector.first_octave = d.at("first_octave").get<int>();
    c.detector.levels_per_octave = d.at("levels_per_octave").get<int>();
    c.detector.peak_threshold = d.at("peak_threshold").get<double>();
    c.detector.edge_threshold = d.at("edge_threshold").get<double>();
    c.detector.base_sigma = d.at("base_sigma").get<double>();
    c.num_slopes = d.at("num_slopes").get<int>();
    c.max_slope = d.at("max_slope").get<double>();
    const auto& r = full.at("reconstruct");
    c.ransac.threshold = r.at("threshold").get<double>();
    c.ransac.confidence = r.at("confidence").get<double>();
    c.ransac.max_iterations = r.at("max_iterations").get<int>();
    c.match_ratio = r.at("ratio").get<double>();
    const auto& views = r.at("views");
    if (!views.is_array() || views.size() != 2) bad_config("reconstruct.views", "expected two views");
    c.pair_views[0] = parse_view_pair(views[0], "reconstruct.views[0]");
    c.pair_views[1] = parse_view_pair(views[1], "reconstruct.views[1]");
    c.self_calibrate = r.at("self_calibrate").get<bool>();
    c.seed = full.at("seed").get<std::uint64_t>();
    c.threads = full.at("threads").get<int>();
  } catch (const json::exception& ex) {
    bad_config("<root>", ex.what());
  }
  validate_config(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& ex) {
    bad_config(path.string(), ex.what());
  }
  return config_from_json(j, std::move(base));
}

void validate_config(const PipelineConfig& c) {
  if (c.width < 16 || c.height < 16) bad_config("scene.width", "image must be at least 16x16");
  if (!(c.near_depth > 0 && c.mid_depth > c.near_depth && c.far_depth > c.mid_depth)) {
    bad_config("scene.near_depth", "need 0 < near < mid < far");
  }
  if (c.rows < 1) bad_config("grid.rows", "must be >= 1");
  if (c.cols < 1) bad_config("grid.cols", "must be >= 1");
  if (c.num_planes < 1) bad_config("planes.count", "must be >= 1");
  if (!(c.plane_near > 0 && c.plane_far >= c.plane_near)) bad_config("planes.near", "need 0 < near <= far");
  if (c.num_planes > 1 && !(c.plane_far > c.plane_near)) bad_config("planes.far", "must exceed planes.near");
  try {
    AssignmentPolicy::parse(c.policy);
  } catch (const Error& ex) {
    bad_config("planes.policy", ex.what());
  }
  if (c.variant != "vfmv" && c.variant != "fixed" && c.variant != "pair" && c.variant != "pair_fixed") {
    bad_config("planes.variant", "expected vfmv, fixed, pair or pair_fixed");
  }
  if (c.fixed_plane < 0 || c.fixed_plane >= c.num_planes) bad_config("planes.fixed_plane", "out of range");
  if (!(c.lens.focal_length > 0)) bad_config("lens.focal_length", "must be > 0");
  if (!(c.lens.aperture_diameter >= 0)) bad_config("lens.aperture_diameter", "must be >= 0");
  if (!(c.lens.pixels_per_unit > 0)) bad_config("lens.pixels_per_unit", "must be > 0");
  if (c.plane_near <= c.lens.focal_length) bad_config("planes.near", "must lie beyond the focal length");
  if (!std::isfinite(c.kappa)) bad_config("capture.kappa", "must be finite");
  if (!(c.noise_sigma >= 0)) bad_config("capture.noise_sigma", "must be >= 0");
  if (!(c.max_disparity >= 0)) bad_config("capture.max_disparity", "must be >= 0");
  if (!(c.pair_baseline >= 0)) bad_config("capture.pair_baseline", "must be >= 0");
  try {
    validate_ecc_config(c.ecc);
  } catch (const Error& ex) {
    bad_config("ecc", ex.what());
  }
  if (c.detect_mode != "field" && c.detect_mode != "per_view") {
    bad_config("detect.mode", "expected field or per_view");
  }
  try {
    validate_scale_space_config(c.detector);
  } catch (const Error& ex) {
    bad_config("detect", ex.what());
  }
  if (c.num_slopes < 1) bad_config("detect.num_slopes", "must be >= 1");
  try {
    validate_ransac_config(c.ransac);
  } catch (const Error& ex) {
    bad_config("reconstruct", ex.what());
  }
  if (!(c.match_ratio > 0 && c.match_ratio <= 1)) bad_config("reconstruct.ratio", "must be in (0, 1]");
  if (c.pair_views[0] == c.pair_views[1]) bad_config("reconstruct.views", "views must differ");
  if (c.threads < 1) bad_config("threads", "must be >= 1");
}

std::string config_hash(const PipelineConfig& config) {
  // Thread count does not change any result, so it stays out of the hash.
  json j = config_to_json(config);
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineConfig ci_profile() {
  PipelineConfig c;
  c.width = 256;
  c.height = 256;
  c.rows = 5;
  c.cols = 5;
  return c;
}

std::uint64_t stage_seed(std::uint64_t root, std::uint64_t stage) {
  // splitmix64 of (root, stage)
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::WindowTooLarge:
    case ErrorCode::InvalidPlane:
      return 2;
    case ErrorCode::Diverged:
      return 4;
    case ErrorCode::InsufficientMatches:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::AmbiguousPose:
    case ErrorCode::NoCorrespondences:
    case ErrorCode::SingularHomography:
    case ErrorCode::DegenerateInput:
      return 5;
    default:
      return 3;
  }
}

std::vector<FocalPlane> build_planes(const PipelineConfig& c) {
  return make_planes(c.num_planes, c.plane_near, c.plane_far);
}

CameraIntrinsics build_intrinsics(const PipelineConfig& c) {
  const double f = c.lens.focal_length * c.lens.pixels_per_unit;
  return {f, f, (c.width - 1) / 2.0, (c.height - 1) / 2.0, 0.0};
}

LayeredScene load_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scene file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::InvalidConfig, "InvalidConfig(scene.file): " + std::string(ex.what()));
  }
  const auto dir = path.parent_path();
  LayeredScene scene;
  try {
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    if (j.contains("background")) {
      const auto& b = j.at("background");
      scene.background = {b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>()};
    }
    for (const auto& lj : j.at("layers")) {
      SceneLayer layer;
      layer.name = lj.value("name", "layer" + std::to_string(scene.layers.size()));
      layer.depth = lj.at("depth").get<double>();
      layer.x0 = lj.value("x0", 0);
      layer.y0 = lj.value("y0", 0);
      layer.texture = read_png(dir / lj.at("texture").get<std::string>());
      if (lj.contains("alpha")) {
        const ColorImage a = read_png(dir / lj.at("alpha").get<std::string>());
        layer.alpha = Image<float>(a.width(), a.height(), 1);
        for (int y = 0; y < a.height(); ++y) {
          for (int x = 0; x < a.width(); ++x) layer.alpha.at(x, y) = a.at(x, y, 0);
        }
      } else {
        layer.alpha = Image<float>(layer.texture.width(), layer.texture.height(), 1, 1.0f);
      }
      scene.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, "InvalidConfig(scene.file): " + std::string(ex.what()));
  }
  std::stable_sort(scene.layers.begin(), scene.layers.end(),
                   [](const SceneLayer& a, const SceneLayer& b) { return a.depth > b.depth; });
  validate_scene(scene);
  return scene;
}

LayeredScene build_scene(const PipelineConfig& c, const std::vector<FocalPlane>& planes) {
  if (!c.scene_file.empty()) {
    LayeredScene scene = load_scene_file(c.scene_file);
    if (scene.width != c.width || scene.height != c.height) {
      bad_config("scene.width", "scene file resolution differs from the configured one");
    }
    return scene;
  }
  DeskSceneConfig d;
  d.width = c.width;
  d.height = c.height;
  d.near_depth = c.near_depth;
  d.mid_depth = c.mid_depth;
  d.far_depth = c.far_depth;
  d.focus_ruler = c.focus_ruler;
  d.margin = std::max(16, std::min(128, c.width / 6));
  d.seed = c.scene_seed;
  return make_desk_scene(d, planes);
}

VFMVField generate_variant(const PipelineConfig& c, const std::string& variant) {
  validate_config(c);
  const auto planes = build_planes(c);
  const LayeredScene scene = build_scene(c, planes);
  const CameraIntrinsics k = build_intrinsics(c);

  SynthOptions opt;
  opt.kappa = c.kappa;
  opt.noise_sigma = c.noise_sigma;
  opt.seed = stage_seed(c.seed, 1);

  GridDims dims;
  ArrayGeometry geometry;
  std::vector<int> assignment;
  std::string policy;
  if (variant == "vfmv" || variant == "fixed") {
    dims = {c.rows, c.cols};
    const double step =
        c.baseline >= 0.0 ? c.baseline : c.max_disparity * nearest_layer_depth(scene) / k.fx;
    geometry = {step, step, dims.center()};
    const AssignmentPolicy p =
        variant == "fixed" ? AssignmentPolicy::uniform(c.fixed_plane) : AssignmentPolicy::parse(c.policy);
    assignment = focal_assignment(p, dims, c.num_planes);
    policy = p.name();
  } else if (variant == "pair" || variant == "pair_fixed") {
    dims = {1, 2};
    geometry = {c.pair_baseline, 0.0, {0, 0}};
    const int a = nearest_plane(planes, pair_focus_a(c));
    const int b = variant == "pair" ? nearest_plane(planes, pair_focus_b(c)) : a;
    assignment = {planes[a].index, planes[b].index};
    policy = variant == "pair" ? "pair(" + std::to_string(a) + "," + std::to_string(b) + ")"
                               : AssignmentPolicy::uniform(a).name();
  } else {
    bad_config("planes.variant", "unknown variant '" + variant + "'");
  }

  VFMVField field = generate_vfmv(scene, geometry, k, c.lens, planes, dims, assignment, opt, policy);
  FieldParts parts = disassemble(field);
  parts.metadata.provenance["config_hash"] = config_hash(c);
  parts.metadata.provenance["variant"] = variant;
  parts.metadata.provenance["root_seed"] = c.seed;
  std::vector<double> depths;
  std::vector<std::string> names;
  main_layers(c, scene, depths, names);
  parts.metadata.extra["main_layers"] = json::array();
  for (std::size_t i = 0; i < depths.size(); ++i) {
    parts.metadata.extra["main_layers"].push_back({{"name", names[i]}, {"depth", depths[i]}});
  }
  return quantize_field(assemble_field(std::move(parts)));
}

DetectReport run_detect(const VFMVField& input, const PipelineConfig& c) {
  DetectReport rep;
  VFMVField field = input;
  const bool single = field.dims().count() == 1;
  rep.mode = single ? "per_view" : c.detect_mode;
  if (rep.mode == "field") {
    if (c.register_before_detect && !field.metadata().registered) {
      field = register_field(field, std::nullopt, c.ecc).field;
    }
    const double range = c.max_slope >= 0.0 ? c.max_slope : field.metadata().max_disparity;
    rep.slopes = slope_grid(range, c.num_slopes);
    rep.sets.push_back(detect_field_features(field, c.detector, rep.slopes));
  } else {
    rep.sets.resize(field.dims().count());
    parallel_for(field.dims().count(), [&](int i) {
      const auto& v = field.views()[i];
      rep.sets[i] = detect_features(to_gray(v.pixels), c.detector, FeatureSource{false, v.view});
    }, 1);
  }
  const ColorImage& center = field.view(field.dims().center()).pixels;
  std::vector<std::pair<std::string, FeatureSet>> named;
  for (const auto& s : rep.sets) {
    const std::string name = s.source.field_level
                                 ? std::string("field")
                                 : "view_u" + std::to_string(s.source.view.u) + "_v" +
                                       std::to_string(s.source.view.v);
    named.emplace_back(name, s);
  }
  rep.entries = feature_report(named, center);
  return rep;
}

LayerCounts layer_coverage(const PointCloud& cloud, double true_baseline,
                           const std::vector<double>& layer_depths,
                           const std::vector<std::string>& layer_names, int min_points) {
  LayerCounts out;
  out.names = layer_names;
  const std::size_t n = layer_depths.size();
  out.points.assign(n, 0);
  if (n == 0) return out;
  // Band edges halfway between neighbouring layers in inverse depth; the
  // outer bands extend by the same half-gap.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return layer_depths[a] < layer_depths[b]; });
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / layer_depths[order[i]];
  std::vector<double> hi(n), lo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double up = i > 0 ? (inv[i - 1] - inv[i]) / 2 : (n > 1 ? (inv[0] - inv[1]) / 2 : inv[0] / 2);
    const double down =
        i + 1 < n ? (inv[i] - inv[i + 1]) / 2 : (n > 1 ? (inv[n - 2] - inv[n - 1]) / 2 : inv[0] / 2);
    hi[i] = inv[i] + up;
    lo[i] = std::max(0.0, inv[i] - down);
  }
  for (const auto& p : cloud.points) {
    const double z = p.z() * true_baseline;
    if (!(z > 0)) continue;
    const double iz = 1.0 / z;
    for (std::size_t i = 0; i < n; ++i) {
      if (iz <= hi[i] && iz > lo[i]) {
        ++out.points[order[i]];
        break;
      }
    }
  }
  for (int v : out.points) out.covered += v >= min_points ? 1 : 0;
  return out;
}

ColorImage side_by_side(const std::vector<ColorImage>& images) {
  int w = 0, h = 0;
  for (const auto& im : images) {
    w += im.width();
    h = std::max(h, im.height());
  }
  w += 8 * (static_cast<int>(images.size()) - 1);
  ColorImage out(std::max(w, 1), std::max(h, 1), 3, 1.0f);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height(); ++y) {
      for (int x = 0; x < im.width(); ++x) {
        for (int ch = 0; ch < 3; ++ch) out.at(x0 + x, y, ch) = im.at(x, y, std::min(ch, im.channels() - 1));
      }
    }
    x0 += im.width() + 8;
  }
  return out;
}

CompareReport run_compare(const PipelineConfig& c) {
  validate_config(c);
  CompareReport rep;
  const auto planes = build_planes(c);
  const LayeredScene scene = build_scene(c, planes);
  std::vector<double> depths;
  main_layers(c, scene, depths, rep.layer_names);

  std::vector<ColorImage> feature_overlays;
  for (const std::string variant : {"vfmv", "fixed"}) {
    CompareRow row;
    row.variant = variant;
    PipelineConfig vc = c;
    vc.detect_mode = "field";
    const VFMVField field = generate_variant(vc, variant);
    const DetectReport det = run_detect(field, vc);
    row.features = static_cast<int>(det.sets.front().keypoints.size());
    row.coverage = det.entries.front().coverage;
    feature_overlays.push_back(det.entries.front().overlay);
    rep.rows.push_back(row);
  }

  const CameraIntrinsics k = build_intrinsics(c);
  RansacConfig ransac = c.ransac;
  ransac.seed = stage_seed(c.seed, 3);
  std::vector<ColorImage> cloud_overlays;
  for (const std::string variant : {"pair", "pair_fixed"}) {
    CompareRow row;
    row.variant = variant;
    const VFMVField pair = generate_variant(c, variant);
    const ViewImage& a = pair.view({0, 0});
    ColorImage overlay = a.pixels;
    try {
      const TwoViewResult r = reconstruct_two_view(a, pair.view({0, 1}), k, c.detector, ransac, c.match_ratio);
      row.points = static_cast<int>(r.cloud.points.size());
      const LayerCounts lc = layer_coverage(r.cloud, c.pair_baseline, depths, rep.layer_names);
      row.layers_covered = lc.covered;
      row.layer_points = lc.points;
      double sum = 0.0;
      for (double e : r.cloud.reproj_error) sum += e;
      row.mean_reprojection = r.cloud.points.empty() ? 0.0 : sum / r.cloud.points.size();
      row.rotation_error_deg = rotation_angle_deg(r.pose.rotation);
      row.translation_error_deg = angle_deg(r.pose.translation, Eigen::Vector3d(-1, 0, 0));
      std::vector<Keypoint> kps;
      for (int src : r.cloud.source) {
        Keypoint kp;
        kp.x = r.matches[src].a.x();
        kp.y = r.matches[src].a.y();
        kp.sigma = 2.0;
        kps.push_back(kp);
      }
      overlay = draw_keypoints(a.pixels, kps, {0.1f, 1.0f, 0.2f});
    } catch (const Error& ex) {
      row.points = 0;
      row.layers_covered = 0;
      row.layer_points.assign(depths.size(), 0);
      row.status = to_string(ex.code());
    }
    cloud_overlays.push_back(std::move(overlay));
    rep.rows.push_back(row);
  }
  rep.feature_overlay = side_by_side(feature_overlays);
  rep.cloud_overlay = side_by_side(cloud_overlays);
  return rep;
}

void write_compare_csv(std::ostream& out, const CompareReport& report, const std::string& header) {
  if (!header.empty()) out << header << '\n';
  out << "variant,features,coverage,points,layers_covered";
  for (const auto& n : report.layer_names) out << ",points_" << n;
  out << ",mean_reprojection,rotation_error_deg,translation_error_deg,status\n";
  for (const auto& r : report.rows) {
    out << r.variant << ',' << r.features << ',' << fmt(r.coverage) << ',' << r.points << ','
        << r.layers_covered;
    for (std::size_t i = 0; i < report.layer_names.size(); ++i) {
      out << ',' << (i < r.layer_points.size() ? r.layer_points[i] : -1);
    }
    out << ',' << fmt(r.mean_reprojection) << ',' << fmt(r.rotation_error_deg) << ','
        << fmt(r.translation_error_deg) << ',' << r.status << '\n';
  }
}

std::string provenance_line(const PipelineConfig& config) {
  return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed);
}

}  // namespace vfmv
