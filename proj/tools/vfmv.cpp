// vfmv: synthetic varifocal multiview experiments from the command line.
//
// Exit status: 0 ok, 2 bad config or arguments, 3 data or I/O error,
// 4 registration did not converge, 5 degenerate geometry.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vfmv/dataset.hpp"
#include "vfmv/parallel.hpp"
#include "vfmv/pipeline.hpp"
#include "vfmv/png_io.hpp"

namespace fs = std::filesystem;
using namespace vfmv;

namespace {

struct Shared {
  std::string config_path;
  std::string profile = "full";
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

ViewIndex parse_view(const std::string& text) {
  int u = 0, v = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> u >> comma >> v) || comma != ',' || !in.eof()) {
    throw Error(ErrorCode::InvalidConfig, "InvalidConfig(views): expected u,v but got '" + text + "'");
  }
  return {u, v};
}

PipelineConfig resolve(const Shared& s) {
  PipelineConfig c = s.profile == "ci" ? ci_profile() : PipelineConfig{};
  if (!s.config_path.empty()) c = load_config(s.config_path, c);
  if (s.seed) c.seed = *s.seed;
  if (s.threads) c.threads = *s.threads;
  return c;
}

fs::path out_dir(const Shared& s, const char* fallback) {
  fs::path p = s.out.empty() ? fs::path(fallback) : fs::path(s.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + p.string() + ": " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return f;
}

void write_config(const fs::path& dir, const PipelineConfig& c) {
  auto f = open_out(dir / "config.json");
  f << config_to_json(c).dump(2) << '\n';
}

void print_warnings(const LoadedDataset& d) {
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
}

std::string set_name(const FeatureSet& s) {
  if (s.source.field_level) return "field";
  return "view_u" + std::to_string(s.source.view.u) + "_v" + std::to_string(s.source.view.v);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic varifocal multiview toolkit"};
  app.require_subcommand(1);
  Shared shared;
  app.add_option("--config", shared.config_path, "JSON config file (flags override it)");
  app.add_option("--profile", shared.profile, "Base profile: full (768x512, 9x9) or ci (256x256, 5x5)")
      ->check(CLI::IsMember({"full", "ci"}));
  app.add_option("--out", shared.out, "Output directory");
  app.add_option("--seed", shared.seed, "Root seed");
  app.add_option("--threads", shared.threads, "Worker threads");

  auto* gen = app.add_subcommand("gen", "Render a synthetic dataset");
  gen->fallthrough();
  std::optional<std::string> variant;
  std::optional<int> plane, views, width, height, planes;
  gen->add_option("--variant", variant, "vfmv, fixed, pair or pair_fixed");
  gen->add_option("--plane", plane, "Focal plane of the fixed-focus variant");
  gen->add_option("--views", views, "Number of views (one row); 2 for pairs");
  gen->add_option("--width", width);
  gen->add_option("--height", height);
  gen->add_option("--planes", planes, "Number of focal planes");

  auto* reg = app.add_subcommand("register", "Align every view to the reference view");
  reg->fallthrough();
  std::string in_dir;
  std::optional<std::string> reference, warp_model;
  std::optional<int> levels, max_iterations;
  std::optional<double> epsilon;
  bool force = false;
  reg->add_option("--in", in_dir, "Dataset directory")->required();
  reg->add_option("--reference", reference, "Reference view u,v (default: center)");
  reg->add_option("--warp-model", warp_model, "translation, affine or homography");
  reg->add_option("--levels", levels, "Pyramid levels");
  reg->add_option("--max-iterations", max_iterations, "Per level");
  reg->add_option("--epsilon", epsilon, "Update-norm and ecc-gain tolerance");
  reg->add_flag("--force", force, "Estimate again on an already registered dataset");

  auto* det = app.add_subcommand("detect", "Detect features per view or on the whole field");
  det->fallthrough();
  std::optional<std::string> mode;
  std::optional<int> slopes;
  std::optional<double> max_slope;
  bool skip_registration = false;
  det->add_option("--in", in_dir, "Dataset directory")->required();
  det->add_option("--mode", mode, "field or per_view")->check(CLI::IsMember({"field", "per_view"}));
  det->add_option("--slopes", slopes, "Number of refocus slopes");
  det->add_option("--max-slope", max_slope, "Slope half-range in px per view step");
  det->add_flag("--skip-registration", skip_registration, "Detect on unregistered views");

  auto* rec = app.add_subcommand("reconstruct", "Two-view structure from motion");
  rec->fallthrough();
  std::vector<std::string> pair_views;
  bool self_calibrate = false;
  std::optional<double> threshold;
  rec->add_option("--in", in_dir, "Dataset directory")->required();
  rec->add_option("--views", pair_views, "Two grid views, e.g. --views 0,0 0,1")->expected(2);
  rec->add_flag("--self-calibrate", self_calibrate, "Ignore stored intrinsics and sweep the focal length");
  rec->add_option("--threshold", threshold, "RANSAC Sampson threshold in px");

  auto* cmp = app.add_subcommand("compare", "VFMV against fixed-focus multiview on the same scene");
  cmp->fallthrough();

  auto* info = app.add_subcommand("info", "Describe a dataset, or print the effective config");
  info->fallthrough();
  std::string info_dir;
  info->add_option("--in", info_dir, "Dataset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig c = resolve(shared);
    if (variant) c.variant = *variant;
    if (plane) c.fixed_plane = *plane;
    if (width) c.width = *width;
    if (height) c.height = *height;
    if (planes) c.num_planes = *planes;
    if (warp_model) {
      c.ecc = config_from_json({{"ecc", {{"warp_model", *warp_model}}}}, c).ecc;
    }
    if (levels) c.ecc.pyramid_levels = *levels;
    if (max_iterations) c.ecc.max_iterations = *max_iterations;
    if (epsilon) c.ecc.epsilon = *epsilon;
    if (mode) c.detect_mode = *mode;
    if (slopes) c.num_slopes = *slopes;
    if (max_slope) c.max_slope = *max_slope;
    if (skip_registration) c.register_before_detect = false;
    if (!pair_views.empty()) c.pair_views = {parse_view(pair_views[0]), parse_view(pair_views[1])};
    if (self_calibrate) c.self_calibrate = true;
    if (threshold) c.ransac.threshold = *threshold;
    if (views) {
      const bool pair = c.variant == "pair" || c.variant == "pair_fixed";
      if (pair && *views != 2) {
        throw Error(ErrorCode::InvalidConfig, "InvalidConfig(views): pair variants have exactly 2 views");
      }
      if (*views < 1) throw Error(ErrorCode::InvalidConfig, "InvalidConfig(views): must be >= 1");
      if (!pair) {
        c.rows = 1;
        c.cols = *views;
      }
    }
    validate_config(c);
    default_threads() = c.threads;
    const std::string prov = provenance_line(c);

    if (gen->parsed()) {
      const fs::path dir = out_dir(shared, "dataset");
      const VFMVField field = generate_variant(c, c.variant);
      save_dataset(field, dir);
      write_config(dir, c);
      std::cout << "wrote " << field.dims().rows << "x" << field.dims().cols << " " << c.variant
                << " dataset (" << field.width() << "x" << field.height() << ", "
                << field.planes().size() << " planes) to " << dir.string() << '\n';
      return 0;
    }

    if (reg->parsed()) {
      const LoadedDataset d = load_dataset(in_dir);
      print_warnings(d);
      std::optional<ViewIndex> ref;
      if (reference) ref = parse_view(*reference);
      RegisteredField r{d.field, {}};
      if (d.field.metadata().registered && !force) {
        // Registered views already live in the reference frame; report the
        // stored warps instead of estimating new ones.
        std::cerr << "dataset is already registered; pass --force to estimate again\n";
        const auto& hs = d.field.metadata().view_homographies;
        const GrayImage templ = to_gray(d.field.view(ref.value_or(d.field.dims().center())).pixels);
        for (int i = 0; i < d.field.dims().count(); ++i) {
          RegistrationResult res;
          if (i < static_cast<int>(hs.size())) {
            res.homography = Homography(Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(hs[i].data()));
          }
          res.ecc = ecc_score(templ, to_gray(d.field.views()[i].pixels));
          res.converged = true;
          r.results.push_back(res);
        }
      } else {
        r = register_field(d.field, ref, c.ecc);
      }
      const fs::path dir = out_dir(shared, "registered");
      save_dataset(r.field, dir);
      auto csv = open_out(dir / "registration.csv");
      csv << prov << '\n';
      write_registration_csv(csv, r.field, r.results);
      int failed = 0;
      for (std::size_t i = 0; i < r.results.size(); ++i) {
        if (!r.results[i].converged) {
          const auto& v = r.field.views()[i].view;
          std::cerr << "NotConverged(" << v.u << "," << v.v << ")\n";
          ++failed;
        }
      }
      std::cout << "registered " << r.results.size() << " views, " << failed << " not converged\n";
      return failed > 0 ? 4 : 0;
    }

    if (det->parsed()) {
      const LoadedDataset d = load_dataset(in_dir);
      print_warnings(d);
      const DetectReport rep = run_detect(d.field, c);
      const fs::path dir = out_dir(shared, "features");
      auto csv = open_out(dir / "detect.csv");
      csv << prov << '\n' << "mode,set,count,coverage\n";
      for (std::size_t i = 0; i < rep.sets.size(); ++i) {
        const std::string name = set_name(rep.sets[i]);
        auto f = open_out(dir / (name + ".features"));
        write_feature_set(f, rep.sets[i]);
        csv << rep.mode << ',' << name << ',' << rep.entries[i].count << ','
            << fmt(rep.entries[i].coverage) << '\n';
      }
      // The overlay shows the field-level set, or the center view's own set.
      std::size_t shown = 0;
      if (rep.sets.size() > 1) shown = d.field.dims().flat(d.field.dims().center());
      write_png8_srgb(dir / "overlay.png", rep.entries[shown].overlay);
      int total = 0;
      for (const auto& e : rep.entries) total += e.count;
      std::cout << rep.mode << ": " << total << " keypoints in " << rep.sets.size() << " set(s)\n";
      return 0;
    }

    if (rec->parsed()) {
      const LoadedDataset d = load_dataset(in_dir);
      print_warnings(d);
      const auto& field = d.field;
      for (const auto& v : c.pair_views) {
        if (!field.dims().contains(v)) {
          throw Error(ErrorCode::ViewOutOfGrid,
                      "ViewOutOfGrid(" + std::to_string(v.u) + "," + std::to_string(v.v) + ")");
        }
      }
      const ViewImage& a = field.view(c.pair_views[0]);
      const ViewImage& b = field.view(c.pair_views[1]);
      RansacConfig ransac = c.ransac;
      ransac.seed = stage_seed(c.seed, 3);
      CameraIntrinsics k = field.intrinsics();
      std::string extra;
      if (c.self_calibrate) {
        const FeatureSet fa = detect_features(to_gray(a.pixels), c.detector);
        const FeatureSet fb = detect_features(to_gray(b.pixels), c.detector);
        std::vector<PointMatch> matches;
        for (const auto& [i, j] : match_features(fa, fb, c.match_ratio)) {
          matches.push_back({{fa.keypoints[i].x, fa.keypoints[i].y}, {fb.keypoints[j].x, fb.keypoints[j].y}});
        }
        std::vector<double> focals;
        const double f0 = std::max(field.width(), field.height());
        for (int i = 0; i <= 16; ++i) focals.push_back(f0 * std::pow(2.0, -1.0 + i * 0.25));
        const FocalSweep sweep = self_calibrate_focal(matches, field.width(), field.height(), ransac, focals);
        k = {sweep.focal, sweep.focal, (field.width() - 1) / 2.0, (field.height() - 1) / 2.0, 0.0};
        extra = "self_calibrated_focal " + fmt(sweep.focal);
      }
      const fs::path dir = out_dir(shared, "reconstruction");
      const TwoViewResult r = reconstruct_two_view(a, b, k, c.detector, ransac, c.match_ratio);
      auto ply = open_out(dir / "cloud.ply");
      write_ply(ply, r.cloud, r.pose, ransac.seed,
                "config_hash " + config_hash(c) + (extra.empty() ? "" : " " + extra));
      auto csv = open_out(dir / "diagnostics.csv");
      csv << prov << '\n';
      write_diagnostics_csv(csv, r.diagnostics);
      std::cout << r.cloud.points.size() << " points from " << r.matches.size() << " matches\n";
      return 0;
    }

    if (cmp->parsed()) {
      const fs::path dir = out_dir(shared, "compare");
      const CompareReport rep = run_compare(c);
      auto csv = open_out(dir / "compare.csv");
      write_compare_csv(csv, rep, prov);
      write_png8_srgb(dir / "features_vfmv_vs_fixed.png", rep.feature_overlay);
      write_png8_srgb(dir / "points_vfmv_vs_fixed.png", rep.cloud_overlay);
      write_config(dir, c);
      write_compare_csv(std::cout, rep, "");
      return 0;
    }

    if (info->parsed()) {
      if (info_dir.empty()) {
        std::cout << config_to_json(c).dump(2) << "\nconfig_hash " << config_hash(c) << '\n';
        return 0;
      }
      const LoadedDataset d = load_dataset(info_dir);
      print_warnings(d);
      const auto& f = d.field;
      const auto& k = f.intrinsics();
      const auto& g = f.geometry();
      std::cout << "grid        " << f.dims().rows << "x" << f.dims().cols << '\n'
                << "resolution  " << f.width() << "x" << f.height() << '\n'
                << "planes      " << f.planes().size() << " (" << fmt(f.planes().front().depth) << " .. "
                << fmt(f.planes().back().depth) << ")\n"
                << "policy      " << f.metadata().policy << '\n'
                << "registered  " << (f.metadata().registered ? "yes" : "no") << '\n'
                << "intrinsics  fx=" << fmt(k.fx) << " fy=" << fmt(k.fy) << " cx=" << fmt(k.cx)
                << " cy=" << fmt(k.cy) << '\n'
                << "baseline    " << fmt(g.baseline_x) << " x " << fmt(g.baseline_y) << ", reference ("
                << g.reference.u << "," << g.reference.v << ")\n"
                << "disparity   " << fmt(f.metadata().max_disparity) << " px per view step\n"
                << "provenance  " << f.metadata().provenance.dump() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
