#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "vfmv/dataset.hpp"
#include "vfmv/png_io.hpp"

using namespace vfmv;
using testutil::grid_parts;

namespace {

std::string first_error(FieldParts p) {
  try {
    assemble_field(std::move(p));
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("assemble a full 9x9 field with 34 planes") {
  auto f = assemble_field(grid_parts(9, 9, 12, 8, 34));
  CHECK(f.dims().count() == 81);
  CHECK(f.planes().size() == 34);
  CHECK(f.width() == 12);
  CHECK(f.height() == 8);
  CHECK(validate_field(f).empty());
}

TEST_CASE("1x1 field with one plane is valid") {
  auto f = assemble_field(grid_parts(1, 1, 4, 4, 1));
  CHECK(f.views().size() == 1);
  CHECK(f.plane_of({0, 0}).index == 0);
}

TEST_CASE("missing view is named") {
  auto p = grid_parts(9, 9, 6, 6, 34);
  p.views.pop_back();
  CHECK(first_error(p) == "MissingView(8,8)");
  try {
    assemble_field(p);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingView);
  }
}

TEST_CASE("duplicate view is reported alone") {
  auto p = grid_parts(2, 2, 4, 4, 4);
  p.views.push_back(p.views.front());
  const auto report = validate_field(p);
  REQUIRE(report.size() == 1);
  CHECK(report[0].code == ErrorCode::DuplicateView);
  CHECK(report[0].message == "DuplicateView(0,0)");
}

TEST_CASE("non-increasing plane depths are a PlaneOrderViolation") {
  auto p = grid_parts(2, 2, 4, 4, 4);
  p.planes[2].depth = p.planes[1].depth;
  const auto report = validate_field(p);
  REQUIRE(report.size() == 1);
  CHECK(report[0].code == ErrorCode::PlaneOrderViolation);
}

TEST_CASE("resolution mismatch and dangling plane") {
  auto p = grid_parts(2, 2, 4, 4, 4);
  p.views[3].pixels = ColorImage(5, 4, 3);
  auto report = validate_field(p);
  REQUIRE(report.size() == 1);
  CHECK(report[0].code == ErrorCode::ResolutionMismatch);
  CHECK(report[0].message.rfind("ResolutionMismatch(1,1)", 0) == 0);

  auto q = grid_parts(2, 2, 4, 4, 4);
  q.views[1].plane = 9;
  report = validate_field(q);
  REQUIRE(report.size() == 1);
  CHECK(report[0].code == ErrorCode::DanglingPlaneRef);
  CHECK(report[0].message.find("DanglingPlaneRef(9)") != std::string::npos);
}

TEST_CASE("view outside the grid") {
  auto p = grid_parts(2, 2, 4, 4, 4);
  p.views[0].view = {2, 0};
  const auto report = validate_field(p);
  CHECK(std::any_of(report.begin(), report.end(),
                    [](const Violation& v) { return v.code == ErrorCode::ViewOutOfGrid; }));
}

TEST_CASE("views in any order are stored row-major; round trip") {
  auto p = grid_parts(3, 4, 5, 5, 6);
  auto shuffled = p;
  std::reverse(shuffled.views.begin(), shuffled.views.end());
  auto f = assemble_field(shuffled);
  for (int k = 0; k < 12; ++k) CHECK(f.views()[k] == p.views[k]);
  auto g = assemble_field(disassemble(f));
  CHECK(g.parts() == f.parts());
  // copies share storage
  VFMVField copy = f;
  CHECK(&copy.parts() == &f.parts());
}

TEST_CASE("uniform(0) over 9x9 with 34 planes") {
  const auto m = focal_assignment(AssignmentPolicy::uniform(0), {9, 9}, 34);
  CHECK(m.size() == 81);
  CHECK(std::all_of(m.begin(), m.end(), [](int k) { return k == 0; }));
  CHECK_THROWS_AS(focal_assignment(AssignmentPolicy::uniform(34), {9, 9}, 34), Error);
  try {
    focal_assignment(AssignmentPolicy::uniform(34), {9, 9}, 34);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidPlane);
  }
}

TEST_CASE("raster_cycle on 2x2 and 9x9") {
  CHECK(focal_assignment(AssignmentPolicy::raster_cycle(), {2, 2}, 4) == std::vector<int>{0, 1, 2, 3});
  const auto m = focal_assignment(AssignmentPolicy::raster_cycle(), {9, 9}, 34);
  // enumerate the grid row-major and count through the planes
  int expected = 0;
  for (int u = 0; u < 9; ++u) {
    for (int v = 0; v < 9; ++v) {
      CHECK(m[u * 9 + v] == expected);
      expected = expected + 1 == 34 ? 0 : expected + 1;
    }
  }
  CHECK(m[40] == 6);
  CHECK(m[0] != m[40]);
}

TEST_CASE("raster_cycle is injective when planes outnumber views") {
  const auto m = focal_assignment(AssignmentPolicy::raster_cycle(), {5, 5}, 34);
  CHECK(std::set<int>(m.begin(), m.end()).size() == 25);
}

TEST_CASE("center_out sweeps near to far with distance from center") {
  const GridDims dims{9, 9};
  const auto m = focal_assignment(AssignmentPolicy::center_out(), dims, 34);
  CHECK(m[dims.flat(dims.center())] == 0);
  for (int a = 0; a < 81; ++a) {
    for (int b = 0; b < 81; ++b) {
      auto d = [&](int k) {
        auto i = dims.unflat(k);
        return (i.u - 4) * (i.u - 4) + (i.v - 4) * (i.v - 4);
      };
      if (d(a) < d(b)) CHECK(m[a] <= m[b]);
    }
  }
  CHECK(*std::max_element(m.begin(), m.end()) == 33);
}

TEST_CASE("uniform assignment gives a fixed-focus field") {
  auto p = grid_parts(3, 3, 4, 4, 5);
  const auto m = focal_assignment(AssignmentPolicy::uniform(3), p.dims, 5);
  for (int k = 0; k < 9; ++k) p.views[k].plane = m[k];
  auto f = assemble_field(p);
  int lo = 99, hi = -1;
  for (const auto& v : f.views()) {
    lo = std::min(lo, v.plane);
    hi = std::max(hi, v.plane);
  }
  CHECK(lo == 3);
  CHECK(hi == 3);
}

TEST_CASE("policy names round trip") {
  for (const auto& p : {AssignmentPolicy::raster_cycle(), AssignmentPolicy::center_out(),
                        AssignmentPolicy::uniform(7)}) {
    CHECK(AssignmentPolicy::parse(p.name()) == p);
  }
  CHECK_THROWS_AS(AssignmentPolicy::parse("diagonal"), Error);
}

TEST_CASE("planes are evenly spaced in inverse depth") {
  const auto planes = make_planes(34, 1.0, 4.0);
  CHECK(planes.front().depth == 1.0);
  CHECK(planes.back().depth == 4.0);
  const double step = (1.0 - 0.25) / 33;
  for (int i = 0; i < 34; ++i) {
    CHECK(planes[i].index == i);
    CHECK(1.0 / planes[i].depth == doctest::Approx(1.0 - i * step).epsilon(1e-12));
  }
  CHECK(nearest_plane(planes, 2.0) == 22);
  CHECK(nearest_plane(planes, 100.0) == 33);
}

TEST_CASE("dataset save/load is bit exact") {
  auto p = grid_parts(2, 3, 9, 7, 6);
  p.metadata.provenance = {{"seed", 5}};
  p.metadata.max_disparity = 1.25;
  p.metadata.extra = {{"note", "x"}};
  const auto f = quantize_field(assemble_field(p));
  const auto dir = testutil::temp_dir("core_roundtrip");
  save_dataset(f, dir);
  for (const auto& v : f.views()) CHECK(std::filesystem::exists(dir / view_filename(v.view)));
  CHECK(view_filename({3, 5}) == "view_u3_v5.png");
  const auto loaded = load_dataset(dir);
  CHECK(loaded.warnings.empty());
  CHECK(loaded.field.parts() == f.parts());
  // quantization is idempotent, so a second save is byte-identical too
  save_dataset(loaded.field, dir / "again");
  std::ifstream a(dir / "view_u1_v2.png", std::ios::binary), b(dir / "again" / "view_u1_v2.png", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("dataset loading is strict about required fields, lenient about extras") {
  const auto f = quantize_field(assemble_field(grid_parts(1, 2, 5, 5, 2)));
  const auto dir = testutil::temp_dir("core_strict");
  save_dataset(f, dir);
  nlohmann::json m;
  {
    std::ifstream in(dir / "manifest.json");
    in >> m;
  }
  auto rewrite = [&](const nlohmann::json& j) {
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2);
  };
  auto extra = m;
  extra["camera_vendor"] = "acme";
  rewrite(extra);
  auto loaded = load_dataset(dir);
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("camera_vendor") != std::string::npos);

  auto missing = m;
  missing.erase("intrinsics");
  rewrite(missing);
  try {
    load_dataset(dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDataset);
    CHECK(std::string(e.what()).find("intrinsics") != std::string::npos);
  }

  rewrite(m);
  std::filesystem::remove(dir / "view_u0_v1.png");
  CHECK_THROWS_AS(load_dataset(dir), Error);
  CHECK_THROWS_AS(load_dataset(dir / "nowhere"), Error);
}

TEST_CASE("8-bit files are decoded from sRGB to linear") {
  ColorImage img(4, 1, 3);
  const float lin[4] = {0.0f, 0.05f, 0.214f, 1.0f};
  for (int x = 0; x < 4; ++x)
    for (int c = 0; c < 3; ++c) img.at(x, 0, c) = lin[x];
  const auto dir = testutil::temp_dir("core_srgb");
  write_png8_srgb(dir / "a.png", img);
  const auto back = read_png(dir / "a.png");
  for (int x = 0; x < 4; ++x) {
    // 8-bit sRGB steps are at most ~0.5% of full scale in linear light
    CHECK(std::abs(back.at(x, 0, 1) - lin[x]) < 0.006);
  }
  // 16-bit files hold linear values
  write_png16(dir / "b.png", quantize16(img));
  CHECK(read_png(dir / "b.png") == quantize16(img));
}
