#include "vfmv/dataset.hpp"

#include <fstream>
#include <set>

#include "vfmv/png_io.hpp"

namespace vfmv {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "format",   "version",  "grid_dims",     "width",        "height",
      "planes",   "assignment", "policy",      "intrinsics",   "geometry",
      "registered", "homographies", "max_disparity", "provenance", "extra"};
  return keys;
}

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::InvalidDataset, std::string("manifest is missing required field '") +
                                               key + "'");
  }
  return j.at(key);
}

}  // namespace

std::string view_filename(ViewIndex i) {
  return "view_u" + std::to_string(i.u) + "_v" + std::to_string(i.v) + ".png";
}

nlohmann::json manifest_to_json(const FieldParts& parts) {
  json m;
  m["format"] = "vfmv-dataset";
  m["version"] = 1;
  m["grid_dims"] = {parts.dims.rows, parts.dims.cols};
  if (!parts.views.empty()) {
    m["width"] = parts.views.front().width();
    m["height"] = parts.views.front().height();
  }
  json planes = json::array();
  for (const auto& p : parts.planes) planes.push_back({{"index", p.index}, {"depth", p.depth}});
  m["planes"] = planes;
  json assignment = json::array();
  for (const auto& v : parts.views) assignment.push_back({v.view.u, v.view.v, v.plane});
  m["assignment"] = assignment;
  m["policy"] = parts.metadata.policy;
  const auto& k = parts.intrinsics;
  m["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"skew", k.skew}};
  const auto& g = parts.geometry;
  m["geometry"] = {{"baseline_x", g.baseline_x},
                   {"baseline_y", g.baseline_y},
                   {"reference", {g.reference.u, g.reference.v}}};
  m["registered"] = parts.metadata.registered;
  if (!parts.metadata.view_homographies.empty()) {
    json hs = json::array();
    for (const auto& h : parts.metadata.view_homographies) hs.push_back(h);
    m["homographies"] = hs;
  }
  m["max_disparity"] = parts.metadata.max_disparity;
  m["provenance"] = parts.metadata.provenance;
  m["extra"] = parts.metadata.extra;
  return m;
}

void save_dataset(const VFMVField& field, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& v : field.views()) write_png16(dir / view_filename(v.view), v.pixels);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write manifest in '" + dir.string() + "'");
  out << manifest_to_json(field.parts()).dump(2) << '\n';
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::Io, "no manifest.json in '" + dir.string() + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidDataset, std::string("manifest parse error: ") + e.what());
  }

  LoadedDataset result;
  for (const auto& [key, value] : m.items()) {
    if (!known_keys().contains(key)) result.warnings.push_back("unknown manifest field '" + key + "'");
  }

  FieldParts parts;
  try {
    const auto& dims = require(m, "grid_dims");
    parts.dims = {dims.at(0).get<int>(), dims.at(1).get<int>()};
    for (const auto& p : require(m, "planes")) {
      parts.planes.push_back({p.at("index").get<int>(), p.at("depth").get<double>()});
    }
    const auto& k = require(m, "intrinsics");
    parts.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                        k.at("cx").get<double>(), k.at("cy").get<double>(),
                        k.value("skew", 0.0)};
    const auto& g = require(m, "geometry");
    parts.geometry = {g.at("baseline_x").get<double>(), g.at("baseline_y").get<double>(),
                      {g.at("reference").at(0).get<int>(), g.at("reference").at(1).get<int>()}};
    parts.metadata.policy = require(m, "policy").get<std::string>();
    parts.metadata.registered = m.value("registered", false);
    if (m.contains("homographies")) {
      for (const auto& h : m.at("homographies")) {
        parts.metadata.view_homographies.push_back(h.get<std::array<double, 9>>());
      }
    }
    parts.metadata.max_disparity = m.value("max_disparity", 0.0);
    if (m.contains("provenance")) parts.metadata.provenance = m.at("provenance");
    if (m.contains("extra")) parts.metadata.extra = m.at("extra");

    for (const auto& a : require(m, "assignment")) {
      ViewImage v;
      v.view = {a.at(0).get<int>(), a.at(1).get<int>()};
      v.plane = a.at(2).get<int>();
      const auto path = dir / view_filename(v.view);
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::InvalidDataset, "missing view file " + path.filename().string());
      }
      v.pixels = read_png(path);
      parts.views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidDataset, std::string("malformed manifest: ") + e.what());
  }
  result.field = assemble_field(std::move(parts));
  return result;
}

VFMVField quantize_field(const VFMVField& field) {
  FieldParts parts = disassemble(field);
  for (auto& v : parts.views) v.pixels = quantize16(v.pixels);
  return assemble_field(std::move(parts));
}

}  // namespace vfmv
