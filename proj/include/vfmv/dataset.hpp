#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vfmv/core.hpp"

namespace vfmv {

/// On-disk layout: view_u{u}_v{v}.png (16-bit linear RGB) and manifest.json.
std::string view_filename(ViewIndex i);

nlohmann::json manifest_to_json(const FieldParts& parts);

struct LoadedDataset {
  VFMVField field;
  std::vector<std::string> warnings;  // unknown manifest fields
};

/// Writes views and manifest; pixels are stored on the 16-bit grid (see
/// quantize_field).
void save_dataset(const VFMVField& field, const std::filesystem::path& dir);

/// Strict load: missing required manifest fields and missing/corrupt view
/// files raise InvalidDataset or Io; unknown fields become warnings.
LoadedDataset load_dataset(const std::filesystem::path& dir);

/// Rounds every view to the 16-bit storage grid so that save/load is exact.
VFMVField quantize_field(const VFMVField& field);

}  // namespace vfmv
