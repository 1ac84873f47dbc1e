#pragma once

#include <filesystem>

#include "vfmv/image.hpp"

namespace vfmv {

/// Reads an 8- or 16-bit gray/RGB/RGBA PNG as linear RGB in [0, 1]. 8-bit
/// files are treated as sRGB-encoded, 16-bit files as linear.
ColorImage read_png(const std::filesystem::path& path);

/// Writes 16-bit linear RGB. Values are clamped to [0, 1] and rounded to the
/// nearest 1/65535 step, so read_png(write_png16(img)) is exact for images
/// already on that grid.
void write_png16(const std::filesystem::path& path, const ColorImage& image);

/// Writes 8-bit sRGB for human inspection (overlays, thumbnails).
void write_png8_srgb(const std::filesystem::path& path, const ColorImage& image);

/// Rounds every sample to the 16-bit storage grid.
ColorImage quantize16(const ColorImage& image);

}  // namespace vfmv
