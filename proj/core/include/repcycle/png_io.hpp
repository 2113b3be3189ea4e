#pragma once

#include <filesystem>

#include "repcycle/raster.hpp"

namespace repcycle::io {

// 8-bit RGB; values are clamped to [0, 1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const RgbImage& image);
// 8-bit gray; values are written verbatim (labels, or masks scaled by the caller).
void write_png_gray(const std::filesystem::path& path, const Raster<std::uint8_t>& image);

RgbImage read_png_rgb(const std::filesystem::path& path);
Raster<std::uint8_t> read_png_gray(const std::filesystem::path& path);

}  // namespace repcycle::io
