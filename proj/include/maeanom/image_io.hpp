#pragma once

#include "maeanom/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace maeanom {

/// Grayscale raster with its stored integer sample values (not normalized).
struct RawImage {
    Matrix values;
    int bit_depth = 8;
};

/// Reads an 8- or 16-bit grayscale PNG (palette/RGB inputs are converted to
/// gray by libpng). Throws IoError / FormatError.
RawImage read_png_gray(const std::filesystem::path& path);

/// Writes integer sample values at the given bit depth (8 or 16).
void write_png_gray(const std::filesystem::path& path, const Matrix& values, int bit_depth);

/// Writes a [0, 1] image as 16-bit gray (values clamped, scaled by 65535).
void write_png_unit(const std::filesystem::path& path, const Image& image);

/// 8-bit RGB, row-major, 3 bytes per pixel.
void write_png_rgb(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

/// PNG bytes for embedding (same encoder as write_png_rgb).
std::vector<std::uint8_t> encode_png_rgb(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace maeanom
