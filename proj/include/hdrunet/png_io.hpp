#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hdrunet {

/// Interleaved RGB samples, row-major; 8-bit images keep values in [0, 255].
struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(std::size_t y, std::size_t x, std::size_t c) const { return samples[(y * width + x) * 3 + c]; }
  double max_value() const { return bit_depth == 16 ? 65535.0 : 255.0; }
};

/// Gray, palette and alpha inputs are converted to RGB; depths below 8 are
/// expanded to 8. Throws IoError (cannot open), FormatError (not a valid PNG).
PngImage load_png(const std::filesystem::path& path);

/// Writes RGB without alpha. Throws UnsupportedDepthError unless depth is 8 or
/// 16, ShapeError on sample count mismatch, IoError on write failure.
void save_png(const std::filesystem::path& path, const PngImage& image);

}  // namespace hdrunet
