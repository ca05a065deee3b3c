#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace manet {

// 8-bit image buffer, row-major, interleaved channels (1 = gray, 3 = RGB).
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  size_t size() const { return static_cast<size_t>(height) * width * channels; }
  uint8_t& at(int r, int c, int ch) {
    return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
  }
  uint8_t at(int r, int c, int ch) const {
    return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
  }
};

// Reads any 8-bit PNG, expanding palette/gray/alpha to the requested layout.
// channels must be 1 or 3; alpha is stripped, palette is resolved to RGB
// first, and RGB->gray uses the integer luma approximation only when forced.
ImageU8 read_png(const std::string& path, int channels);

// Writes gray (1 channel) or RGB (3 channels) at 8 bits. Deterministic:
// fixed compression level, no timestamps or ancillary chunks.
void write_png(const std::string& path, const ImageU8& img);

// Palette-indexed label rasters: the pixel byte is the class index and the
// palette carries the display colors. Reading returns raw indices (1-channel
// buffer) without color expansion; throws if the file is not palette-typed.
ImageU8 read_png_indexed(const std::string& path);
void write_png_indexed(const std::string& path, const ImageU8& img,
                       const std::vector<std::array<uint8_t, 3>>& palette);

}  // namespace manet
