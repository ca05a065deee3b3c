#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "manet/png_io.hpp"
#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Fixed six-class urban taxonomy; the last class (Clutter) is background and
// excluded from mF1/mIoU. Colors follow the usual remote-sensing convention.
inline constexpr int kNumClasses = 6;
inline constexpr int kForegroundClasses = 5;

const std::array<std::string, kNumClasses>& class_names();
const std::vector<std::array<uint8_t, 3>>& class_palette();

// One georeferenced patch held in memory, already normalized for the model:
// optical in [0,1], dsm min-max scaled per patch, labels as class indices.
struct MultimodalPatch {
  std::string id;
  int height = 0, width = 0;
  Tensor optical;               // [3, H, W]
  Tensor dsm;                   // [1, H, W]
  std::vector<int> labels;      // H*W class indices
};

// Reads <dir>/{optical.png, dsm.raw, dsm.hdr, labels.png}. Errors carry the
// offending path. A constant dsm (hdr min == max) normalizes to zeros.
MultimodalPatch load_patch(const std::string& dir);

// Raw (unnormalized) patch content, the form the generator produces and the
// loader parses back.
struct RawPatch {
  ImageU8 optical;              // 3-channel
  std::vector<float> dsm;       // H*W raw elevations
  ImageU8 labels;               // 1-channel indices
};
void save_patch(const std::string& dir, const RawPatch& raw);

struct TileIndex {
  int row = 0, col = 0;         // top-left offset in the source patch
  int window = 0;
  int stride = 0;
};

// Row-major tiling; the last row/column shifts back onto the boundary so
// every pixel is covered without padding. Throws if the window exceeds the
// extent or the stride is < 1.
std::vector<TileIndex> slide_windows(int height, int width, int window, int stride);

// One training/eval sample cropped out of a patch.
struct Sample {
  Tensor optical;               // [3, w, w]
  Tensor dsm;                   // [1, w, w]
  std::vector<int> labels;      // w*w
};
Sample crop_sample(const MultimodalPatch& patch, const TileIndex& tile);

// Per-pixel arithmetic mean of class probabilities over all covering tiles,
// renormalized so every pixel's class distribution sums to 1. Throws if any
// pixel is uncovered.
Tensor stitch_average(const std::vector<std::pair<TileIndex, Tensor>>& tiles, int classes,
                      int height, int width);

// Square-tile augmentation: k quarter-turns clockwise, then an optional
// horizontal flip, applied identically to all three rasters.
Sample augment_sample(const Sample& s, int rot_quarters, bool hflip);
Sample augment_random(const Sample& s, RandomSource& rng);

// Procedural dataset with the directory layout of load_patch. The optical
// texture of "Building" regions is indistinguishable from the impervious
// background; only the elevation channel separates them, so multimodal models
// have headroom a single-modality model cannot reach.
void synth_generate(const std::string& root, int n_train, int n_test, uint64_t seed,
                    int patch_size = 128);

// Sorted list of patch directories under <root>/<split>.
std::vector<std::string> list_patch_dirs(const std::string& root, const std::string& split);

}  // namespace manet
