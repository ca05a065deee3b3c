#include "manet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace manet {

const std::array<std::string, kNumClasses>& class_names() {
  static const std::array<std::string, kNumClasses> kNames = {
      "Building", "Tree", "LowVegetation", "Car", "ImperviousSurface", "Clutter"};
  return kNames;
}

const std::vector<std::array<uint8_t, 3>>& class_palette() {
  static const std::vector<std::array<uint8_t, 3>> kColors = {
      {0, 0, 255},      // Building
      {0, 255, 0},      // Tree
      {0, 255, 255},    // LowVegetation
      {255, 255, 0},    // Car
      {255, 255, 255},  // ImperviousSurface
      {255, 0, 0},      // Clutter
  };
  return kColors;
}

namespace {

struct DsmHeader {
  int height = 0, width = 0;
  float min = 0.0f, max = 0.0f;
};

DsmHeader read_dsm_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_patch: cannot open " + path);
  DsmHeader h;
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("load_patch: " + path + ": missing " + what + " line");
    }
    return line;
  };
  try {
    h.height = std::stoi(next("height"));
    h.width = std::stoi(next("width"));
    h.min = std::stof(next("min"));
    h.max = std::stof(next("max"));
  } catch (const std::logic_error&) {
    throw std::runtime_error("load_patch: " + path + ": malformed header value");
  }
  if (h.height <= 0 || h.width <= 0) {
    throw std::runtime_error("load_patch: " + path + ": non-positive extent");
  }
  return h;
}

std::vector<float> read_dsm_raw(const std::string& path, size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_patch: cannot open " + path);
  std::vector<float> v(count);
  static_assert(sizeof(float) == 4);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<size_t>(in.gcount()) != count * 4) {
    throw std::runtime_error("load_patch: " + path + ": truncated raster");
  }
  return v;
}

}  // namespace

MultimodalPatch load_patch(const std::string& dir) {
  const std::string optical_path = dir + "/optical.png";
  const std::string hdr_path = dir + "/dsm.hdr";
  const std::string raw_path = dir + "/dsm.raw";
  const std::string label_path = dir + "/labels.png";

  ImageU8 optical = read_png(optical_path, 3);
  DsmHeader hdr = read_dsm_header(hdr_path);
  if (hdr.height != optical.height || hdr.width != optical.width) {
    throw std::runtime_error("load_patch: extent mismatch between " + optical_path + " and " +
                             hdr_path);
  }
  std::vector<float> raw =
      read_dsm_raw(raw_path, static_cast<size_t>(hdr.height) * hdr.width);
  ImageU8 labels = read_png_indexed(label_path);
  if (labels.height != optical.height || labels.width != optical.width) {
    throw std::runtime_error("load_patch: extent mismatch between " + optical_path + " and " +
                             label_path);
  }

  MultimodalPatch p;
  p.id = fs::path(dir).filename().string();
  p.height = optical.height;
  p.width = optical.width;

  size_t plane = static_cast<size_t>(p.height) * p.width;
  std::vector<float> opt(3 * plane);
  for (size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      opt[ch * plane + i] = optical.pixels[i * 3 + ch] / 255.0f;
    }
  }
  p.optical = Tensor({3, p.height, p.width}, std::move(opt));

  std::vector<float> dsm(plane, 0.0f);
  float range = hdr.max - hdr.min;
  if (range > 0.0f) {
    for (size_t i = 0; i < plane; ++i) dsm[i] = (raw[i] - hdr.min) / range;
  }
  p.dsm = Tensor({1, p.height, p.width}, std::move(dsm));

  p.labels.resize(plane);
  for (size_t i = 0; i < plane; ++i) {
    int v = labels.pixels[i];
    if (v >= kNumClasses) {
      throw std::runtime_error("load_patch: " + label_path + ": label " + std::to_string(v) +
                               " out of range");
    }
    p.labels[i] = v;
  }
  return p;
}

void save_patch(const std::string& dir, const RawPatch& raw) {
  if (raw.optical.channels != 3 || raw.labels.channels != 1 ||
      raw.optical.height != raw.labels.height || raw.optical.width != raw.labels.width ||
      raw.dsm.size() != static_cast<size_t>(raw.optical.height) * raw.optical.width) {
    throw std::invalid_argument("save_patch: inconsistent rasters");
  }
  fs::create_directories(dir);
  write_png(dir + "/optical.png", raw.optical);
  write_png_indexed(dir + "/labels.png", raw.labels, class_palette());

  float lo = raw.dsm[0], hi = raw.dsm[0];
  for (float v : raw.dsm) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  {
    std::ofstream hdr(dir + "/dsm.hdr");
    if (!hdr) throw std::runtime_error("save_patch: cannot write " + dir + "/dsm.hdr");
    char buf[64];
    hdr << raw.optical.height << "\n" << raw.optical.width << "\n";
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(lo));
    hdr << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(hi));
    hdr << buf << "\n";
  }
  std::ofstream bin(dir + "/dsm.raw", std::ios::binary);
  if (!bin) throw std::runtime_error("save_patch: cannot write " + dir + "/dsm.raw");
  bin.write(reinterpret_cast<const char*>(raw.dsm.data()),
            static_cast<std::streamsize>(raw.dsm.size() * 4));
}

std::vector<TileIndex> slide_windows(int height, int width, int window, int stride) {
  if (window < 1 || window > height || window > width) {
    throw std::invalid_argument("slide_windows: window " + std::to_string(window) +
                                " does not fit extent " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  if (stride < 1) throw std::invalid_argument("slide_windows: stride must be >= 1");

  auto axis_offsets = [&](int extent) {
    std::vector<int> offs;
    for (int r = 0;; r += stride) {
      if (r + window >= extent) {
        offs.push_back(extent - window);  // clamp the last window onto the boundary
        break;
      }
      offs.push_back(r);
    }
    return offs;
  };
  std::vector<TileIndex> tiles;
  for (int r : axis_offsets(height)) {
    for (int c : axis_offsets(width)) {
      tiles.push_back({r, c, window, stride});
    }
  }
  return tiles;
}

Sample crop_sample(const MultimodalPatch& patch, const TileIndex& tile) {
  int w = tile.window;
  if (tile.row < 0 || tile.col < 0 || tile.row + w > patch.height ||
      tile.col + w > patch.width) {
    throw std::invalid_argument("crop_sample: tile outside patch extent");
  }
  auto crop_planes = [&](const Tensor& t, int channels) {
    std::vector<float> out(static_cast<size_t>(channels) * w * w);
    size_t plane = static_cast<size_t>(patch.height) * patch.width;
    for (int ch = 0; ch < channels; ++ch) {
      for (int r = 0; r < w; ++r) {
        const float* src =
            t.ptr() + ch * plane + static_cast<size_t>(tile.row + r) * patch.width + tile.col;
        std::copy(src, src + w, out.data() + (static_cast<size_t>(ch) * w + r) * w);
      }
    }
    return Tensor({channels, w, w}, std::move(out));
  };
  Sample s;
  s.optical = crop_planes(patch.optical, 3);
  s.dsm = crop_planes(patch.dsm, 1);
  s.labels.resize(static_cast<size_t>(w) * w);
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < w; ++c) {
      s.labels[static_cast<size_t>(r) * w + c] =
          patch.labels[static_cast<size_t>(tile.row + r) * patch.width + tile.col + c];
    }
  }
  return s;
}

Tensor stitch_average(const std::vector<std::pair<TileIndex, Tensor>>& tiles, int classes,
                      int height, int width) {
  size_t plane = static_cast<size_t>(height) * width;
  std::vector<double> acc(static_cast<size_t>(classes) * plane, 0.0);
  std::vector<int> cover(plane, 0);

  for (const auto& [tile, probs] : tiles) {
    int w = tile.window;
    if (probs.shape() != std::vector<int>{classes, w, w}) {
      throw std::invalid_argument("stitch_average: tile tensor shape mismatch");
    }
    if (tile.row < 0 || tile.col < 0 || tile.row + w > height || tile.col + w > width) {
      throw std::invalid_argument("stitch_average: tile outside extent");
    }
    for (int k = 0; k < classes; ++k) {
      for (int r = 0; r < w; ++r) {
        const float* src = probs.ptr() + (static_cast<size_t>(k) * w + r) * w;
        double* dst = acc.data() + k * plane + static_cast<size_t>(tile.row + r) * width + tile.col;
        for (int c = 0; c < w; ++c) dst[c] += src[c];
      }
    }
    for (int r = 0; r < w; ++r) {
      int* dst = cover.data() + static_cast<size_t>(tile.row + r) * width + tile.col;
      for (int c = 0; c < w; ++c) dst[c] += 1;
    }
  }

  std::vector<float> out(static_cast<size_t>(classes) * plane);
  for (size_t i = 0; i < plane; ++i) {
    if (cover[i] == 0) {
      throw std::runtime_error("stitch_average: pixel " + std::to_string(i) +
                               " not covered by any tile");
    }
    double total = 0.0;
    for (int k = 0; k < classes; ++k) total += acc[k * plane + i] / cover[i];
    if (!(total > 0.0)) {
      throw std::runtime_error("stitch_average: degenerate class distribution");
    }
    for (int k = 0; k < classes; ++k) {
      out[k * plane + i] = static_cast<float>(acc[k * plane + i] / cover[i] / total);
    }
  }
  return Tensor({classes, height, width}, std::move(out));
}

namespace {

// One clockwise quarter turn of a square multi-channel raster.
template <typename T>
std::vector<T> rot90_cw(const std::vector<T>& in, int channels, int n) {
  std::vector<T> out(in.size());
  size_t plane = static_cast<size_t>(n) * n;
  for (int ch = 0; ch < channels; ++ch) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        out[ch * plane + static_cast<size_t>(r) * n + c] =
            in[ch * plane + static_cast<size_t>(n - 1 - c) * n + r];
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> hflip(const std::vector<T>& in, int channels, int n) {
  std::vector<T> out(in.size());
  size_t plane = static_cast<size_t>(n) * n;
  for (int ch = 0; ch < channels; ++ch) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        out[ch * plane + static_cast<size_t>(r) * n + c] =
            in[ch * plane + static_cast<size_t>(r) * n + (n - 1 - c)];
      }
    }
  }
  return out;
}

}  // namespace

Sample augment_sample(const Sample& s, int rot_quarters, bool flip) {
  int n = s.optical.shape()[1];
  if (s.optical.shape()[2] != n) {
    throw std::invalid_argument("augment_sample: tiles must be square");
  }
  std::vector<float> opt(s.optical.ptr(), s.optical.ptr() + s.optical.numel());
  std::vector<float> dsm(s.dsm.ptr(), s.dsm.ptr() + s.dsm.numel());
  std::vector<int> lab = s.labels;
  for (int k = 0; k < ((rot_quarters % 4) + 4) % 4; ++k) {
    opt = rot90_cw(opt, 3, n);
    dsm = rot90_cw(dsm, 1, n);
    lab = rot90_cw(lab, 1, n);
  }
  if (flip) {
    opt = hflip(opt, 3, n);
    dsm = hflip(dsm, 1, n);
    lab = hflip(lab, 1, n);
  }
  Sample out;
  out.optical = Tensor({3, n, n}, std::move(opt));
  out.dsm = Tensor({1, n, n}, std::move(dsm));
  out.labels = std::move(lab);
  return out;
}

Sample augment_random(const Sample& s, RandomSource& rng) {
  int k = static_cast<int>(rng.uniform_int(4));
  bool flip = rng.uniform_int(2) == 1;
  return augment_sample(s, k, flip);
}

namespace {

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
}

class PatchPainter {
 public:
  PatchPainter(int n, RandomSource& rng) : n_(n), rng_(rng) {
    raw_.optical = {n, n, 3, std::vector<uint8_t>(static_cast<size_t>(n) * n * 3)};
    raw_.labels = {n, n, 1, std::vector<uint8_t>(static_cast<size_t>(n) * n)};
    raw_.dsm.assign(static_cast<size_t>(n) * n, 0.0f);
    paint_background();
  }

  RawPatch take() { return std::move(raw_); }

  // Impervious ground: mid-gray speckle, unit elevation. Building regions
  // reuse this exact texture so nothing in the optical bands marks them.
  void paint_background() {
    for (int r = 0; r < n_; ++r) {
      for (int c = 0; c < n_; ++c) {
        uint8_t g = clamp_u8(140.0 + rng_.uniform(-12.0, 12.0));
        set_optical(r, c, g, g, g);
        set_cell(r, c, 4, 1.0f + static_cast<float>(rng_.uniform(-0.05, 0.05)));
      }
    }
  }

  void paint_low_vegetation() {
    int count = 2 + static_cast<int>(rng_.uniform_int(3));
    for (int i = 0; i < count; ++i) {
      auto [r0, c0, h, w] = random_rect(16, 30);
      for (int r = r0; r < r0 + h; ++r) {
        for (int c = c0; c < c0 + w; ++c) {
          set_optical(r, c, clamp_u8(60 + rng_.uniform(-10, 10)),
                      clamp_u8(190 + rng_.uniform(-10, 10)),
                      clamp_u8(60 + rng_.uniform(-10, 10)));
          set_cell(r, c, 2, 1.2f + static_cast<float>(rng_.uniform(-0.05, 0.05)));
        }
      }
    }
  }

  void paint_trees() {
    int count = 3 + static_cast<int>(rng_.uniform_int(4));
    for (int i = 0; i < count; ++i) {
      int radius = 6 + static_cast<int>(rng_.uniform_int(7));
      int cr = radius + static_cast<int>(rng_.uniform_int(std::max(1, n_ - 2 * radius)));
      int cc = radius + static_cast<int>(rng_.uniform_int(std::max(1, n_ - 2 * radius)));
      for (int r = cr - radius; r <= cr + radius; ++r) {
        for (int c = cc - radius; c <= cc + radius; ++c) {
          if (r < 0 || c < 0 || r >= n_ || c >= n_) continue;
          int dr = r - cr, dc = c - cc;
          if (dr * dr + dc * dc > radius * radius) continue;
          // strongly textured canopy: the per-pixel variance is the signature
          set_optical(r, c, clamp_u8(20 + rng_.uniform(-15, 15)),
                      clamp_u8(90 + rng_.uniform(-35, 35)),
                      clamp_u8(20 + rng_.uniform(-15, 15)));
          set_cell(r, c, 1, 5.0f + static_cast<float>(rng_.uniform(-0.3, 0.3)));
        }
      }
    }
  }

  void paint_buildings() {
    int count = 2 + static_cast<int>(rng_.uniform_int(3));
    for (int i = 0; i < count; ++i) {
      auto [r0, c0, h, w] = random_rect(20, 36);
      float base = 7.5f + static_cast<float>(rng_.uniform(0.0, 1.0));
      for (int r = r0; r < r0 + h; ++r) {
        for (int c = c0; c < c0 + w; ++c) {
          // claim only impervious ground and keep its optical texture
          // untouched: elevation is the sole evidence a building exists
          if (raw_.labels.at(r, c, 0) != 4) continue;
          set_cell(r, c, 0, base + static_cast<float>(rng_.uniform(-0.2, 0.2)));
        }
      }
    }
  }

  void paint_cars() {
    int count = 3 + static_cast<int>(rng_.uniform_int(6));
    for (int i = 0; i < count; ++i) {
      int h = 4 + static_cast<int>(rng_.uniform_int(2));
      int w = 6 + static_cast<int>(rng_.uniform_int(3));
      if (rng_.uniform_int(2) == 1) std::swap(h, w);
      int r0 = static_cast<int>(rng_.uniform_int(n_ - h));
      int c0 = static_cast<int>(rng_.uniform_int(n_ - w));
      for (int r = r0; r < r0 + h; ++r) {
        for (int c = c0; c < c0 + w; ++c) {
          set_optical(r, c, clamp_u8(215 + rng_.uniform(-10, 10)),
                      clamp_u8(35 + rng_.uniform(-10, 10)),
                      clamp_u8(35 + rng_.uniform(-10, 10)));
          set_cell(r, c, 3, 1.5f + static_cast<float>(rng_.uniform(-0.1, 0.1)));
        }
      }
    }
  }

  void paint_clutter() {
    int count = 1 + static_cast<int>(rng_.uniform_int(3));
    for (int i = 0; i < count; ++i) {
      int radius = 4 + static_cast<int>(rng_.uniform_int(5));
      int cr = radius + static_cast<int>(rng_.uniform_int(std::max(1, n_ - 2 * radius)));
      int cc = radius + static_cast<int>(rng_.uniform_int(std::max(1, n_ - 2 * radius)));
      double br = rng_.uniform(0, 255), bg = rng_.uniform(0, 255), bb = rng_.uniform(0, 255);
      // clutter height is arbitrary per blob — it can mimic a roof or a tree,
      // so elevation is deliberately unreliable here and only color settles it
      float height = static_cast<float>(rng_.uniform(0.5, 9.0));
      for (int r = cr - radius; r <= cr + radius; ++r) {
        for (int c = cc - radius; c <= cc + radius; ++c) {
          if (r < 0 || c < 0 || r >= n_ || c >= n_) continue;
          int dr = r - cr, dc = c - cc;
          if (dr * dr + dc * dc > radius * radius) continue;
          set_optical(r, c, clamp_u8(br + rng_.uniform(-10, 10)),
                      clamp_u8(bg + rng_.uniform(-10, 10)),
                      clamp_u8(bb + rng_.uniform(-10, 10)));
          set_cell(r, c, 5, height + static_cast<float>(rng_.uniform(-0.3, 0.3)));
        }
      }
    }
  }

 private:
  std::tuple<int, int, int, int> random_rect(int lo, int hi) {
    int h = lo + static_cast<int>(rng_.uniform_int(hi - lo + 1));
    int w = lo + static_cast<int>(rng_.uniform_int(hi - lo + 1));
    h = std::min(h, n_);
    w = std::min(w, n_);
    int r0 = static_cast<int>(rng_.uniform_int(n_ - h + 1));
    int c0 = static_cast<int>(rng_.uniform_int(n_ - w + 1));
    return {r0, c0, h, w};
  }

  void set_optical(int r, int c, uint8_t red, uint8_t green, uint8_t blue) {
    raw_.optical.at(r, c, 0) = red;
    raw_.optical.at(r, c, 1) = green;
    raw_.optical.at(r, c, 2) = blue;
  }
  void set_cell(int r, int c, uint8_t label, float elevation) {
    raw_.labels.at(r, c, 0) = label;
    raw_.dsm[static_cast<size_t>(r) * n_ + c] = elevation;
  }

  int n_;
  RandomSource& rng_;
  RawPatch raw_;
};

RawPatch paint_patch(int n, RandomSource& rng) {
  PatchPainter p(n, rng);
  p.paint_low_vegetation();
  p.paint_trees();
  p.paint_buildings();
  p.paint_cars();
  p.paint_clutter();
  return p.take();
}

}  // namespace

void synth_generate(const std::string& root, int n_train, int n_test, uint64_t seed,
                    int patch_size) {
  if (n_train < 1 || n_test < 0) {
    throw std::invalid_argument("synth_generate: need at least one training patch");
  }
  if (patch_size < 64) {
    throw std::invalid_argument("synth_generate: patch size below 64 leaves no room for objects");
  }
  char name[32];
  for (int i = 0; i < n_train + n_test; ++i) {
    RandomSource rng(seed * 1000003ULL + static_cast<uint64_t>(i));
    RawPatch raw = paint_patch(patch_size, rng);
    std::snprintf(name, sizeof(name), "patch_%03d", i);
    const char* split = i < n_train ? "train" : "test";
    save_patch(root + "/" + split + "/" + name, raw);
  }
}

std::vector<std::string> list_patch_dirs(const std::string& root, const std::string& split) {
  fs::path base = fs::path(root) / split;
  if (!fs::is_directory(base)) {
    throw std::invalid_argument("list_patch_dirs: no such directory: " + base.string());
  }
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.is_directory()) dirs.push_back(entry.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw std::invalid_argument("list_patch_dirs: no patches under " + base.string());
  }
  return dirs;
}

}  // namespace manet
