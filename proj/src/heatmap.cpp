#include "manet/heatmap.hpp"

#include <cmath>
#include <filesystem>

#include "manet/png_io.hpp"

namespace manet {

namespace {

// min-max to [0,255]; a flat map has no scale, render it mid-gray
ImageU8 to_gray(const std::vector<float>& v, int h, int w) {
  float lo = v[0], hi = v[0];
  for (float x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  ImageU8 img{h, w, 1, std::vector<uint8_t>(v.size())};
  if (hi > lo) {
    for (size_t i = 0; i < v.size(); ++i) {
      img.pixels[i] = static_cast<uint8_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
    }
  } else {
    std::fill(img.pixels.begin(), img.pixels.end(), 128);
  }
  return img;
}

std::vector<float> channel_magnitude(const Tensor& f) {
  int c = f.shape()[0], h = f.shape()[1], w = f.shape()[2];
  size_t plane = static_cast<size_t>(h) * w;
  std::vector<float> mag(plane, 0.0f);
  for (int ch = 0; ch < c; ++ch) {
    for (size_t i = 0; i < plane; ++i) {
      float v = f.ptr()[ch * plane + i];
      mag[i] += v * v;
    }
  }
  for (float& v : mag) v = std::sqrt(v);
  return mag;
}

}  // namespace

std::vector<std::string> export_heatmaps(const Model& model, const Sample& sample,
                                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  NoGradGuard no_grad;
  bool dual = model.config().modality == Modality::kBoth;
  Tensor dsm = dual ? sample.dsm : Tensor();

  std::vector<std::string> written;
  Tensor probs = ops::softmax(model.forward(sample.optical, dsm), 0);
  int k = probs.shape()[0], h = probs.shape()[1], w = probs.shape()[2];
  size_t plane = static_cast<size_t>(h) * w;
  for (int c = 0; c < k; ++c) {
    std::vector<float> map(probs.ptr() + c * plane, probs.ptr() + (c + 1) * plane);
    std::string name = c < kNumClasses && k == kNumClasses ? class_names()[c]
                                                           : "class" + std::to_string(c);
    std::string path = out_dir + "/prob_" + name + ".png";
    write_png(path, to_gray(map, h, w));
    written.push_back(path);
  }

  auto [fx, fy] = model.encoder_features(sample.optical, dsm);
  std::string fx_path = out_dir + "/feature_optical.png";
  write_png(fx_path, to_gray(channel_magnitude(fx), fx.shape()[1], fx.shape()[2]));
  written.push_back(fx_path);
  if (fy.defined()) {
    std::string fy_path = out_dir + "/feature_dsm.png";
    write_png(fy_path, to_gray(channel_magnitude(fy), fy.shape()[1], fy.shape()[2]));
    written.push_back(fy_path);
  }
  return written;
}

}  // namespace manet
