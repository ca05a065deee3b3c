#include "manet/dfm.hpp"

#include <algorithm>
#include <stdexcept>

namespace manet {

std::vector<int> dfm_channels(int c) {
  if (c < 4 || c % 4 != 0) {
    throw std::invalid_argument("pyramid channels need embed dim divisible by 4, got " +
                                std::to_string(c));
  }
  return {c / 4, c / 2, c, c};
}

PyramidParams register_pyramid(ParamRegistry& reg, const std::string& prefix, int c) {
  std::vector<int> ch = dfm_channels(c);
  PyramidParams p;
  auto head = [&](const std::string& name, std::vector<int> kshape, int out_c, Init init) {
    PyramidParams::Head h;
    h.weight = reg.add(prefix + "." + name + ".weight", std::move(kshape), init, true);
    h.bias = reg.add(prefix + "." + name + ".bias", {out_c}, Init::kZeros, true);
    h.ln = register_ln(reg, prefix + "." + name + ".ln", out_c, true);
    return h;
  };
  p.up4 = head("up4", {c, ch[0], 4, 4}, ch[0], Init::kHeDeconv);  // kernels [c_in,c_out,4,4]
  p.up2 = head("up2", {c, ch[1], 2, 2}, ch[1], Init::kHeDeconv);
  p.same = head("same", {ch[2], c, 1, 1}, ch[2], Init::kHeConv);  // kernels [c_out,c_in,1,1]
  p.down2 = head("down2", {ch[3], c, 2, 2}, ch[3], Init::kHeConv);
  return p;
}

SEPathParams register_se_path(ParamRegistry& reg, const std::string& prefix, int channels) {
  int mid = std::max(1, channels / 4);
  SEPathParams p;
  p.w1 = reg.add(prefix + ".w1", {channels, mid}, Init::kHeLinear, true);
  p.b1 = reg.add(prefix + ".b1", {mid}, Init::kZeros, true);
  // w2 starts at zero so every gate opens at sigmoid(0) = 0.5 and a fresh
  // module reproduces the plain two-branch average until the gates learn.
  p.w2 = reg.add(prefix + ".w2", {mid, channels}, Init::kZeros, true);
  p.b2 = reg.add(prefix + ".b2", {channels}, Init::kZeros, true);
  return p;
}

SEFusionParams register_se(ParamRegistry& reg, const std::string& prefix, int channels) {
  SEFusionParams p;
  p.x = register_se_path(reg, prefix + ".x", channels);
  p.y = register_se_path(reg, prefix + ".y", channels);
  return p;
}

namespace {
Tensor finish_head(const Tensor& mapped, const PyramidParams::Head& h) {
  return apply_channel_ln(ops::add_channel_bias(mapped, h.bias), h.ln);
}
}  // namespace

std::vector<Tensor> pyramid_expand(const Tensor& f, const PyramidParams& p) {
  if (f.ndim() != 3) {
    throw std::invalid_argument("pyramid_expand: expected [c,h,w], got " + shape_str(f.shape()));
  }
  if (f.dim(1) % 2 != 0 || f.dim(2) % 2 != 0) {
    throw std::invalid_argument("pyramid_expand: odd extent " + shape_str(f.shape()) +
                                " cannot be downsampled");
  }
  std::vector<Tensor> out;
  out.push_back(ops::gelu(finish_head(ops::deconv2d(f, p.up4.weight, 4), p.up4)));
  out.push_back(ops::gelu(finish_head(ops::deconv2d(f, p.up2.weight, 2), p.up2)));
  out.push_back(ops::gelu(finish_head(ops::conv2d(f, p.same.weight, 1, 0), p.same)));
  out.push_back(ops::gelu(finish_head(ops::conv2d(f, p.down2.weight, 2, 0), p.down2)));
  return out;
}

Tensor se_gate(const Tensor& f, const SEPathParams& p) {
  int c = f.dim(0);
  Tensor squeezed = ops::reshape(ops::global_avg_pool(f), {1, c});
  Tensor excited = linear(ops::relu(linear(squeezed, p.w1, p.b1)), p.w2, p.b2);
  return ops::reshape(ops::sigmoid(excited), {c});
}

Tensor se_fuse(const Tensor& fx, const Tensor& fy, const SEFusionParams& p) {
  if (fx.shape() != fy.shape()) {
    throw std::invalid_argument("se_fuse: modality shapes differ: " + shape_str(fx.shape()) +
                                " vs " + shape_str(fy.shape()));
  }
  return ops::add(ops::mul_channel(fx, se_gate(fx, p.x)), ops::mul_channel(fy, se_gate(fy, p.y)));
}

DeepFusion::DeepFusion(ParamRegistry& reg, int c, bool dual, bool se_enabled)
    : dual_(dual), se_enabled_(se_enabled) {
  std::vector<int> ch = dfm_channels(c);
  pyr_x_ = register_pyramid(reg, "dfm.pyramid_x", c);
  if (dual_) pyr_y_ = register_pyramid(reg, "dfm.pyramid_y", c);
  if (se_enabled_) {
    for (size_t i = 0; i < ch.size(); ++i) {
      if (dual_) {
        se_.push_back(register_se(reg, "dfm.se" + std::to_string(i), ch[i]));
      } else {
        se_single_.push_back(register_se_path(reg, "dfm.se" + std::to_string(i) + ".x", ch[i]));
      }
    }
  }
}

std::vector<Tensor> DeepFusion::forward_pair(const Tensor& fx, const Tensor& fy) const {
  if (!dual_) throw std::logic_error("forward_pair on a single-modality fusion module");
  std::vector<Tensor> px = pyramid_expand(fx, pyr_x_);
  std::vector<Tensor> py = pyramid_expand(fy, pyr_y_);
  std::vector<Tensor> fused;
  for (size_t i = 0; i < px.size(); ++i) {
    if (se_enabled_) {
      fused.push_back(se_fuse(px[i], py[i], se_[i]));
    } else {
      fused.push_back(ops::scale(ops::add(px[i], py[i]), 0.5f));
    }
  }
  return fused;
}

std::vector<Tensor> DeepFusion::forward_single(const Tensor& fx) const {
  std::vector<Tensor> px = pyramid_expand(fx, pyr_x_);
  if (!se_enabled_) return px;
  std::vector<Tensor> out;
  for (size_t i = 0; i < px.size(); ++i) {
    out.push_back(ops::mul_channel(px[i], se_gate(px[i], se_single_[i])));
  }
  return out;
}

}  // namespace manet
