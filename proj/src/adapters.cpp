#include "manet/adapters.hpp"

#include <stdexcept>

#include "manet/encoder.hpp"

namespace manet {

AdapterMode adapter_mode_from_string(const std::string& s) {
  if (s == "none") return AdapterMode::kNone;
  if (s == "standard") return AdapterMode::kStandard;
  if (s == "mmadapter") return AdapterMode::kMmAdapter;
  throw std::invalid_argument("unknown adapter mode '" + s +
                              "' (expected none|standard|mmadapter)");
}

std::string to_string(AdapterMode mode) {
  switch (mode) {
    case AdapterMode::kNone: return "none";
    case AdapterMode::kStandard: return "standard";
    case AdapterMode::kMmAdapter: return "mmadapter";
  }
  return "?";
}

BottleneckParams register_bottleneck(ParamRegistry& reg, const std::string& prefix, int c,
                                     int c_hat) {
  BottleneckParams p;
  p.w_d = reg.add(prefix + ".w_d", {c, c_hat}, Init::kTruncNormal02, true);
  p.b_d = reg.add(prefix + ".b_d", {c_hat}, Init::kZeros, true);
  p.w_u = reg.add(prefix + ".w_u", {c_hat, c}, Init::kZeros, true);
  p.b_u = reg.add(prefix + ".b_u", {c}, Init::kZeros, true);
  return p;
}

AdapterParams register_adapter(ParamRegistry& reg, const std::string& prefix, int c, int c_hat) {
  AdapterParams p;
  p.proj = register_bottleneck(reg, prefix, c, c_hat);
  p.s = reg.add(prefix + ".s", {1}, Init::kHalf, true);
  return p;
}

MMAdapterParams register_mmadapter(ParamRegistry& reg, const std::string& prefix, int c,
                                   int c_hat) {
  MMAdapterParams p;
  p.x = register_bottleneck(reg, prefix + ".x", c, c_hat);
  p.y = register_bottleneck(reg, prefix + ".y", c, c_hat);
  p.lambda1 = reg.add(prefix + ".lambda1", {1}, Init::kHalf, true, /*clamp_unit_interval=*/true);
  p.lambda2 = reg.add(prefix + ".lambda2", {1}, Init::kHalf, true, /*clamp_unit_interval=*/true);
  return p;
}

Tensor bottleneck_forward(const Tensor& x_normed, const BottleneckParams& p) {
  return linear(ops::relu(linear(x_normed, p.w_d, p.b_d)), p.w_u, p.b_u);
}

Tensor adapter_forward(const Tensor& x_i, const LayerNormParams& ln, const AdapterParams& p) {
  return bottleneck_forward(apply_ln(x_i, ln), p.proj);
}

Tensor block_residual_std(const Tensor& x_i, const Tensor& mlp_out, const Tensor& x_a,
                          const Tensor& s) {
  return ops::add(ops::add(mlp_out, ops::scale_scalar(x_a, s)), x_i);
}

namespace {
// 1 - lambda as a graph node, so the gradient reaches lambda through both
// blend terms.
Tensor complement(const Tensor& lambda) {
  return ops::add(Tensor::scalar(1.0f), ops::scale(lambda, -1.0f));
}
}  // namespace

std::pair<Tensor, Tensor> mmadapter_forward(const Tensor& x_i, const Tensor& y_i,
                                            const LayerNormParams& ln, const MlpParams& mlp,
                                            const MMAdapterParams& p) {
  if (x_i.shape() != y_i.shape()) {
    throw std::invalid_argument("mmadapter: modality shapes differ: " + shape_str(x_i.shape()) +
                                " vs " + shape_str(y_i.shape()));
  }
  Tensor xn = apply_ln(x_i, ln);
  Tensor yn = apply_ln(y_i, ln);
  Tensor x_a = bottleneck_forward(xn, p.x);
  Tensor y_a = bottleneck_forward(yn, p.y);
  Tensor x_blend = ops::add(ops::scale_scalar(x_a, p.lambda1),
                            ops::scale_scalar(y_a, complement(p.lambda1)));
  Tensor y_blend = ops::add(ops::scale_scalar(y_a, p.lambda2),
                            ops::scale_scalar(x_a, complement(p.lambda2)));
  Tensor x_o = ops::add(ops::add(mlp_forward(xn, mlp), x_blend), x_i);
  Tensor y_o = ops::add(ops::add(mlp_forward(yn, mlp), y_blend), y_i);
  return {x_o, y_o};
}

void install_adapters(SamEncoder& encoder, int c_hat, AdapterMode mode) {
  if (encoder.installed_) throw std::logic_error("adapters already installed on this encoder");
  encoder.installed_ = true;
  encoder.mode_ = mode;
  if (mode == AdapterMode::kNone) return;

  int c = encoder.cfg_.embed_dim;
  if (c_hat < 1 || c_hat >= c) {
    throw std::invalid_argument("adapter bottleneck " + std::to_string(c_hat) +
                                " must lie in [1, " + std::to_string(c) + ")");
  }
  if (mode == AdapterMode::kMmAdapter && !encoder.dual_) {
    throw std::invalid_argument("the cross-modal adapter requires both modality branches");
  }
  ParamRegistry& reg = *encoder.reg_;
  for (size_t i = 0; i < encoder.blocks_.size(); ++i) {
    ViTBlock& b = encoder.blocks_[i];
    std::string prefix = "adapters.block" + std::to_string(i);
    b.attn_adapter_x = register_adapter(reg, prefix + ".attn_x", c, c_hat);
    if (encoder.dual_) b.attn_adapter_y = register_adapter(reg, prefix + ".attn_y", c, c_hat);
    if (mode == AdapterMode::kStandard) {
      b.mlp_adapter_x = register_adapter(reg, prefix + ".mlp_x", c, c_hat);
      if (encoder.dual_) b.mlp_adapter_y = register_adapter(reg, prefix + ".mlp_y", c, c_hat);
    } else {
      b.mm = register_mmadapter(reg, prefix + ".mm", c, c_hat);
    }
  }
}

}  // namespace manet
