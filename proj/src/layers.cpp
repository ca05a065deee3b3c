#include "manet/layers.hpp"

namespace manet {

Tensor apply_channel_ln(const Tensor& x, const LayerNormParams& p) {
  int h = x.dim(1), w = x.dim(2);
  return ops::nc_to_chw(apply_ln(ops::chw_to_nc(x), p), h, w);
}

LayerNormParams register_ln(ParamRegistry& reg, const std::string& prefix, int c, bool trainable) {
  LayerNormParams p;
  p.gamma = reg.add(prefix + ".gamma", {c}, Init::kOnes, trainable);
  p.beta = reg.add(prefix + ".beta", {c}, Init::kZeros, trainable);
  return p;
}

MlpParams register_mlp(ParamRegistry& reg, const std::string& prefix, int c, int hidden,
                       bool trainable) {
  MlpParams p;
  p.w1 = reg.add(prefix + ".w1", {c, hidden}, Init::kTruncNormal02, trainable);
  p.b1 = reg.add(prefix + ".b1", {hidden}, Init::kZeros, trainable);
  p.w2 = reg.add(prefix + ".w2", {hidden, c}, Init::kTruncNormal02, trainable);
  p.b2 = reg.add(prefix + ".b2", {c}, Init::kZeros, trainable);
  return p;
}

}  // namespace manet
