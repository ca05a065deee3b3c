#pragma once

#include <string>

#include "manet/ops.hpp"
#include "manet/param.hpp"

namespace manet {

constexpr float kLayerNormEps = 1e-6f;

struct LayerNormParams {
  Tensor gamma, beta;
};

struct MlpParams {
  Tensor w1, b1, w2, b2;  // c -> hidden -> c, GELU between
};

inline Tensor apply_ln(const Tensor& x, const LayerNormParams& p) {
  return ops::layer_norm(x, p.gamma, p.beta, kLayerNormEps);
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ops::add_rowvec(ops::matmul(x, w), b);
}

inline Tensor mlp_forward(const Tensor& x, const MlpParams& p) {
  return linear(ops::gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

// Channel-wise layer norm for [c,h,w] maps: normalize across c at each pixel.
Tensor apply_channel_ln(const Tensor& x, const LayerNormParams& p);

LayerNormParams register_ln(ParamRegistry& reg, const std::string& prefix, int c, bool trainable);
MlpParams register_mlp(ParamRegistry& reg, const std::string& prefix, int c, int hidden,
                       bool trainable);

}  // namespace manet
