#pragma once

#include <string>
#include <utility>

#include "manet/layers.hpp"

namespace manet {

class SamEncoder;

enum class AdapterMode { kNone, kStandard, kMmAdapter };

AdapterMode adapter_mode_from_string(const std::string& s);  // throws on unknown
std::string to_string(AdapterMode mode);

// Down-projection, ReLU, up-projection. The down weights start truncated
// normal and the up weights start at zero, so fresh adapters contribute
// nothing and early training matches the frozen backbone.
struct BottleneckParams {
  Tensor w_d, b_d;  // [c, c_hat], [c_hat]
  Tensor w_u, b_u;  // [c_hat, c], [c]
};

struct AdapterParams {
  BottleneckParams proj;
  Tensor s;  // learned residual scale, shape {1}
};

// Cross-modal adapter: one bottleneck per modality plus the convex mixing
// weights. lambda1/lambda2 are clamped to [0,1] after every optimizer step.
struct MMAdapterParams {
  BottleneckParams x, y;
  Tensor lambda1, lambda2;
};

BottleneckParams register_bottleneck(ParamRegistry& reg, const std::string& prefix, int c,
                                     int c_hat);
AdapterParams register_adapter(ParamRegistry& reg, const std::string& prefix, int c, int c_hat);
MMAdapterParams register_mmadapter(ParamRegistry& reg, const std::string& prefix, int c,
                                   int c_hat);

Tensor bottleneck_forward(const Tensor& x_normed, const BottleneckParams& p);

// Adapted feature of one branch: ReLU(LN(x_i) W_d) W_u (biases included).
Tensor adapter_forward(const Tensor& x_i, const LayerNormParams& ln, const AdapterParams& p);

// Residual assembly around a frozen sublayer: mlp_out + s * x_a + x_i.
Tensor block_residual_std(const Tensor& x_i, const Tensor& mlp_out, const Tensor& x_a,
                          const Tensor& s);

// Cross-modal MLP-stage residual: each branch blends its own adapted feature
// with the other branch's via lambda / (1 - lambda).
std::pair<Tensor, Tensor> mmadapter_forward(const Tensor& x_i, const Tensor& y_i,
                                            const LayerNormParams& ln, const MlpParams& mlp,
                                            const MMAdapterParams& p);

// Fills the encoder's per-block adapter slots. mode=kStandard adds a
// post-attention and an MLP-stage adapter per modality branch; kMmAdapter
// keeps the per-modality post-attention adapters but shares one cross-modal
// adapter at the MLP stage. Throws if adapters were already installed.
void install_adapters(SamEncoder& encoder, int c_hat, AdapterMode mode);

}  // namespace manet
