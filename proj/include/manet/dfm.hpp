#pragma once

#include <string>
#include <vector>

#include "manet/layers.hpp"

namespace manet {

// Channel widths of the four pyramid scales {1/4, 1/8, 1/16, 1/32} for an
// encoder width c: finer scales carry fewer channels.
std::vector<int> dfm_channels(int c);

// One modality's scale expansion: deconv x4, deconv x2, 1x1 conv, stride-2
// conv, each followed by channel layer norm and GELU.
struct PyramidParams {
  struct Head {
    Tensor weight, bias;
    LayerNormParams ln;
  };
  Head up4, up2, same, down2;
};

// One modality's squeeze/excite pair of 1x1 projections.
struct SEPathParams {
  Tensor w1, b1, w2, b2;
};

struct SEFusionParams {
  SEPathParams x, y;
};

PyramidParams register_pyramid(ParamRegistry& reg, const std::string& prefix, int c);
SEPathParams register_se_path(ParamRegistry& reg, const std::string& prefix, int channels);
SEFusionParams register_se(ParamRegistry& reg, const std::string& prefix, int channels);

std::vector<Tensor> pyramid_expand(const Tensor& f, const PyramidParams& p);

// Channel gates from global average pooling through the excite pair.
Tensor se_gate(const Tensor& f, const SEPathParams& p);
// g_x .* F_x + g_y .* F_y with independent sigmoid gates per modality.
Tensor se_fuse(const Tensor& fx, const Tensor& fy, const SEFusionParams& p);

// Pyramid expansion of each modality plus per-scale SE fusion. The two
// modality pyramids own separate weights. se_enabled=false degrades the
// fusion to a plain mean (the ablation arm); single-modality construction
// drops the second pyramid entirely.
class DeepFusion {
 public:
  DeepFusion(ParamRegistry& reg, int c, bool dual, bool se_enabled);

  std::vector<Tensor> forward_pair(const Tensor& fx, const Tensor& fy) const;
  std::vector<Tensor> forward_single(const Tensor& fx) const;

  bool dual() const { return dual_; }
  bool se_enabled() const { return se_enabled_; }
  const PyramidParams& pyramid_x() const { return pyr_x_; }
  const PyramidParams& pyramid_y() const { return pyr_y_; }

 private:
  bool dual_, se_enabled_;
  PyramidParams pyr_x_, pyr_y_;
  std::vector<SEFusionParams> se_;        // dual fusion
  std::vector<SEPathParams> se_single_;   // single-modality gating
};

}  // namespace manet
