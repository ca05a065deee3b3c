#pragma once

#include <vector>

#include "manet/layers.hpp"

namespace manet {

// Top-down multiscale decoder: walk the fused ladder coarse to fine,
// upsampling x2 and folding in the next finer feature through a 1x1
// projection, then a 3x3 conv + GELU; a final x4 bilinear upsample and 1x1
// conv produce per-class logits at full image resolution.
class Decoder {
 public:
  Decoder(ParamRegistry& reg, int encoder_dim, int classes);

  // ladder = {1/4, 1/8, 1/16, 1/32} features as produced by the fusion stage.
  Tensor decode(const std::vector<Tensor>& ladder, int out_h, int out_w) const;

  int classes() const { return classes_; }

 private:
  struct Stage {
    Tensor proj_w, proj_b;  // 1x1 onto the running width
    Tensor conv_w, conv_b;  // 3x3 mixing, narrows the running width
  };
  int classes_;
  std::vector<int> ladder_channels_;
  std::vector<Stage> stages_;  // finer-feature fold-ins: 1/16, 1/8, 1/4
  Tensor head_w, head_b;
};

}  // namespace manet
