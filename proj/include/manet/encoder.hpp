#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "manet/adapters.hpp"

namespace manet {

struct EncoderConfig {
  int image_size = 1024;
  int patch_size = 16;
  int embed_dim = 768;
  int depth = 12;
  int heads = 12;
  int mlp_ratio = 4;

  int grid() const { return image_size / patch_size; }
  int tokens() const { return grid() * grid(); }
  void validate() const;  // throws std::invalid_argument
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct ViTBlock {
  LayerNormParams ln1, ln2;
  AttentionParams attn;
  MlpParams mlp;
  // Slots filled by install_adapters.
  std::optional<AdapterParams> attn_adapter_x, attn_adapter_y;
  std::optional<AdapterParams> mlp_adapter_x, mlp_adapter_y;
  std::optional<MMAdapterParams> mm;
};

// Global multi-head self-attention over pre-normed tokens [n,c]. When
// attn_weights is given it receives the softmax matrix [heads,n,n].
Tensor attention_forward(const Tensor& x_normed, const AttentionParams& p, int heads,
                         Tensor* attn_weights = nullptr);

// Plain (non-hierarchical) ViT running one or two modality branches through
// the same frozen weights. The dsm branch reuses every backbone tensor of the
// optical branch; only adapters differ per branch.
class SamEncoder {
 public:
  SamEncoder(const EncoderConfig& cfg, ParamRegistry& reg, bool dual_branch);

  // [3,H,W] -> tokens [n,c] with positional embedding added.
  Tensor patch_embed(const Tensor& image) const;
  // [1,H,W] -> [3,H,W] by channel replication (the backbone stays unmodified).
  static Tensor lift_dsm(const Tensor& dsm);

  // Lockstep dual-branch encode; the MLP-stage cross-modal adapter (if
  // installed) blends the branches inside each block. Returns [c,h,w] maps.
  std::pair<Tensor, Tensor> encode_pair(const Tensor& x_img, const Tensor& y_dsm) const;
  Tensor encode_single(const Tensor& x_img) const;

  // Backbone-only element count (patch embed + positional embedding +
  // depth blocks); runs on a counting registry, no allocation.
  static size_t count_parameters(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  bool dual_branch() const { return dual_; }
  bool adapters_installed() const { return installed_; }
  AdapterMode adapter_mode() const { return mode_; }
  ParamRegistry& registry() { return *reg_; }
  std::vector<ViTBlock>& blocks() { return blocks_; }
  const std::vector<ViTBlock>& blocks() const { return blocks_; }

 private:
  friend void install_adapters(SamEncoder&, int, AdapterMode);

  Tensor attn_stage(const Tensor& x, const ViTBlock& b,
                    const std::optional<AdapterParams>& ad) const;
  Tensor mlp_stage(const Tensor& x, const ViTBlock& b,
                   const std::optional<AdapterParams>& ad) const;

  EncoderConfig cfg_;
  ParamRegistry* reg_;
  bool dual_;
  bool installed_ = false;
  AdapterMode mode_ = AdapterMode::kNone;
  Tensor pe_weight_, pe_bias_, pos_embed_;
  std::vector<ViTBlock> blocks_;
};

}  // namespace manet
