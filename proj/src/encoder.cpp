#include "manet/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace manet {

void EncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw std::invalid_argument("encoder: image size " + std::to_string(image_size) +
                                " not divisible by patch size " + std::to_string(patch_size));
  }
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0) {
    throw std::invalid_argument("encoder: embed dim " + std::to_string(embed_dim) +
                                " not divisible by head count " + std::to_string(heads));
  }
  if (depth < 0 || mlp_ratio < 1) {
    throw std::invalid_argument("encoder: invalid depth or mlp ratio");
  }
}

Tensor attention_forward(const Tensor& x_normed, const AttentionParams& p, int heads,
                         Tensor* attn_weights) {
  int c = x_normed.dim(1);
  int d = c / heads;
  Tensor q = ops::split_heads(linear(x_normed, p.wq, p.bq), heads);
  Tensor k = ops::split_heads(linear(x_normed, p.wk, p.bk), heads);
  Tensor v = ops::split_heads(linear(x_normed, p.wv, p.bv), heads);
  Tensor scores = ops::batched_matmul(q, ops::transpose_last2(k));
  Tensor attn = ops::softmax(ops::scale(scores, 1.0f / std::sqrt(static_cast<float>(d))), 2);
  if (attn_weights) *attn_weights = attn;
  Tensor ctx = ops::merge_heads(ops::batched_matmul(attn, v));
  return linear(ctx, p.wo, p.bo);
}

SamEncoder::SamEncoder(const EncoderConfig& cfg, ParamRegistry& reg, bool dual_branch)
    : cfg_(cfg), reg_(&reg), dual_(dual_branch) {
  cfg.validate();
  int c = cfg.embed_dim;
  pe_weight_ = reg.add("encoder.patch_embed.weight", {c, 3, cfg.patch_size, cfg.patch_size},
                       Init::kTruncNormal02, false);
  pe_bias_ = reg.add("encoder.patch_embed.bias", {c}, Init::kZeros, false);
  pos_embed_ = reg.add("encoder.pos_embed", {cfg.tokens(), c}, Init::kTruncNormal02, false);
  blocks_.resize(static_cast<size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i) {
    std::string prefix = "encoder.block" + std::to_string(i);
    ViTBlock& b = blocks_[static_cast<size_t>(i)];
    b.ln1 = register_ln(reg, prefix + ".ln1", c, false);
    b.attn.wq = reg.add(prefix + ".attn.wq", {c, c}, Init::kTruncNormal02, false);
    b.attn.bq = reg.add(prefix + ".attn.bq", {c}, Init::kZeros, false);
    b.attn.wk = reg.add(prefix + ".attn.wk", {c, c}, Init::kTruncNormal02, false);
    b.attn.bk = reg.add(prefix + ".attn.bk", {c}, Init::kZeros, false);
    b.attn.wv = reg.add(prefix + ".attn.wv", {c, c}, Init::kTruncNormal02, false);
    b.attn.bv = reg.add(prefix + ".attn.bv", {c}, Init::kZeros, false);
    b.attn.wo = reg.add(prefix + ".attn.wo", {c, c}, Init::kTruncNormal02, false);
    b.attn.bo = reg.add(prefix + ".attn.bo", {c}, Init::kZeros, false);
    b.ln2 = register_ln(reg, prefix + ".ln2", c, false);
    b.mlp = register_mlp(reg, prefix + ".mlp", c, c * cfg.mlp_ratio, false);
  }
}

Tensor SamEncoder::patch_embed(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw std::invalid_argument("patch_embed: expected a 3-channel image, got " +
                                shape_str(image.shape()));
  }
  if (image.dim(1) != cfg_.image_size || image.dim(2) != cfg_.image_size) {
    throw std::invalid_argument("patch_embed: image " + shape_str(image.shape()) +
                                " does not match configured size " +
                                std::to_string(cfg_.image_size));
  }
  Tensor grid = ops::conv2d(image, pe_weight_, cfg_.patch_size, 0);
  grid = ops::add_channel_bias(grid, pe_bias_);
  return ops::add(ops::chw_to_nc(grid), pos_embed_);
}

Tensor SamEncoder::lift_dsm(const Tensor& dsm) {
  if (dsm.ndim() != 3 || dsm.dim(0) != 1) {
    throw std::invalid_argument("lift_dsm: expected a 1-channel raster, got " +
                                shape_str(dsm.shape()));
  }
  size_t hw = dsm.numel();
  std::vector<float> out(hw * 3);
  const float* p = dsm.ptr();
  for (int ch = 0; ch < 3; ++ch) {
    for (size_t i = 0; i < hw; ++i) out[ch * hw + i] = p[i];
  }
  return Tensor({3, dsm.dim(1), dsm.dim(2)}, std::move(out));
}

Tensor SamEncoder::attn_stage(const Tensor& x, const ViTBlock& b,
                              const std::optional<AdapterParams>& ad) const {
  Tensor normed = apply_ln(x, b.ln1);
  Tensor out = ops::add(attention_forward(normed, b.attn, cfg_.heads), x);
  if (ad) {
    Tensor x_a = bottleneck_forward(normed, ad->proj);
    out = ops::add(out, ops::scale_scalar(x_a, ad->s));
  }
  return out;
}

Tensor SamEncoder::mlp_stage(const Tensor& x, const ViTBlock& b,
                             const std::optional<AdapterParams>& ad) const {
  Tensor normed = apply_ln(x, b.ln2);
  Tensor m = mlp_forward(normed, b.mlp);
  if (ad) return block_residual_std(x, m, bottleneck_forward(normed, ad->proj), ad->s);
  return ops::add(m, x);
}

namespace {
void check_block_shape(const Tensor& t, int tokens, int c, int block) {
  if (t.ndim() != 2 || t.dim(0) != tokens || t.dim(1) != c) {
    throw std::runtime_error("encoder block " + std::to_string(block) +
                             " broke the token shape: " + shape_str(t.shape()));
  }
}
}  // namespace

std::pair<Tensor, Tensor> SamEncoder::encode_pair(const Tensor& x_img, const Tensor& y_dsm) const {
  if (!dual_) throw std::logic_error("encode_pair on a single-branch encoder");
  if (x_img.dim(1) != y_dsm.dim(1) || x_img.dim(2) != y_dsm.dim(2)) {
    throw std::invalid_argument("encode_pair: modality extents differ: " +
                                shape_str(x_img.shape()) + " vs " + shape_str(y_dsm.shape()));
  }
  Tensor tx = patch_embed(x_img);
  Tensor ty = patch_embed(lift_dsm(y_dsm));
  int g = cfg_.grid();
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const ViTBlock& b = blocks_[i];
    Tensor mx = attn_stage(tx, b, b.attn_adapter_x);
    Tensor my = attn_stage(ty, b, b.attn_adapter_y);
    if (b.mm) {
      std::tie(tx, ty) = mmadapter_forward(mx, my, b.ln2, b.mlp, *b.mm);
    } else {
      tx = mlp_stage(mx, b, b.mlp_adapter_x);
      ty = mlp_stage(my, b, b.mlp_adapter_y);
    }
    check_block_shape(tx, cfg_.tokens(), cfg_.embed_dim, static_cast<int>(i));
    check_block_shape(ty, cfg_.tokens(), cfg_.embed_dim, static_cast<int>(i));
  }
  return {ops::nc_to_chw(tx, g, g), ops::nc_to_chw(ty, g, g)};
}

Tensor SamEncoder::encode_single(const Tensor& x_img) const {
  Tensor tx = patch_embed(x_img);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const ViTBlock& b = blocks_[i];
    if (b.mm) throw std::logic_error("cross-modal adapter present on a single-branch encode");
    tx = mlp_stage(attn_stage(tx, b, b.attn_adapter_x), b, b.mlp_adapter_x);
    check_block_shape(tx, cfg_.tokens(), cfg_.embed_dim, static_cast<int>(i));
  }
  int g = cfg_.grid();
  return ops::nc_to_chw(tx, g, g);
}

size_t SamEncoder::count_parameters(const EncoderConfig& cfg) {
  ParamRegistry counter(0, /*counting_only=*/true);
  SamEncoder shape_probe(cfg, counter, /*dual_branch=*/true);
  return counter.count_prefix("encoder.");
}

}  // namespace manet
