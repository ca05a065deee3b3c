#include "manet/model.hpp"

#include <stdexcept>

namespace manet {

Modality modality_from_string(const std::string& s) {
  if (s == "optical") return Modality::kOptical;
  if (s == "both") return Modality::kBoth;
  throw std::invalid_argument("unknown modality '" + s + "' (expected optical|both)");
}

std::string to_string(Modality m) {
  return m == Modality::kOptical ? "optical" : "both";
}

EncoderConfig ModelConfig::encoder_config() const {
  EncoderConfig ec;
  ec.image_size = tile;
  ec.patch_size = patch;
  ec.embed_dim = embed_dim;
  ec.depth = depth;
  ec.heads = heads;
  ec.mlp_ratio = mlp_ratio;
  return ec;
}

void ModelConfig::validate() const {
  encoder_config().validate();
  if (tile % 32 != 0) {
    throw std::invalid_argument("tile size " + std::to_string(tile) +
                                " must be divisible by 32 (pyramid + decoder scales)");
  }
  if (embed_dim % 4 != 0) {
    throw std::invalid_argument("embed dim " + std::to_string(embed_dim) +
                                " must be divisible by 4 (pyramid channel plan)");
  }
  if (classes < 2) throw std::invalid_argument("class count must be at least 2");
  int c_hat = bottleneck_dim();
  if (adapter != AdapterMode::kNone && (c_hat < 1 || c_hat >= embed_dim)) {
    throw std::invalid_argument("adapter bottleneck " + std::to_string(c_hat) +
                                " must lie in [1, " + std::to_string(embed_dim) + ")");
  }
  if (adapter == AdapterMode::kMmAdapter && modality != Modality::kBoth) {
    throw std::invalid_argument("adapter=mmadapter requires modality=both");
  }
}

namespace {
struct BuiltModules {
  std::unique_ptr<SamEncoder> encoder;
  std::unique_ptr<DeepFusion> dfm;
  std::unique_ptr<Decoder> decoder;
};

BuiltModules build_modules(const ModelConfig& cfg, ParamRegistry& reg) {
  BuiltModules b;
  bool dual = cfg.modality == Modality::kBoth;
  b.encoder = std::make_unique<SamEncoder>(cfg.encoder_config(), reg, dual);
  install_adapters(*b.encoder, cfg.bottleneck_dim(), cfg.adapter);
  b.dfm = std::make_unique<DeepFusion>(reg, cfg.embed_dim, dual, cfg.dfm);
  b.decoder = std::make_unique<Decoder>(reg, cfg.embed_dim, cfg.classes);
  return b;
}
}  // namespace

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  reg_ = std::make_unique<ParamRegistry>(seed);
  BuiltModules b = build_modules(cfg, *reg_);
  encoder_ = std::move(b.encoder);
  dfm_ = std::move(b.dfm);
  decoder_ = std::move(b.decoder);
}

void Model::register_structure(const ModelConfig& cfg, ParamRegistry& reg) {
  cfg.validate();
  build_modules(cfg, reg);
}

Tensor Model::forward(const Tensor& optical, const Tensor& dsm) const {
  std::vector<Tensor> ladder;
  if (cfg_.modality == Modality::kBoth) {
    if (!dsm.defined()) {
      throw std::invalid_argument("model was built with modality=both but got no dsm raster");
    }
    auto [fx, fy] = encoder_->encode_pair(optical, dsm);
    ladder = dfm_->forward_pair(fx, fy);
  } else {
    ladder = dfm_->forward_single(encoder_->encode_single(optical));
  }
  return decoder_->decode(ladder, cfg_.tile, cfg_.tile);
}

std::pair<Tensor, Tensor> Model::encoder_features(const Tensor& optical, const Tensor& dsm) const {
  if (cfg_.modality == Modality::kBoth) {
    if (!dsm.defined()) {
      throw std::invalid_argument("model was built with modality=both but got no dsm raster");
    }
    return encoder_->encode_pair(optical, dsm);
  }
  return {encoder_->encode_single(optical), Tensor()};
}

}  // namespace manet
