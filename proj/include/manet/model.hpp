#pragma once

#include <memory>
#include <string>
#include <utility>

#include "manet/decoder.hpp"
#include "manet/dfm.hpp"
#include "manet/encoder.hpp"

namespace manet {

enum class Modality { kOptical, kBoth };

Modality modality_from_string(const std::string& s);  // throws on unknown
std::string to_string(Modality m);

struct ModelConfig {
  int tile = 256;
  int patch = 16;
  int embed_dim = 768;
  int depth = 12;
  int heads = 12;
  int mlp_ratio = 4;
  int bottleneck = 0;  // 0 = embed_dim / 4
  int classes = 6;
  AdapterMode adapter = AdapterMode::kMmAdapter;
  Modality modality = Modality::kBoth;
  bool dfm = true;

  int bottleneck_dim() const { return bottleneck > 0 ? bottleneck : embed_dim / 4; }
  EncoderConfig encoder_config() const;
  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelConfig&) const = default;
};

// The full network: frozen dual-branch encoder, adapters, fusion, decoder.
class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t seed);

  // optical [3,tile,tile]; dsm [1,tile,tile], pass an undefined handle for
  // optical-only models. Returns logits [classes,tile,tile].
  Tensor forward(const Tensor& optical, const Tensor& dsm) const;

  // Deep encoder outputs (1/16 scale) for the heatmap export; the second
  // handle is undefined for single-modality models.
  std::pair<Tensor, Tensor> encoder_features(const Tensor& optical, const Tensor& dsm) const;

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& registry() { return *reg_; }
  const ParamRegistry& registry() const { return *reg_; }
  SamEncoder& encoder() { return *encoder_; }

  // Runs the exact registration sequence of the constructor against an
  // external (typically counting-only) registry.
  static void register_structure(const ModelConfig& cfg, ParamRegistry& reg);

 private:
  ModelConfig cfg_;
  std::unique_ptr<ParamRegistry> reg_;
  std::unique_ptr<SamEncoder> encoder_;
  std::unique_ptr<DeepFusion> dfm_;
  std::unique_ptr<Decoder> decoder_;
};

}  // namespace manet
