#pragma once

#include <string>

#include "manet/model.hpp"

namespace manet {

// Everything a run needs, model plus optimizer plus paths. Defaults follow
// the training protocol (SGD, momentum 0.9, weight decay 5e-4, batch 10).
struct RunConfig {
  ModelConfig model;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 10;
  int epochs = 30;
  uint64_t seed = 1;
  int eval_stride = 0;  // 0 -> tile / 2
  std::string data_root;
  std::string out_dir;

  int resolved_eval_stride() const { return eval_stride > 0 ? eval_stride : model.tile / 2; }
  void validate() const;  // throws std::invalid_argument
};

// Line-oriented `key = value` text; '#' starts a comment. Unknown keys throw.
RunConfig parse_config_file(const std::string& path);
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical one-line-per-key serializations. The model form is embedded in
// checkpoints; the run form goes into manifests. Both are parse round-trips.
std::string canonical_model_text(const ModelConfig& cfg);
ModelConfig parse_model_text(const std::string& text);
std::string canonical_run_text(const RunConfig& cfg);

}  // namespace manet
