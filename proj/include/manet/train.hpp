#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "manet/config.hpp"
#include "manet/data.hpp"
#include "manet/metrics.hpp"
#include "manet/model.hpp"

namespace manet {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

// Per-parameter momentum buffers, index-aligned with the registry.
class SgdState {
 public:
  explicit SgdState(const ParamRegistry& reg);
  std::vector<float>& velocity(size_t i) { return velocity_[i]; }

 private:
  std::vector<std::vector<float>> velocity_;
};

void zero_grads(ParamRegistry& reg);

// v <- momentum*v + grad + weight_decay*w; w <- w - lr*v, trainable
// parameters only. Unit-interval parameters are clamped back to [0,1]
// afterwards. A trainable parameter without a gradient buffer means the
// graph detached somewhere -- that is fatal, not skippable.
void sgd_step(ParamRegistry& reg, SgdState& state, const SgdConfig& cfg);

// Hash of every frozen parameter's raw bytes in registration order.
std::string frozen_sha256(const ParamRegistry& reg);

// Lowest class index wins ties.
std::vector<int> argmax_raster(const Tensor& probs);

// Sliding-window inference with probability averaging in overlaps, then
// confusion accumulation over all patches.
MetricReport evaluate_model(const Model& model, const std::vector<MultimodalPatch>& patches,
                            int stride, ConfusionMatrix* cm_out = nullptr);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  MetricReport eval;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::string metric_log;  // header + one line per epoch: epoch,loss,OA,mF1,mIoU
};

// Full training loop: tile the patches at stride == window, shuffle and
// augment per epoch, accumulate gradients over each mini-batch, step, and
// evaluate once per epoch. The frozen-backbone hash is checked every epoch.
// echo (optional) receives each metric log line as it is produced.
TrainResult train_model(Model& model, const RunConfig& cfg,
                        const std::vector<MultimodalPatch>& train_patches,
                        const std::vector<MultimodalPatch>& eval_patches,
                        std::ostream* echo = nullptr);

}  // namespace manet
