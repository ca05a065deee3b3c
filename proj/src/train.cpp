#include "manet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "manet/sha256.hpp"

namespace manet {

SgdState::SgdState(const ParamRegistry& reg) : velocity_(reg.size()) {
  for (size_t i = 0; i < reg.size(); ++i) {
    if (reg.at(i).trainable) velocity_[i].assign(reg.at(i).numel(), 0.0f);
  }
}

void zero_grads(ParamRegistry& reg) {
  for (size_t i = 0; i < reg.size(); ++i) {
    auto& impl = *reg.at(i).tensor.impl();
    std::fill(impl.grad.begin(), impl.grad.end(), 0.0f);
  }
}

void sgd_step(ParamRegistry& reg, SgdState& state, const SgdConfig& cfg) {
  float lr = static_cast<float>(cfg.lr);
  float momentum = static_cast<float>(cfg.momentum);
  float wd = static_cast<float>(cfg.weight_decay);
  for (size_t i = 0; i < reg.size(); ++i) {
    Parameter& p = reg.at(i);
    if (!p.trainable) continue;
    auto& impl = *p.tensor.impl();
    if (impl.grad.size() != impl.data.size()) {
      throw std::runtime_error("sgd_step: trainable parameter '" + p.name +
                               "' has no gradient (graph detached?)");
    }
    std::vector<float>& v = state.velocity(i);
    for (size_t j = 0; j < impl.data.size(); ++j) {
      v[j] = momentum * v[j] + impl.grad[j] + wd * impl.data[j];
      impl.data[j] -= lr * v[j];
    }
    if (p.clamp_unit_interval) {
      for (float& w : impl.data) w = std::clamp(w, 0.0f, 1.0f);
    }
  }
}

std::string frozen_sha256(const ParamRegistry& reg) {
  Sha256 h;
  for (size_t i = 0; i < reg.size(); ++i) {
    const Parameter& p = reg.at(i);
    if (p.trainable) continue;
    h.update_f32(p.tensor.ptr(), p.numel());
  }
  return h.hex();
}

std::vector<int> argmax_raster(const Tensor& probs) {
  if (probs.shape().size() != 3) {
    throw std::invalid_argument("argmax_raster: expected [K,H,W]");
  }
  int k = probs.shape()[0];
  size_t plane = static_cast<size_t>(probs.shape()[1]) * probs.shape()[2];
  std::vector<int> out(plane, 0);
  for (size_t i = 0; i < plane; ++i) {
    float best = probs.ptr()[i];
    for (int c = 1; c < k; ++c) {
      float v = probs.ptr()[c * plane + i];
      if (v > best) {
        best = v;
        out[i] = c;
      }
    }
  }
  return out;
}

namespace {

Tensor forward_sample(const Model& model, const Sample& s) {
  bool dual = model.config().modality == Modality::kBoth;
  return model.forward(s.optical, dual ? s.dsm : Tensor());
}

}  // namespace

MetricReport evaluate_model(const Model& model, const std::vector<MultimodalPatch>& patches,
                            int stride, ConfusionMatrix* cm_out) {
  if (patches.empty()) throw std::invalid_argument("evaluate_model: empty patch set");
  NoGradGuard no_grad;
  int window = model.config().tile;
  int classes = model.config().classes;
  ConfusionMatrix cm(classes);
  for (const MultimodalPatch& patch : patches) {
    std::vector<std::pair<TileIndex, Tensor>> tiles;
    for (const TileIndex& tile : slide_windows(patch.height, patch.width, window, stride)) {
      Sample s = crop_sample(patch, tile);
      Tensor probs = ops::softmax(forward_sample(model, s), 0);
      tiles.emplace_back(tile, probs);
    }
    Tensor stitched = stitch_average(tiles, classes, patch.height, patch.width);
    accumulate_confusion(argmax_raster(stitched), patch.labels, cm);
  }
  if (cm_out) *cm_out = cm;
  return compute_metrics(cm);
}

namespace {

std::string format_epoch_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.4f,%.4f", r.epoch, r.loss, r.eval.oa,
                r.eval.mf1, r.eval.miou);
  return buf;
}

[[noreturn]] void abort_on_nan(const ParamRegistry& reg) {
  for (size_t i = 0; i < reg.size(); ++i) {
    const Parameter& p = reg.at(i);
    if (!p.trainable) continue;
    for (float g : p.tensor.impl()->grad) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("training diverged: loss is not finite; first bad gradient in '" +
                                 p.name + "'");
      }
    }
  }
  throw std::runtime_error("training diverged: loss is not finite");
}

}  // namespace

TrainResult train_model(Model& model, const RunConfig& cfg,
                        const std::vector<MultimodalPatch>& train_patches,
                        const std::vector<MultimodalPatch>& eval_patches,
                        std::ostream* echo) {
  if (train_patches.empty()) throw std::invalid_argument("train_model: empty training set");
  if (eval_patches.empty()) throw std::invalid_argument("train_model: empty evaluation set");

  int window = model.config().tile;
  struct TileRef {
    size_t patch;
    TileIndex tile;
  };
  std::vector<TileRef> tiles;
  for (size_t pi = 0; pi < train_patches.size(); ++pi) {
    const MultimodalPatch& p = train_patches[pi];
    for (const TileIndex& t : slide_windows(p.height, p.width, window, window)) {
      tiles.push_back({pi, t});
    }
  }

  ParamRegistry& reg = model.registry();
  SgdState state(reg);
  SgdConfig sgd{cfg.lr, cfg.momentum, cfg.weight_decay};
  const std::string frozen_before = frozen_sha256(reg);

  // one stream drives shuffling and augmentation; the model's own
  // initialisation stream is already spent by construction
  RandomSource rng(cfg.seed * 7919ULL + 17ULL);

  TrainResult result;
  std::ostringstream log;
  log << "epoch,loss,OA,mF1,mIoU\n";
  if (echo) (*echo) << "epoch,loss,OA,mF1,mIoU\n";

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates on the fixed stream
    for (size_t i = tiles.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i)));
      std::swap(tiles[i - 1], tiles[j]);
    }

    double loss_sum = 0.0;
    size_t done = 0;
    while (done < tiles.size()) {
      size_t batch = std::min(static_cast<size_t>(cfg.batch_size), tiles.size() - done);
      zero_grads(reg);
      for (size_t b = 0; b < batch; ++b) {
        const TileRef& ref = tiles[done + b];
        Sample s = augment_random(crop_sample(train_patches[ref.patch], ref.tile), rng);
        Tensor logits = forward_sample(model, s);
        Tensor loss = ops::cross_entropy_mean(logits, s.labels);
        double value = loss.ptr()[0];
        if (!std::isfinite(value)) {
          ops::scale(loss, 1.0f / static_cast<float>(batch)).backward();
          abort_on_nan(reg);
        }
        loss_sum += value;
        ops::scale(loss, 1.0f / static_cast<float>(batch)).backward();
      }
      sgd_step(reg, state, sgd);
      done += batch;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(tiles.size());
    rec.eval = evaluate_model(model, eval_patches, cfg.resolved_eval_stride());

    if (frozen_sha256(reg) != frozen_before) {
      throw std::runtime_error("freeze violation: backbone bytes changed during epoch " +
                               std::to_string(epoch));
    }

    std::string line = format_epoch_line(rec);
    log << line << "\n";
    if (echo) (*echo) << line << "\n";
    result.epochs.push_back(std::move(rec));
  }

  result.metric_log = log.str();
  return result;
}

}  // namespace manet
