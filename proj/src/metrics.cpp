#include "manet/metrics.hpp"

#include <stdexcept>
#include <string>

#include "manet/data.hpp"

namespace manet {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
  counts_.assign(static_cast<size_t>(classes) * classes, 0);
}

void ConfusionMatrix::add(int truth, int pred, uint64_t count) {
  if (truth < 0 || truth >= classes_ || pred < 0 || pred >= classes_) {
    throw std::out_of_range("ConfusionMatrix: class pair (" + std::to_string(truth) + ", " +
                            std::to_string(pred) + ") outside " + std::to_string(classes_) +
                            " classes");
  }
  counts_[static_cast<size_t>(truth) * classes_ + pred] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) {
    throw std::invalid_argument("ConfusionMatrix: merge with different class count");
  }
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

uint64_t ConfusionMatrix::at(int truth, int pred) const {
  if (truth < 0 || truth >= classes_ || pred < 0 || pred >= classes_) {
    throw std::out_of_range("ConfusionMatrix: index out of range");
  }
  return counts_[static_cast<size_t>(truth) * classes_ + pred];
}

uint64_t ConfusionMatrix::total() const {
  uint64_t t = 0;
  for (uint64_t v : counts_) t += v;
  return t;
}

void accumulate_confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          ConfusionMatrix& cm) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("accumulate_confusion: raster sizes differ");
  }
  for (size_t i = 0; i < pred.size(); ++i) cm.add(truth[i], pred[i]);
}

MetricReport compute_metrics(const ConfusionMatrix& cm) {
  uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");
  int k = cm.classes();

  MetricReport rep;
  rep.per_class.resize(k);

  uint64_t diag = 0;
  for (int i = 0; i < k; ++i) diag += cm.at(i, i);
  rep.oa = 100.0 * static_cast<double>(diag) / static_cast<double>(total);

  for (int i = 0; i < k; ++i) {
    uint64_t tp = cm.at(i, i), fp = 0, fn = 0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      fp += cm.at(j, i);
      fn += cm.at(i, j);
    }
    ClassScore& cs = rep.per_class[i];
    cs.present = (tp + fp + fn) > 0;
    if (cs.present) {
      cs.f1 = 100.0 * 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
      cs.iou = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
  }

  // foreground mean over classes that actually occur
  int fg = std::min(k, kForegroundClasses);
  double f1_sum = 0.0, iou_sum = 0.0;
  int n_present = 0;
  for (int i = 0; i < fg; ++i) {
    if (!rep.per_class[i].present) continue;
    f1_sum += rep.per_class[i].f1;
    iou_sum += rep.per_class[i].iou;
    ++n_present;
  }
  if (n_present > 0) {
    rep.mf1 = f1_sum / n_present;
    rep.miou = iou_sum / n_present;
  }
  return rep;
}

}  // namespace manet
