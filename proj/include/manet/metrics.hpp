#pragma once

#include <cstdint>
#include <vector>

namespace manet {

// Rows are ground truth, columns are prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  void add(int truth, int pred, uint64_t count = 1);  // bounds-checked
  void merge(const ConfusionMatrix& other);

  int classes() const { return classes_; }
  uint64_t at(int truth, int pred) const;
  uint64_t total() const;

 private:
  int classes_;
  std::vector<uint64_t> counts_;
};

// Per-pixel accumulation of an argmax raster against the ground truth.
void accumulate_confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          ConfusionMatrix& cm);

struct ClassScore {
  double f1 = 0.0;
  double iou = 0.0;
  bool present = false;  // seen in truth or prediction
};

// All values are percentages. mF1/mIoU average the foreground classes that
// are present in truth or prediction; absent classes are dropped from the
// mean rather than scored 0/0.
struct MetricReport {
  double oa = 0.0;
  double mf1 = 0.0;
  double miou = 0.0;
  std::vector<ClassScore> per_class;
};

MetricReport compute_metrics(const ConfusionMatrix& cm);  // throws on empty matrix

}  // namespace manet
