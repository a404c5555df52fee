#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ubna/datagen.hpp"
#include "ubna/model.hpp"
#include "ubna/nncore.hpp"

namespace ubna {

struct ConfusionMatrix {
  // rows = ground truth, columns = prediction
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  explicit ConfusionMatrix(int num_classes = 0) {
    counts.setZero(num_classes, num_classes);
  }
  int num_classes() const { return static_cast<int>(counts.rows()); }
  std::int64_t total() const { return counts.sum(); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

struct ClassSubset {
  std::vector<int> class_ids;

  static ClassSubset all(int num_classes);
  void validate(int num_classes) const;
};

struct MiouResult {
  // IoU per subset class, aligned with subset.class_ids; degenerate classes
  // (zero denominator) carry NaN and are excluded from the mean.
  std::vector<double> iou;
  double miou = 0.0;
};

/// Per-pixel argmax over channels: m_i = argmax_s y_{i,s}.
LabelMap argmax_labels(const FeatureBatch& probs);

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth);

/// IoU_s = TP/(TP+FP+FN) with FP/FN counted against the full matrix; the
/// mean runs over non-degenerate subset classes only.
MiouResult miou(const ConfusionMatrix& cm, const ClassSubset& subset);

double accuracy(const ConfusionMatrix& cm);

/// Eval-mode inference over the whole dataset, one image at a time so no
/// batch statistics can leak between test images.
ConfusionMatrix evaluate_model(const Model& model, const DomainDataset& data);

/// Dataset mIoU over all classes; convenience wrapper used by traces.
double evaluate_miou(const Model& model, const DomainDataset& data);

std::string render_iou_table(const MiouResult& result, const ClassSubset& subset);

void write_report_csv(const MiouResult& result, const ClassSubset& subset,
                      const std::string& path);

}  // namespace ubna
