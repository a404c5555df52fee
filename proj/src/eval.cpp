#include "ubna/eval.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ubna/util.hpp"

namespace ubna {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes())
    throw InvalidInput("ConfusionMatrix: cannot merge different class counts");
  counts += other.counts;
  return *this;
}

ClassSubset ClassSubset::all(int num_classes) {
  ClassSubset s;
  for (int i = 0; i < num_classes; ++i) s.class_ids.push_back(i);
  return s;
}

void ClassSubset::validate(int num_classes) const {
  if (class_ids.empty()) throw InvalidInput("ClassSubset: empty subset");
  for (int id : class_ids)
    if (id < 0 || id >= num_classes) throw InvalidInput("ClassSubset: class id out of range");
}

LabelMap argmax_labels(const FeatureBatch& probs) {
  LabelMap out(probs.batch(), probs.height(), probs.width(),
               static_cast<int>(probs.channels()));
  for (Index r = 0; r < probs.positions(); ++r) {
    Index best = 0;
    probs.matrix().row(r).maxCoeff(&best);
    out.ids(r) = static_cast<int>(best);
  }
  return out;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth) {
  if (pred.positions() != truth.positions() || pred.batch != truth.batch ||
      pred.height != truth.height || pred.width != truth.width)
    throw InvalidInput("confusion: shape mismatch");
  ConfusionMatrix cm(truth.num_classes);
  for (Index i = 0; i < truth.positions(); ++i) {
    const int t = truth.ids(i);
    const int p = pred.ids(i);
    if (t < 0 || t >= cm.num_classes() || p < 0 || p >= cm.num_classes())
      throw InvalidInput("confusion: label id out of range");
    ++cm.counts(t, p);
  }
  return cm;
}

MiouResult miou(const ConfusionMatrix& cm, const ClassSubset& subset) {
  subset.validate(cm.num_classes());
  MiouResult result;
  double sum = 0.0;
  int counted = 0;
  for (int s : subset.class_ids) {
    const std::int64_t tp = cm.counts(s, s);
    const std::int64_t fn = cm.counts.row(s).sum() - tp;
    const std::int64_t fp = cm.counts.col(s).sum() - tp;
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) {
      result.iou.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    result.iou.push_back(iou);
    sum += iou;
    ++counted;
  }
  if (counted == 0)
    throw UndefinedMetric("miou: every subset class has an empty denominator");
  result.miou = sum / counted;
  return result;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw UndefinedMetric("accuracy: empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

ConfusionMatrix evaluate_model(const Model& model, const DomainDataset& data) {
  if (data.size() < 1) throw InvalidInput("evaluate_model: empty dataset");
  ConfusionMatrix cm(model.class_count);
  for (int i = 0; i < data.size(); ++i) {
    const Sample s = data.generate(i);
    const FeatureBatch probs = forward_eval(model, s.image);
    cm += confusion(argmax_labels(probs), s.labels);
  }
  return cm;
}

double evaluate_miou(const Model& model, const DomainDataset& data) {
  return miou(evaluate_model(model, data), ClassSubset::all(model.class_count)).miou;
}

std::string render_iou_table(const MiouResult& result, const ClassSubset& subset) {
  std::ostringstream out;
  out << "class      IoU\n";
  char buf[64];
  for (std::size_t i = 0; i < subset.class_ids.size(); ++i) {
    if (std::isnan(result.iou[i]))
      std::snprintf(buf, sizeof(buf), "%-10d (absent)\n", subset.class_ids[i]);
    else
      std::snprintf(buf, sizeof(buf), "%-10d %.4f\n", subset.class_ids[i], result.iou[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU       %.4f  (%d classes)\n", result.miou,
                static_cast<int>(subset.class_ids.size()));
  out << buf;
  return out.str();
}

void write_report_csv(const MiouResult& result, const ClassSubset& subset,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_report_csv: cannot open " + path);
  out << "class,iou\n";
  for (std::size_t i = 0; i < subset.class_ids.size(); ++i) {
    out << subset.class_ids[i] << ",";
    if (!std::isnan(result.iou[i])) out << format_double(result.iou[i]);
    out << "\n";
  }
  out << "miou," << format_double(result.miou) << "\n";
}

}  // namespace ubna
