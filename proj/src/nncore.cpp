#include "ubna/nncore.hpp"

#include <string>

namespace ubna {

void require_finite(const FeatureBatch& x, const char* what) {
  if (!x.all_finite())
    throw InvariantViolation(std::string(what) + ": non-finite activation values");
}

FeatureBatch FeatureBatch::from_matrix(Index batch, Index height, Index width,
                                       Storage values) {
  FeatureBatch out(batch, height, width, values.cols() > 0 ? values.cols() : 1);
  if (values.rows() != batch * height * width || values.cols() < 1)
    throw InvalidInput("FeatureBatch::from_matrix: storage shape does not match dims");
  out.values_ = std::move(values);
  require_finite(out, "FeatureBatch::from_matrix");
  return out;
}

ChannelVector batch_mean(const FeatureBatch& x) {
  if (x.positions() < 1) throw InvalidInput("batch_mean: empty batch");
  return x.matrix().cast<double>().colwise().sum() / static_cast<double>(x.positions());
}

ChannelVector batch_var(const FeatureBatch& x, const ChannelVector& mean) {
  if (x.positions() < 1) throw InvalidInput("batch_var: empty batch");
  if (mean.size() != x.channels())
    throw InvalidInput("batch_var: mean length does not match channel count");
  Eigen::ArrayXXd centered = x.matrix().cast<double>().array();
  centered.rowwise() -= mean.transpose().array();
  return centered.square().colwise().sum() / static_cast<double>(x.positions());
}

FeatureBatch linear_forward(const LinearLayer& layer, const FeatureBatch& x) {
  if (x.channels() != layer.in_channels())
    throw InvalidInput("linear_forward: input channels do not match layer");
  FeatureBatch::Storage out(x.positions(), layer.out_channels());
  out.noalias() = x.matrix() * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  FeatureBatch y = FeatureBatch::from_matrix(x.batch(), x.height(), x.width(), std::move(out));
  return y;
}

FeatureBatch relu(const FeatureBatch& x) {
  return FeatureBatch::from_matrix(x.batch(), x.height(), x.width(),
                                   x.matrix().cwiseMax(0.0f));
}

FeatureBatch softmax_channels(const FeatureBatch& x) {
  Eigen::ArrayXXd logits = x.matrix().cast<double>().array();
  logits.colwise() -= logits.rowwise().maxCoeff();
  Eigen::ArrayXXd expv = logits.exp();
  expv.colwise() /= expv.rowwise().sum();
  return FeatureBatch::from_matrix(x.batch(), x.height(), x.width(),
                                   expv.cast<float>().matrix());
}

}  // namespace ubna
