#pragma once

#include <Eigen/Dense>

#include "ubna/errors.hpp"

namespace ubna {

using Index = Eigen::Index;

/// Per-channel statistic or parameter vector, always 64-bit.
using ChannelVector = Eigen::VectorXd;

/// A batch of activations with shape (B, H, W, C), stored as a row-major
/// (B*H*W) x C matrix of 32-bit floats. Row order is b-major, then h, then w,
/// so every row is the channel vector of one spatial position.
class FeatureBatch {
public:
  using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FeatureBatch() = default;

  FeatureBatch(Index batch, Index height, Index width, Index channels)
      : batch_(batch), height_(height), width_(width) {
    if (batch < 1 || height < 1 || width < 1 || channels < 1)
      throw InvalidInput("FeatureBatch dimensions must all be >= 1");
    values_.setZero(batch * height * width, channels);
  }

  static FeatureBatch from_matrix(Index batch, Index height, Index width, Storage values);

  Index batch() const { return batch_; }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return values_.cols(); }
  Index positions() const { return values_.rows(); }  // B*H*W

  Index row_of(Index b, Index h, Index w) const { return (b * height_ + h) * width_ + w; }

  float operator()(Index b, Index h, Index w, Index c) const {
    return values_(row_of(b, h, w), c);
  }
  float& operator()(Index b, Index h, Index w, Index c) {
    return values_(row_of(b, h, w), c);
  }

  const Storage& matrix() const { return values_; }
  Storage& matrix() { return values_; }

  bool same_shape(const FeatureBatch& other) const {
    return batch_ == other.batch_ && height_ == other.height_ &&
           width_ == other.width_ && channels() == other.channels();
  }

  bool all_finite() const { return values_.allFinite(); }

private:
  Index batch_ = 0, height_ = 0, width_ = 0;
  Storage values_;
};

/// Per-pixel class ids with shape (B, H, W); row order matches FeatureBatch.
struct LabelMap {
  Index batch = 0, height = 0, width = 0;
  int num_classes = 0;
  Eigen::VectorXi ids;

  LabelMap() = default;
  LabelMap(Index b, Index h, Index w, int classes)
      : batch(b), height(h), width(w), num_classes(classes) {
    ids.setZero(b * h * w);
  }

  Index positions() const { return ids.size(); }
  Index row_of(Index b, Index h, Index w) const { return (b * height + h) * width + w; }
  int operator()(Index b, Index h, Index w) const { return ids(row_of(b, h, w)); }
  int& operator()(Index b, Index h, Index w) { return ids(row_of(b, h, w)); }
};

/// 1x1 (per-pixel) linear map: y = W x + b with W of shape C_out x C_in.
struct LinearLayer {
  Eigen::MatrixXf weight;
  Eigen::VectorXf bias;

  Index in_channels() const { return weight.cols(); }
  Index out_channels() const { return weight.rows(); }
};

/// Mean over all batch and spatial positions, per channel, accumulated in
/// 64-bit.
ChannelVector batch_mean(const FeatureBatch& x);

/// Biased (divide by B*H*W) per-channel variance around `mean`.
ChannelVector batch_var(const FeatureBatch& x, const ChannelVector& mean);

FeatureBatch linear_forward(const LinearLayer& layer, const FeatureBatch& x);

FeatureBatch relu(const FeatureBatch& x);

/// Per-pixel softmax over the channel dimension, max-subtracted for
/// stability. Each pixel's channel values sum to 1.
FeatureBatch softmax_channels(const FeatureBatch& x);

/// Throws InvariantViolation when `x` contains NaN or Inf.
void require_finite(const FeatureBatch& x, const char* what);

}  // namespace ubna
