#pragma once

#include <cstdint>
#include <vector>

#include "ubna/batchnorm.hpp"
#include "ubna/nncore.hpp"

namespace ubna {

enum class LayerKind { InputBN, Linear, BN, ReLU, SoftmaxHead };

struct Layer {
  LayerKind kind;
  LinearLayer linear;  // Linear only
  BNLayerState bn;     // InputBN / BN only
};

/// Forward-only per-pixel segmenter. BN layers (InputBN counts) are numbered
/// 1..L in forward order; exactly one SoftmaxHead sits last.
struct Model {
  std::vector<Layer> layers;
  int input_channels = 0;
  int class_count = 0;
  std::vector<int> hidden_widths;

  int bn_layer_count() const;
  std::vector<const BNLayerState*> bn_layers() const;
  std::vector<BNLayerState*> bn_layers();
  void validate() const;
};

struct ModelConfig {
  int input_channels = 3;
  int class_count = 4;
  std::vector<int> hidden_widths = {16, 16};
  double eps = 1e-5;
  std::uint64_t seed = 1;
};

/// InputBN -> [Linear -> BN -> ReLU] per hidden width -> Linear -> SoftmaxHead.
Model make_model(const ModelConfig& cfg);

/// InputBN followed directly by the softmax head; class_count == channels.
Model make_input_bn_model(Index channels, double eps = 1e-5);

/// Inference forward: BN layers use their running statistics; no mutation.
FeatureBatch forward_eval(const Model& model, const FeatureBatch& x);

/// Training-mode forward: BN layers normalize with batch stats and update
/// their running statistics with momentum `eta`.
FeatureBatch forward_train(Model& model, const FeatureBatch& x, double eta);

/// Adaptation forward: BN layer l uses Adapt mode with eta_per_layer[l-1].
FeatureBatch forward_adapt(Model& model, const FeatureBatch& x,
                           const std::vector<double>& eta_per_layer,
                           AdaptNormalize normalize_with);

/// Forward in which every BN layer normalizes with the current batch's own
/// statistics; running statistics are neither read nor written.
FeatureBatch forward_batch_stats(const Model& model, const FeatureBatch& x);

/// Bitwise equality of every parameter, statistic and descriptor field.
bool models_identical(const Model& a, const Model& b);

}  // namespace ubna
