#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ubna/datagen.hpp"
#include "ubna/model.hpp"

namespace ubna {

struct PretrainConfig {
  int steps = 1000;  // K
  double learning_rate = 0.05;
  int batch_size = 8;
  double bn_momentum = 0.1;       // eta for running-statistics tracking
  Eigen::VectorXd class_weights;  // empty means uniform weights of 1
  std::uint64_t seed = 0;
  bool record_batch_stats = false;

  void validate(int num_classes) const;
};

struct TrainLogEntry {
  int step;
  double loss;
  double accuracy;  // pixel accuracy on the training batch
};

/// Batch statistics one training step exposed to each BN layer, in layer
/// order; recorded only when PretrainConfig::record_batch_stats is set.
struct StepStats {
  std::vector<ChannelVector> mean;
  std::vector<ChannelVector> var;
};

struct PretrainResult {
  std::vector<TrainLogEntry> log;
  std::vector<StepStats> step_stats;
};

/// Class-weighted cross-entropy, averaged over batch and pixels, with the
/// log argument floored at 1e-12.
double cross_entropy_loss(const FeatureBatch& probs, const LabelMap& labels,
                          const Eigen::VectorXd& weights);

struct LayerGrads {
  Eigen::MatrixXd dweight;  // Linear
  Eigen::VectorXd dbias;
  Eigen::VectorXd dgamma;  // BN
  Eigen::VectorXd dbeta;
};

struct Gradients {
  std::vector<LayerGrads> layers;  // parallel to model.layers
};

/// Analytic gradients of the cross-entropy loss w.r.t. all Linear weights
/// and biases and all BN gamma/beta, under train-mode (batch statistics)
/// normalization. Includes the full BN backward through the batch mean and
/// variance. Does not mutate the model.
Gradients backward_pass(const Model& model, const FeatureBatch& batch,
                        const LabelMap& labels, const PretrainConfig& cfg);

void apply_sgd(Model& model, const Gradients& grads, double learning_rate);

/// K steps of plain SGD with BN running statistics tracked at momentum
/// bn_momentum. Deterministic per seed. Throws TrainingFailure when the
/// loss stops being finite.
PretrainResult pretrain(Model& model, const DomainDataset& source, const PretrainConfig& cfg);

void write_train_log_csv(const std::vector<TrainLogEntry>& log, const std::string& path);

}  // namespace ubna
