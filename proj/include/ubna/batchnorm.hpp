#pragma once

#include <Eigen/Dense>

#include "ubna/nncore.hpp"

namespace ubna {

/// Which statistics normalize the activations during an Adapt step. Running
/// stats change first either way; the choice only affects what flows to
/// deeper layers.
enum class AdaptNormalize { PostUpdateRunning, BatchStats };

/// State of one BN layer: learnable scale/shift (frozen during adaptation)
/// plus the tracked running statistics used at inference.
struct BNLayerState {
  Eigen::VectorXf gamma;
  Eigen::VectorXf beta;
  ChannelVector running_mean;
  ChannelVector running_var;
  double eps = 1e-5;
  int layer_index = 0;  // 1-based position among the model's BN layers

  static BNLayerState fresh(Index channels, double eps = 1e-5);

  Index channels() const { return running_mean.size(); }
  void validate() const;
};

struct BNMode {
  enum class Kind { Eval, Train, Adapt };

  Kind kind = Kind::Eval;
  double eta = 0.0;  // Train momentum or Adapt effective momentum
  AdaptNormalize normalize_with = AdaptNormalize::PostUpdateRunning;

  static BNMode eval() { return {}; }
  static BNMode train(double eta);
  static BNMode adapt(double eta_eff,
                      AdaptNormalize normalize_with = AdaptNormalize::PostUpdateRunning);
};

/// f_hat = gamma * (f - mean) / sqrt(var + eps) + beta, per channel.
FeatureBatch bn_normalize(const FeatureBatch& x, const ChannelVector& mean,
                          const ChannelVector& var, const BNLayerState& state);

/// One BN forward pass under `mode`:
///  - Eval: normalize with running stats, state untouched.
///  - Train(eta): normalize with batch stats, then EMA-update running stats.
///  - Adapt(eta_eff): EMA-update running stats with eta_eff, then normalize
///    with the post-update running stats (or batch stats, per mode).
FeatureBatch bn_forward(const FeatureBatch& x, BNLayerState& state, const BNMode& mode);

/// Replace the running statistics wholesale (UBNA initialization, AdaBN).
void bn_set_stats(BNLayerState& state, const ChannelVector& mean, const ChannelVector& var);

}  // namespace ubna
