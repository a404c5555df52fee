#include "ubna/batchnorm.hpp"

namespace ubna {

BNLayerState BNLayerState::fresh(Index channels, double eps) {
  BNLayerState s;
  s.gamma = Eigen::VectorXf::Ones(channels);
  s.beta = Eigen::VectorXf::Zero(channels);
  s.running_mean = ChannelVector::Zero(channels);
  s.running_var = ChannelVector::Ones(channels);
  s.eps = eps;
  return s;
}

void BNLayerState::validate() const {
  const Index c = running_mean.size();
  if (gamma.size() != c || beta.size() != c || running_var.size() != c)
    throw InvariantViolation("BNLayerState: vector lengths disagree");
  if (eps <= 0.0) throw InvariantViolation("BNLayerState: eps must be > 0");
  if ((running_var.array() < 0.0).any())
    throw InvariantViolation("BNLayerState: negative running variance");
}

BNMode BNMode::train(double eta) {
  if (eta < 0.0 || eta > 1.0) throw InvalidInput("BNMode::train: eta outside [0,1]");
  BNMode m;
  m.kind = Kind::Train;
  m.eta = eta;
  return m;
}

BNMode BNMode::adapt(double eta_eff, AdaptNormalize normalize_with) {
  if (eta_eff < 0.0 || eta_eff > 1.0) throw InvalidInput("BNMode::adapt: eta outside [0,1]");
  BNMode m;
  m.kind = Kind::Adapt;
  m.eta = eta_eff;
  m.normalize_with = normalize_with;
  return m;
}

FeatureBatch bn_normalize(const FeatureBatch& x, const ChannelVector& mean,
                          const ChannelVector& var, const BNLayerState& state) {
  if (mean.size() != x.channels() || var.size() != x.channels() ||
      state.channels() != x.channels())
    throw InvalidInput("bn_normalize: channel counts disagree");
  if ((var.array() < 0.0).any())
    throw InvariantViolation("bn_normalize: negative variance entry");

  const ChannelVector scale =
      state.gamma.cast<double>().array() * (var.array() + state.eps).rsqrt();
  const ChannelVector shift =
      state.beta.cast<double>().array() - mean.array() * scale.array();

  Eigen::ArrayXXd out = x.matrix().cast<double>().array();
  out.rowwise() *= scale.transpose().array();
  out.rowwise() += shift.transpose().array();
  return FeatureBatch::from_matrix(x.batch(), x.height(), x.width(),
                                   out.cast<float>().matrix());
}

namespace {

void ema_update(BNLayerState& state, double eta, const ChannelVector& m_hat,
                const ChannelVector& v_hat) {
  state.running_mean = (1.0 - eta) * state.running_mean + eta * m_hat;
  state.running_var = (1.0 - eta) * state.running_var + eta * v_hat;
}

}  // namespace

FeatureBatch bn_forward(const FeatureBatch& x, BNLayerState& state, const BNMode& mode) {
  if (x.channels() != state.channels())
    throw InvalidInput("bn_forward: input channels do not match state");

  if (mode.kind == BNMode::Kind::Eval)
    return bn_normalize(x, state.running_mean, state.running_var, state);

  if (x.positions() < 2)
    throw InvalidInput("bn_forward: Train/Adapt need B*H*W >= 2");

  const ChannelVector m_hat = batch_mean(x);
  const ChannelVector v_hat = batch_var(x, m_hat);

  if (mode.kind == BNMode::Kind::Train) {
    FeatureBatch out = bn_normalize(x, m_hat, v_hat, state);
    ema_update(state, mode.eta, m_hat, v_hat);
    return out;
  }

  // Adapt: update first, so the k-th forward sees the k-th state.
  ema_update(state, mode.eta, m_hat, v_hat);
  if (mode.normalize_with == AdaptNormalize::BatchStats)
    return bn_normalize(x, m_hat, v_hat, state);
  return bn_normalize(x, state.running_mean, state.running_var, state);
}

void bn_set_stats(BNLayerState& state, const ChannelVector& mean, const ChannelVector& var) {
  if (mean.size() != state.channels() || var.size() != state.channels())
    throw InvalidInput("bn_set_stats: channel counts disagree");
  if ((var.array() < 0.0).any()) throw InvalidInput("bn_set_stats: negative variance");
  state.running_mean = mean;
  state.running_var = var;
}

}  // namespace ubna
