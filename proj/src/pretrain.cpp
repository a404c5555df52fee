#include "ubna/pretrain.hpp"

#include <cmath>
#include <fstream>

#include "ubna/sampler.hpp"
#include "ubna/util.hpp"

namespace ubna {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::VectorXd resolve_weights(const Eigen::VectorXd& weights, Index num_classes) {
  if (weights.size() == 0) return Eigen::VectorXd::Ones(num_classes);
  if (weights.size() != num_classes)
    throw InvalidInput("class_weights length does not match class count");
  if ((weights.array() < 0.0).any() || weights.maxCoeff() <= 0.0)
    throw InvalidInput("class_weights must be >= 0 and not all zero");
  return weights;
}

struct ForwardCache {
  std::vector<FeatureBatch> inputs;      // input of each layer
  std::vector<ChannelVector> bn_mean;    // per layer slot; BN layers only
  std::vector<ChannelVector> bn_var;
  FeatureBatch probs;
};

// Train-mode forward (batch-statistics normalization) that keeps what the
// backward pass needs. Leaves the model untouched.
ForwardCache forward_cached(const Model& model, const FeatureBatch& batch) {
  ForwardCache cache;
  cache.bn_mean.resize(model.layers.size());
  cache.bn_var.resize(model.layers.size());
  FeatureBatch cur = batch;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    cache.inputs.push_back(cur);
    switch (layer.kind) {
      case LayerKind::InputBN:
      case LayerKind::BN: {
        cache.bn_mean[i] = batch_mean(cur);
        cache.bn_var[i] = batch_var(cur, cache.bn_mean[i]);
        cur = bn_normalize(cur, cache.bn_mean[i], cache.bn_var[i], layer.bn);
        break;
      }
      case LayerKind::Linear:
        cur = linear_forward(layer.linear, cur);
        break;
      case LayerKind::ReLU:
        cur = relu(cur);
        break;
      case LayerKind::SoftmaxHead:
        cur = softmax_channels(cur);
        break;
    }
  }
  cache.probs = cur;
  return cache;
}

}  // namespace

void PretrainConfig::validate(int num_classes) const {
  if (steps < 0) throw InvalidInput("PretrainConfig: steps must be >= 0");
  if (learning_rate <= 0.0) throw InvalidInput("PretrainConfig: learning_rate must be > 0");
  if (batch_size < 2) throw InvalidInput("PretrainConfig: batch_size must be >= 2");
  if (bn_momentum <= 0.0 || bn_momentum > 1.0)
    throw InvalidInput("PretrainConfig: bn_momentum must be in (0,1]");
  resolve_weights(class_weights, num_classes);
}

double cross_entropy_loss(const FeatureBatch& probs, const LabelMap& labels,
                          const Eigen::VectorXd& weights) {
  if (probs.positions() != labels.positions())
    throw InvalidInput("cross_entropy_loss: probs/labels shape mismatch");
  const Index classes = probs.channels();
  const Eigen::VectorXd w = resolve_weights(weights, classes);
  double sum = 0.0;
  for (Index r = 0; r < probs.positions(); ++r) {
    const int t = labels.ids(r);
    if (t < 0 || t >= classes) throw InvalidInput("cross_entropy_loss: label id out of range");
    const double p = std::max(static_cast<double>(probs.matrix()(r, t)), kProbFloor);
    sum += w(t) * std::log(p);
  }
  return -sum / static_cast<double>(probs.positions());
}

Gradients backward_pass(const Model& model, const FeatureBatch& batch,
                        const LabelMap& labels, const PretrainConfig& cfg) {
  model.validate();
  const Eigen::VectorXd w = resolve_weights(cfg.class_weights, model.class_count);
  const ForwardCache cache = forward_cached(model, batch);
  const Index n = batch.positions();

  Gradients grads;
  grads.layers.resize(model.layers.size());

  // Joint softmax + weighted cross-entropy gradient w.r.t. the logits:
  // dJ/dz_s = (w_t / N) * (y_s - [s == t]), zero where the floor clips.
  Eigen::ArrayXXd g(n, model.class_count);
  for (Index r = 0; r < n; ++r) {
    const int t = labels.ids(r);
    if (t < 0 || t >= model.class_count)
      throw InvalidInput("backward_pass: label id out of range");
    const double yt = cache.probs.matrix()(r, t);
    if (yt <= kProbFloor) {
      g.row(r).setZero();
      continue;
    }
    g.row(r) = cache.probs.matrix().row(r).cast<double>().array() * (w(t) / n);
    g(r, t) -= w(t) / n;
  }

  for (std::size_t idx = model.layers.size(); idx-- > 0;) {
    const Layer& layer = model.layers[idx];
    const FeatureBatch& input = cache.inputs[idx];
    LayerGrads& lg = grads.layers[idx];
    switch (layer.kind) {
      case LayerKind::SoftmaxHead:
        break;  // folded into the loss gradient above
      case LayerKind::ReLU: {
        g *= (input.matrix().array() > 0.0f).cast<double>();
        break;
      }
      case LayerKind::Linear: {
        const Eigen::MatrixXd x = input.matrix().cast<double>();
        lg.dweight.noalias() = g.matrix().transpose() * x;
        lg.dbias = g.colwise().sum();
        g = (g.matrix() * layer.linear.weight.cast<double>()).array();
        break;
      }
      case LayerKind::InputBN:
      case LayerKind::BN: {
        // Full batch-statistics backward: gradients flow through x_hat and
        // through the batch mean and variance.
        const Eigen::ArrayXXd x = input.matrix().cast<double>().array();
        const Eigen::Array<double, 1, Eigen::Dynamic> mu = cache.bn_mean[idx].transpose();
        const Eigen::Array<double, 1, Eigen::Dynamic> invstd =
            (cache.bn_var[idx].transpose().array() + layer.bn.eps).rsqrt();
        const Eigen::Array<double, 1, Eigen::Dynamic> gamma =
            layer.bn.gamma.cast<double>().transpose();

        Eigen::ArrayXXd centered = x.rowwise() - mu;
        Eigen::ArrayXXd xhat = centered.rowwise() * invstd;

        lg.dgamma = (g * xhat).colwise().sum();
        lg.dbeta = g.colwise().sum();

        const Eigen::ArrayXXd gxhat = g.rowwise() * gamma;
        const Eigen::Array<double, 1, Eigen::Dynamic> dvar =
            (gxhat * centered).colwise().sum() * (-0.5) * invstd.cube();
        const Eigen::Array<double, 1, Eigen::Dynamic> dmu =
            gxhat.colwise().sum() * (-invstd) +
            dvar * (-2.0 / n) * centered.colwise().sum();

        g = gxhat.rowwise() * invstd;
        g += centered.rowwise() * (dvar * (2.0 / n));
        g.rowwise() += dmu * (1.0 / n);
        break;
      }
    }
  }
  return grads;
}

void apply_sgd(Model& model, const Gradients& grads, double learning_rate) {
  if (grads.layers.size() != model.layers.size())
    throw InvalidInput("apply_sgd: gradient/model layer mismatch");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& layer = model.layers[i];
    const LayerGrads& lg = grads.layers[i];
    if (layer.kind == LayerKind::Linear) {
      layer.linear.weight -= (learning_rate * lg.dweight).cast<float>();
      layer.linear.bias -= (learning_rate * lg.dbias).cast<float>();
    } else if (layer.kind == LayerKind::InputBN || layer.kind == LayerKind::BN) {
      layer.bn.gamma -= (learning_rate * lg.dgamma).cast<float>();
      layer.bn.beta -= (learning_rate * lg.dbeta).cast<float>();
    }
  }
}

PretrainResult pretrain(Model& model, const DomainDataset& source, const PretrainConfig& cfg) {
  model.validate();
  cfg.validate(model.class_count);
  if (source.size() < 1) throw InvalidInput("pretrain: empty source dataset");

  PretrainResult result;
  if (cfg.steps == 0) return result;

  const Eigen::VectorXd weights = resolve_weights(cfg.class_weights, model.class_count);
  EpochSampler sampler(source.size(), cfg.seed);

  for (int step = 1; step <= cfg.steps; ++step) {
    const std::vector<int> indices = sampler.next_batch(cfg.batch_size);
    auto [batch, labels] = assemble_batch(source, indices);

    double loss = 0.0;
    try {
      const ForwardCache cache = forward_cached(model, batch);
      loss = cross_entropy_loss(cache.probs, labels, weights);
      if (!std::isfinite(loss)) throw TrainingFailure(step, "loss is not finite");

      // Track running statistics with the batch stats this forward used.
      if (cfg.record_batch_stats) result.step_stats.emplace_back();
      for (std::size_t i = 0; i < model.layers.size(); ++i) {
        Layer& layer = model.layers[i];
        if (layer.kind != LayerKind::InputBN && layer.kind != LayerKind::BN) continue;
        layer.bn.running_mean =
            (1.0 - cfg.bn_momentum) * layer.bn.running_mean + cfg.bn_momentum * cache.bn_mean[i];
        layer.bn.running_var =
            (1.0 - cfg.bn_momentum) * layer.bn.running_var + cfg.bn_momentum * cache.bn_var[i];
        if (cfg.record_batch_stats) {
          result.step_stats.back().mean.push_back(cache.bn_mean[i]);
          result.step_stats.back().var.push_back(cache.bn_var[i]);
        }
      }

      // Batch pixel accuracy from the probabilities already in hand.
      Index correct = 0;
      for (Index r = 0; r < batch.positions(); ++r) {
        Index best = 0;
        cache.probs.matrix().row(r).maxCoeff(&best);
        if (static_cast<int>(best) == labels.ids(r)) ++correct;
      }

      const Gradients grads = backward_pass(model, batch, labels, cfg);
      apply_sgd(model, grads, cfg.learning_rate);

      result.log.push_back(
          {step, loss, static_cast<double>(correct) / static_cast<double>(batch.positions())});
    } catch (const InvariantViolation& e) {
      throw TrainingFailure(step, e.what());
    }
  }
  return result;
}

void write_train_log_csv(const std::vector<TrainLogEntry>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_train_log_csv: cannot open " + path);
  out << "step,loss,accuracy\n";
  for (const TrainLogEntry& e : log)
    out << e.step << "," << format_double(e.loss) << "," << format_double(e.accuracy) << "\n";
}

}  // namespace ubna
