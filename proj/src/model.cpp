#include "ubna/model.hpp"

#include <cmath>
#include <random>

namespace ubna {

int Model::bn_layer_count() const {
  int n = 0;
  for (const Layer& l : layers)
    if (l.kind == LayerKind::InputBN || l.kind == LayerKind::BN) ++n;
  return n;
}

std::vector<const BNLayerState*> Model::bn_layers() const {
  std::vector<const BNLayerState*> out;
  for (const Layer& l : layers)
    if (l.kind == LayerKind::InputBN || l.kind == LayerKind::BN) out.push_back(&l.bn);
  return out;
}

std::vector<BNLayerState*> Model::bn_layers() {
  std::vector<BNLayerState*> out;
  for (Layer& l : layers)
    if (l.kind == LayerKind::InputBN || l.kind == LayerKind::BN) out.push_back(&l.bn);
  return out;
}

void Model::validate() const {
  if (layers.empty() || layers.back().kind != LayerKind::SoftmaxHead)
    throw InvariantViolation("Model: last layer must be the softmax head");
  int heads = 0, bn_index = 0;
  for (const Layer& l : layers) {
    if (l.kind == LayerKind::SoftmaxHead) ++heads;
    if (l.kind == LayerKind::InputBN || l.kind == LayerKind::BN) {
      ++bn_index;
      if (l.bn.layer_index != bn_index)
        throw InvariantViolation("Model: BN layer indices not 1..L in forward order");
      l.bn.validate();
    }
  }
  if (heads != 1) throw InvariantViolation("Model: exactly one softmax head required");
}

Model make_model(const ModelConfig& cfg) {
  if (cfg.input_channels < 1 || cfg.class_count < 2)
    throw InvalidInput("make_model: need >= 1 input channel and >= 2 classes");

  std::mt19937_64 rng(cfg.seed);
  auto make_linear = [&rng](int in, int out) {
    LinearLayer l;
    // He-style init, seeded.
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(in)));
    l.weight.resize(out, in);
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
    l.bias = Eigen::VectorXf::Zero(out);
    return l;
  };

  Model m;
  m.input_channels = cfg.input_channels;
  m.class_count = cfg.class_count;
  m.hidden_widths = cfg.hidden_widths;

  int bn_index = 0;
  Layer input_bn{LayerKind::InputBN, {}, BNLayerState::fresh(cfg.input_channels, cfg.eps)};
  input_bn.bn.layer_index = ++bn_index;
  m.layers.push_back(std::move(input_bn));

  int prev = cfg.input_channels;
  for (int width : cfg.hidden_widths) {
    if (width < 1) throw InvalidInput("make_model: hidden width must be >= 1");
    m.layers.push_back({LayerKind::Linear, make_linear(prev, width), {}});
    Layer bn{LayerKind::BN, {}, BNLayerState::fresh(width, cfg.eps)};
    bn.bn.layer_index = ++bn_index;
    m.layers.push_back(std::move(bn));
    m.layers.push_back({LayerKind::ReLU, {}, {}});
    prev = width;
  }
  m.layers.push_back({LayerKind::Linear, make_linear(prev, cfg.class_count), {}});
  m.layers.push_back({LayerKind::SoftmaxHead, {}, {}});
  m.validate();
  return m;
}

Model make_input_bn_model(Index channels, double eps) {
  Model m;
  m.input_channels = static_cast<int>(channels);
  m.class_count = static_cast<int>(channels);
  Layer bn{LayerKind::InputBN, {}, BNLayerState::fresh(channels, eps)};
  bn.bn.layer_index = 1;
  m.layers.push_back(std::move(bn));
  m.layers.push_back({LayerKind::SoftmaxHead, {}, {}});
  m.validate();
  return m;
}

namespace {

template <typename BNFn>
FeatureBatch run_layers(const std::vector<Layer>& layers, const FeatureBatch& x, BNFn&& bn_fn) {
  FeatureBatch cur = x;
  for (const Layer& layer : layers) {
    switch (layer.kind) {
      case LayerKind::InputBN:
      case LayerKind::BN:
        cur = bn_fn(layer, cur);
        break;
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
  return cur;
}

}  // namespace

FeatureBatch forward_eval(const Model& model, const FeatureBatch& x) {
  return run_layers(model.layers, x, [](const Layer& layer, const FeatureBatch& in) {
    return bn_normalize(in, layer.bn.running_mean, layer.bn.running_var, layer.bn);
  });
}

FeatureBatch forward_train(Model& model, const FeatureBatch& x, double eta) {
  FeatureBatch cur = x;
  const BNMode mode = BNMode::train(eta);
  for (Layer& layer : model.layers) {
    switch (layer.kind) {
      case LayerKind::InputBN:
      case LayerKind::BN:
        cur = bn_forward(cur, layer.bn, mode);
        break;
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
  return cur;
}

FeatureBatch forward_adapt(Model& model, const FeatureBatch& x,
                           const std::vector<double>& eta_per_layer,
                           AdaptNormalize normalize_with) {
  if (static_cast<int>(eta_per_layer.size()) != model.bn_layer_count())
    throw InvalidInput("forward_adapt: one momentum per BN layer required");
  FeatureBatch cur = x;
  int bn_seen = 0;
  for (Layer& layer : model.layers) {
    switch (layer.kind) {
      case LayerKind::InputBN:
      case LayerKind::BN:
        cur = bn_forward(cur, layer.bn,
                         BNMode::adapt(eta_per_layer[bn_seen++], normalize_with));
        break;
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
  return cur;
}

FeatureBatch forward_batch_stats(const Model& model, const FeatureBatch& x) {
  if (x.positions() < 2)
    throw InvalidInput("forward_batch_stats: need B*H*W >= 2 for batch statistics");
  return run_layers(model.layers, x, [](const Layer& layer, const FeatureBatch& in) {
    const ChannelVector m = batch_mean(in);
    const ChannelVector v = batch_var(in, m);
    return bn_normalize(in, m, v, layer.bn);
  });
}

namespace {

template <typename M>
bool matrices_identical(const M& a, const M& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  // memcmp-style comparison; NaN-free by invariant so == is enough.
  return (a.array() == b.array()).all();
}

}  // namespace

bool models_identical(const Model& a, const Model& b) {
  if (a.layers.size() != b.layers.size() || a.input_channels != b.input_channels ||
      a.class_count != b.class_count || a.hidden_widths != b.hidden_widths)
    return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const Layer& la = a.layers[i];
    const Layer& lb = b.layers[i];
    if (la.kind != lb.kind) return false;
    if (la.kind == LayerKind::Linear) {
      if (!matrices_identical(la.linear.weight, lb.linear.weight)) return false;
      if (!matrices_identical(la.linear.bias, lb.linear.bias)) return false;
    }
    if (la.kind == LayerKind::InputBN || la.kind == LayerKind::BN) {
      if (!matrices_identical(la.bn.gamma, lb.bn.gamma)) return false;
      if (!matrices_identical(la.bn.beta, lb.bn.beta)) return false;
      if (!matrices_identical(la.bn.running_mean, lb.bn.running_mean)) return false;
      if (!matrices_identical(la.bn.running_var, lb.bn.running_var)) return false;
      if (la.bn.eps != lb.bn.eps || la.bn.layer_index != lb.bn.layer_index) return false;
    }
  }
  return true;
}

}  // namespace ubna
