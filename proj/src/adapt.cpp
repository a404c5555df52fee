#include "ubna/adapt.hpp"

#include <cmath>
#include <fstream>

#include "ubna/sampler.hpp"
#include "ubna/util.hpp"

namespace ubna {

void AdaptationSchedule::validate() const {
  if (eta0 <= 0.0 || eta0 > 1.0) throw InvalidInput("AdaptationSchedule: eta0 must be in (0,1]");
  if (alpha_batch < 0.0 || alpha_layer < 0.0)
    throw InvalidInput("AdaptationSchedule: decay factors must be >= 0");
  if (num_steps < 0) throw InvalidInput("AdaptationSchedule: num_steps must be >= 0");
  if (first_step_index != 0 && first_step_index != 1)
    throw InvalidInput("AdaptationSchedule: first_step_index must be 0 or 1");
}

double momentum_at(const AdaptationSchedule& schedule, int step, int layer) {
  if (step < schedule.first_step_index)
    throw InvalidInput("momentum_at: step precedes first_step_index");
  if (layer < 1) throw InvalidInput("momentum_at: layers are numbered from 1");
  return schedule.eta0 * std::exp(-step * schedule.alpha_batch) *
         std::exp(-layer * schedule.alpha_layer);
}

AdaptationProtocol AdaptationProtocol::offline(std::uint64_t seed, int batch_size) {
  AdaptationProtocol p;
  p.kind = Kind::Offline;
  p.seed = seed;
  p.batch_size = batch_size;
  return p;
}

AdaptationProtocol AdaptationProtocol::online(int batch_size, double frame_period) {
  AdaptationProtocol p;
  p.kind = Kind::Online;
  p.batch_size = batch_size;
  p.frame_period = frame_period;
  return p;
}

AdaptationProtocol AdaptationProtocol::few_shot(std::vector<int> ids, int batch_size) {
  AdaptationProtocol p;
  p.kind = Kind::FewShot;
  p.fixed_batch_ids = std::move(ids);
  if (!p.fixed_batch_ids.empty()) p.batch_size = static_cast<int>(p.fixed_batch_ids.size());
  else p.batch_size = batch_size;
  return p;
}

namespace {

class BatchSource {
public:
  BatchSource(const DomainDataset& data, const AdaptationProtocol& protocol, int num_steps)
      : protocol_(protocol) {
    switch (protocol.kind) {
      case AdaptationProtocol::Kind::Offline:
        sampler_.emplace(data.size(), protocol.seed);
        break;
      case AdaptationProtocol::Kind::Online: {
        if (!data.temporally_ordered())
          throw ProtocolViolation("online protocol requires a temporally ordered source");
        const long needed = static_cast<long>(num_steps) * protocol.batch_size;
        if (needed > data.size())
          throw InvalidInput("online protocol: dataset too short for the requested steps");
        break;
      }
      case AdaptationProtocol::Kind::FewShot: {
        fixed_ = protocol.fixed_batch_ids;
        if (fixed_.empty())
          for (int i = 0; i < protocol.batch_size; ++i) fixed_.push_back(i);
        for (int id : fixed_)
          if (id < 0 || id >= data.size())
            throw InvalidInput("fewshot protocol: image id out of range");
        break;
      }
    }
  }

  std::vector<int> next() {
    switch (protocol_.kind) {
      case AdaptationProtocol::Kind::Offline:
        return sampler_->next_batch(protocol_.batch_size);
      case AdaptationProtocol::Kind::Online: {
        std::vector<int> batch;
        for (int i = 0; i < protocol_.batch_size; ++i) batch.push_back(cursor_++);
        return batch;
      }
      case AdaptationProtocol::Kind::FewShot:
        return fixed_;
    }
    return {};
  }

private:
  const AdaptationProtocol& protocol_;
  std::optional<EpochSampler> sampler_;
  std::vector<int> fixed_;
  int cursor_ = 0;
};

}  // namespace

AdaptationTrace ubna_adapt(Model& model, const DomainDataset& data,
                           const AdaptationSchedule& schedule,
                           const AdaptationProtocol& protocol, const EvalHook& eval_hook,
                           AdaptNormalize normalize_with) {
  model.validate();
  schedule.validate();
  if (model.bn_layer_count() < 1) throw InvalidInput("ubna_adapt: model has no BN layers");
  if (data.size() < 1) throw InvalidInput("ubna_adapt: empty adaptation set");
  if (protocol.batch_size < 1) throw InvalidInput("ubna_adapt: batch_size must be >= 1");

  const int num_layers = model.bn_layer_count();
  AdaptationTrace trace;
  BatchSource source(data, protocol, schedule.num_steps);

  for (int i = 0; i < schedule.num_steps; ++i) {
    const int step = schedule.first_step_index + i;
    TraceRecord record;
    record.step = step;
    record.eta = schedule.eta0 * std::exp(-step * schedule.alpha_batch);
    for (int l = 1; l <= num_layers; ++l)
      record.eta_per_layer.push_back(momentum_at(schedule, step, l));

    record.batch_indices = source.next();
    trace.frames_consumed += static_cast<long>(record.batch_indices.size());
    auto [batch, labels] = assemble_batch(data, record.batch_indices);
    (void)labels;  // adaptation is unsupervised

    forward_adapt(model, batch, record.eta_per_layer, normalize_with);
    if (eval_hook) record.metric = eval_hook(model);
    trace.records.push_back(std::move(record));
  }
  return trace;
}

void adabn_recompute(Model& model, const DomainDataset& data, int batch_size) {
  model.validate();
  if (model.bn_layer_count() < 1) throw InvalidInput("adabn_recompute: model has no BN layers");
  if (data.size() < 1) throw InvalidInput("adabn_recompute: empty adaptation set");
  if (batch_size < 1) throw InvalidInput("adabn_recompute: batch_size must be >= 1");

  // Pooled first and second moments of every BN layer's input over the full
  // set, under train-mode propagation.
  struct Moments {
    ChannelVector sum, sumsq;
    long count = 0;
  };
  std::vector<Moments> moments(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (layer.kind == LayerKind::InputBN || layer.kind == LayerKind::BN) {
      moments[i].sum = ChannelVector::Zero(layer.bn.channels());
      moments[i].sumsq = ChannelVector::Zero(layer.bn.channels());
    }
  }

  for (int start = 0; start < data.size(); start += batch_size) {
    std::vector<int> indices;
    for (int i = start; i < std::min(data.size(), start + batch_size); ++i) indices.push_back(i);
    auto [batch, labels] = assemble_batch(data, indices);
    (void)labels;

    FeatureBatch cur = batch;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      const Layer& layer = model.layers[i];
      switch (layer.kind) {
        case LayerKind::InputBN:
        case LayerKind::BN: {
          moments[i].sum += cur.matrix().cast<double>().colwise().sum().transpose();
          moments[i].sumsq +=
              cur.matrix().cast<double>().array().square().colwise().sum().matrix().transpose();
          moments[i].count += cur.positions();
          const ChannelVector m = batch_mean(cur);
          const ChannelVector v = batch_var(cur, m);
          cur = bn_normalize(cur, m, v, layer.bn);
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
  }

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& layer = model.layers[i];
    if (layer.kind != LayerKind::InputBN && layer.kind != LayerKind::BN) continue;
    const double n = static_cast<double>(moments[i].count);
    const ChannelVector mean = moments[i].sum / n;
    // Biased population variance; clamp tiny negative rounding residue.
    const ChannelVector var =
        (moments[i].sumsq.array() / n - mean.array().square()).max(0.0);
    bn_set_stats(layer.bn, mean, var);
  }
}

FeatureBatch predict_with_batch_stats(const Model& model, const FeatureBatch& batch) {
  return forward_batch_stats(model, batch);
}

std::vector<AdaptationTrace> sequential_adapt(Model& model,
                                              const std::vector<SequentialSegment>& segments,
                                              const EvalHook& eval_hook) {
  if (segments.empty()) throw InvalidInput("sequential_adapt: no segments");
  std::vector<AdaptationTrace> traces;
  for (const SequentialSegment& seg : segments)
    traces.push_back(ubna_adapt(model, seg.data, seg.schedule, seg.protocol, eval_hook));
  return traces;
}

double online_clock_check(const AdaptationProtocol& protocol, int steps,
                          const AdaptationTrace& trace) {
  if (steps < 0) throw InvalidInput("online_clock_check: steps must be >= 0");
  const long expected = static_cast<long>(steps) * protocol.batch_size;
  if (trace.frames_consumed != expected)
    throw ProtocolViolation("online clock: consumed " +
                            std::to_string(trace.frames_consumed) + " frames, expected " +
                            std::to_string(expected));
  return static_cast<double>(steps) * protocol.frame_period * protocol.batch_size;
}

void write_trace_csv(const AdaptationTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_trace_csv: cannot open " + path);
  const std::size_t layers =
      trace.records.empty() ? 0 : trace.records.front().eta_per_layer.size();
  out << "step,eta";
  for (std::size_t l = 1; l <= layers; ++l) out << ",eta_layer_" << l;
  out << ",metric\n";
  for (const TraceRecord& r : trace.records) {
    out << r.step << "," << format_double(r.eta);
    for (double e : r.eta_per_layer) out << "," << format_double(e);
    out << ",";
    if (r.metric) out << format_double(*r.metric);
    out << "\n";
  }
}

}  // namespace ubna
