#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ubna/batchnorm.hpp"
#include "ubna/datagen.hpp"
#include "ubna/model.hpp"

namespace ubna {

/// Exponentially decaying momentum schedule:
///   eta_l(k) = eta0 * exp(-k * alpha_batch) * exp(-l * alpha_layer).
/// UBNA0 is alpha_batch = alpha_layer = 0; UBNA adds batch decay; UBNA+
/// adds the layer-wise weighting on top.
struct AdaptationSchedule {
  double eta0 = 0.1;
  double alpha_batch = 0.08;
  double alpha_layer = 0.0;
  int num_steps = 50;
  int first_step_index = 1;  // k of the first applied update

  void validate() const;

  static AdaptationSchedule ubna0() { return {0.1, 0.0, 0.0, 50, 1}; }
  static AdaptationSchedule ubna() { return {0.1, 0.08, 0.0, 50, 1}; }
  static AdaptationSchedule ubna_plus(double alpha_layer = 0.03) {
    return {0.1, 0.08, alpha_layer, 50, 1};
  }
};

double momentum_at(const AdaptationSchedule& schedule, int step, int layer);

struct AdaptationProtocol {
  enum class Kind { Offline, Online, FewShot };

  Kind kind = Kind::Offline;
  int batch_size = 6;
  std::uint64_t seed = 0;               // Offline shuffling
  double frame_period = 0.06;           // Online: seconds per frame
  std::vector<int> fixed_batch_ids;     // FewShot: empty means first B images

  static AdaptationProtocol offline(std::uint64_t seed, int batch_size = 6);
  static AdaptationProtocol online(int batch_size = 6, double frame_period = 0.06);
  static AdaptationProtocol few_shot(std::vector<int> ids, int batch_size = 6);
};

struct TraceRecord {
  int step;                          // k
  double eta;                        // batch-level eta(k)
  std::vector<double> eta_per_layer; // eta_l(k), l = 1..L
  std::optional<double> metric;
  std::vector<int> batch_indices;    // dataset indices consumed this step
};

struct AdaptationTrace {
  std::vector<TraceRecord> records;
  long frames_consumed = 0;
};

using EvalHook = std::function<double(const Model&)>;

/// Runs UBNA: per step draws a batch per protocol and lets every BN layer l
/// take an Adapt step with momentum eta_l(k). All weights and gamma/beta
/// stay untouched. Deterministic for a fixed seed.
AdaptationTrace ubna_adapt(Model& model, const DomainDataset& data,
                           const AdaptationSchedule& schedule,
                           const AdaptationProtocol& protocol,
                           const EvalHook& eval_hook = {},
                           AdaptNormalize normalize_with = AdaptNormalize::PostUpdateRunning);

/// AdaBN baseline: replaces every BN layer's running statistics with the
/// exact mean and biased variance of that layer's inputs over the whole
/// adaptation set, propagated in train mode (per-batch statistics).
void adabn_recompute(Model& model, const DomainDataset& data, int batch_size);

/// Batch-statistics-at-test baseline: every BN layer normalizes with the
/// current batch's statistics; the model is not mutated.
FeatureBatch predict_with_batch_stats(const Model& model, const FeatureBatch& batch);

struct SequentialSegment {
  DomainDataset data;
  AdaptationSchedule schedule;
  AdaptationProtocol protocol;
};

/// Runs ubna_adapt once per segment; the step counter resets at each domain
/// switch so the momentum restarts from eta0 * exp(-l * alpha_layer).
std::vector<AdaptationTrace> sequential_adapt(
    Model& model, const std::vector<SequentialSegment>& segments,
    const EvalHook& eval_hook = {});

/// Online wall-clock constraint t / (frame_period * B) = k. Returns
/// t = steps * frame_period * B and checks the trace consumed exactly
/// steps * B frames.
double online_clock_check(const AdaptationProtocol& protocol, int steps,
                          const AdaptationTrace& trace);

/// CSV with columns step, eta, eta_layer_1..L, metric.
void write_trace_csv(const AdaptationTrace& trace, const std::string& path);

}  // namespace ubna
