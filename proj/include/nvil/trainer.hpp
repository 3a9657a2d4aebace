// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <vector>

#include "nvil/baseline.hpp"
#include "nvil/data.hpp"
#include "nvil/inference.hpp"
#include "nvil/metrics.hpp"
#include "nvil/model.hpp"

namespace nvil {

// Which variance-reduction techniques are active.
struct VarianceFlags {
  bool idb = true;             // input-dependent baseline C(x)
  bool scalar_baseline = true; // running mean c
  bool variance_norm = true;   // divide by max(1, sqrt(v))
  bool local_signals = true;   // layer-local learning signals
};

struct TrainConfig {
  double model_lr = 3e-4;
  double inference_lr = 6e-5;  // model_lr / 5
  double baseline_lr = 6e-5;   // defaults to inference_lr
  std::size_t minibatch_size = 20;
  std::size_t samples_per_case = 1;
  double alpha = 0.8;
  std::size_t max_updates = 10000;
  std::size_t eval_interval = 500;
  std::size_t bound_samples = 10;
  std::size_t baseline_hidden = 100;
  std::uint64_t seed = 1;
  VarianceFlags flags;

  // Sets model_lr and derives inference_lr = lr / 5, baseline_lr likewise.
  static TrainConfig with_lr(double lr);
  void validate() const;
};

// Per-case learning signals at each processing stage, indexed
// [signal][batch entry]. With local signals there is one signal per latent
// layer (signal 0 is the global one); otherwise a single signal.
struct SignalTrace {
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> baseline_subtracted;
  std::vector<std::vector<double>> centered;
  std::vector<std::vector<double>> normalized;
};

// l(x, h) = log P(x, h) - log Q(h | x), the global learning signal and the
// single-sample bound contribution.
double learning_signal(const ModelParams& model, const InferenceParams& inf,
                       const Observation& x, const PosteriorSample& sample);

// Layer-local signals; entry 0 equals the global signal and entry i drops
// every term that does not depend on layers i+1 and above.
std::vector<double> local_learning_signals(const ModelParams& model,
                                           const InferenceParams& inf, const Observation& x,
                                           const PosteriorSample& sample);

// Baseline network inputs per signal: the centered observation for signal 0,
// the raw bits of the layer below for deeper signals.
std::vector<std::size_t> baseline_input_dims(const InferenceParams& inf, bool local_signals);

struct MinibatchGrads {
  GradientSet theta;
  GradientSet phi;
  GradientSet psi;
  double bound = 0.0;  // mean raw signal over the batch
  SignalTrace trace;
};

// One pass of the gradient-computation procedure over a minibatch: sample
// h per case, accumulate the bound from the raw signals, subtract the
// input-dependent baselines, fold batch statistics into (c, v), normalize,
// then accumulate the three gradient sets (sums divided by the number of
// batch entries). Updates `state` in place.
MinibatchGrads nvil_minibatch_gradients(const ModelParams& model, const InferenceParams& inf,
                                        BaselineState& state,
                                        const std::vector<Observation>& batch,
                                        const TrainConfig& cfg, RngStream rng);

// Single-sample phi-gradient estimate with frozen statistics: no state is
// updated, c / v / psi are used as-is. This is the estimator whose mean and
// variance the report and the unbiasedness checks measure.
GradientSet nvil_case_grad_phi_frozen(const ModelParams& model, const InferenceParams& inf,
                                      const BaselineState& state, const Observation& x,
                                      const VarianceFlags& flags, RngStream& rng,
                                      bool apply_norm = true);

struct TrainResult {
  ModelParams best_model;
  InferenceParams best_inference;
  BaselineState best_baselines;
  double best_valid_bound = 0.0;
  std::size_t best_update = 0;
  ModelParams final_model;
  InferenceParams final_inference;
  BaselineState final_baselines;
  std::vector<MetricsRow> metrics;
};

// Stochastic gradient ascent with minibatches sampled with replacement,
// periodic validation-bound evaluation, and early stopping by retaining the
// best-validation snapshot. When the validation view is empty the first
// min(100, n) training cases stand in for it.
TrainResult train(ModelParams model, InferenceParams inf, BaselineState state,
                  const DatasetView& train_data, const DatasetView& valid_data,
                  const TrainConfig& cfg);

}  // namespace nvil
