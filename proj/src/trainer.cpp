// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nvil/evaluate.hpp"

namespace nvil {

TrainConfig TrainConfig::with_lr(double lr) {
  TrainConfig cfg;
  cfg.model_lr = lr;
  cfg.inference_lr = lr / 5.0;
  cfg.baseline_lr = cfg.inference_lr;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(model_lr > 0.0) || !(inference_lr > 0.0) || !(baseline_lr > 0.0)) {
    throw std::invalid_argument("trainer: learning rates must be positive");
  }
  if (minibatch_size < 1) throw std::invalid_argument("trainer: minibatch_size must be >= 1");
  if (samples_per_case < 1) {
    throw std::invalid_argument("trainer: samples_per_case must be >= 1");
  }
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("trainer: alpha must be in [0, 1]");
  if (bound_samples < 1) throw std::invalid_argument("trainer: bound_samples must be >= 1");
  if (eval_interval < 1) throw std::invalid_argument("trainer: eval_interval must be >= 1");
}

double learning_signal(const ModelParams& model, const InferenceParams& inf,
                       const Observation& x, const PosteriorSample& sample) {
  (void)inf;
  return log_joint(model, x, sample.h) - sample.total_logq;
}

std::vector<double> local_learning_signals(const ModelParams& model,
                                           const InferenceParams& inf, const Observation& x,
                                           const PosteriorSample& sample) {
  const std::size_t n = inf.n_layers();
  if (model.n_latent_layers() != n) {
    throw std::invalid_argument("trainer: model and inference network depth mismatch");
  }
  const auto parts = joint_layer_logprobs(model, x, sample.h);

  // q_suffix[i] = sum_{j >= i} log Q(h^{j+1} | h^j), 0-based layer index.
  std::vector<double> q_suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    q_suffix[i] = q_suffix[i + 1] + sample.per_layer_logq[i];
  }
  // p_suffix[i] = log P(h^n) + sum of the conditional terms for layers above
  // and including h^{i+1} given its parent.
  std::vector<double> p_suffix(n, parts.prior);
  for (std::size_t i = n - 1; i-- > 0;) {
    p_suffix[i] = p_suffix[i + 1] + parts.latent[i];
  }

  std::vector<double> signals(n);
  signals[0] = parts.visible + p_suffix[0] - q_suffix[0];
  for (std::size_t i = 1; i < n; ++i) {
    signals[i] = p_suffix[i - 1] - q_suffix[i];
  }
  return signals;
}

std::vector<std::size_t> baseline_input_dims(const InferenceParams& inf, bool local_signals) {
  std::vector<std::size_t> dims{inf.input_dim()};
  if (local_signals) {
    const auto widths = inf.latent_widths();
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) dims.push_back(widths[i]);
  }
  return dims;
}

namespace {

std::vector<double> baseline_input(const InferenceParams& inf, const Observation& x,
                                   const LatentConfig& h, std::size_t signal) {
  if (signal == 0) {
    std::vector<double> c(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) c[j] = x[j] - inf.input_mean[j];
    return c;
  }
  return h[signal - 1];
}

std::vector<double> raw_signal_vector(const ModelParams& model, const InferenceParams& inf,
                                      const Observation& x, const PosteriorSample& sample,
                                      bool local) {
  if (local) return local_learning_signals(model, inf, x, sample);
  return {learning_signal(model, inf, x, sample)};
}

void check_state_shape(const InferenceParams& inf, const BaselineState& state,
                       const VarianceFlags& flags) {
  const std::size_t expected = flags.local_signals ? inf.n_layers() : 1;
  if (state.n_signals() != expected) {
    throw std::invalid_argument("trainer: baseline state has wrong number of signals");
  }
}

}  // namespace

MinibatchGrads nvil_minibatch_gradients(const ModelParams& model, const InferenceParams& inf,
                                        BaselineState& state,
                                        const std::vector<Observation>& batch,
                                        const TrainConfig& cfg, RngStream rng) {
  if (batch.empty()) throw std::invalid_argument("trainer: minibatch must be nonempty");
  const auto& flags = cfg.flags;
  check_state_shape(inf, state, flags);

  const std::size_t n_signals = state.n_signals();
  const std::size_t spc = cfg.samples_per_case;
  const std::size_t n_entries = batch.size() * spc;

  MinibatchGrads out;
  out.trace.raw.assign(n_signals, std::vector<double>(n_entries));
  out.trace.baseline_subtracted.assign(n_signals, std::vector<double>(n_entries));
  out.trace.centered.assign(n_signals, std::vector<double>(n_entries));
  out.trace.normalized.assign(n_signals, std::vector<double>(n_entries));

  std::vector<PosteriorSample> samples(n_entries);
  std::vector<std::size_t> case_of(n_entries);

  // Learning signals and the bound.
  double bound_sum = 0.0;
  for (std::size_t e = 0; e < n_entries; ++e) {
    const std::size_t i = e / spc;
    const std::size_t s = e % spc;
    auto case_rng = rng.derive(i, s);
    samples[e] = sample_posterior(inf, batch[i], case_rng);
    case_of[e] = i;
    const auto raw = raw_signal_vector(model, inf, batch[i], samples[e], flags.local_signals);
    bound_sum += raw[0];
    for (std::size_t sg = 0; sg < n_signals; ++sg) {
      out.trace.raw[sg][e] = raw[sg];
      double l = raw[sg];
      if (flags.idb) {
        l -= baseline_forward(state.signals[sg].mlp,
                              baseline_input(inf, batch[i], samples[e].h, sg));
      }
      out.trace.baseline_subtracted[sg][e] = l;
    }
  }
  out.bound = bound_sum / static_cast<double>(n_entries);

  // Fold batch statistics into (c, v), then center and normalize.
  for (std::size_t sg = 0; sg < n_signals; ++sg) {
    out.trace.normalized[sg] =
        update_signal_stats(state.signals[sg].stats, state.alpha,
                            out.trace.baseline_subtracted[sg], flags.scalar_baseline,
                            flags.variance_norm);
    const double shift = flags.scalar_baseline ? state.signals[sg].stats.c : 0.0;
    for (std::size_t e = 0; e < n_entries; ++e) {
      out.trace.centered[sg][e] = out.trace.baseline_subtracted[sg][e] - shift;
    }
  }

  // Gradient accumulation with the normalized signals.
  out.theta = model.gradient_template();
  out.phi = inf.gradient_template();
  out.psi = state.gradient_template();
  for (std::size_t e = 0; e < n_entries; ++e) {
    const Observation& x = batch[case_of[e]];
    accumulate_grad_log_joint_theta(model, x, samples[e].h, 1.0, out.theta);
    for (std::size_t layer = 0; layer < inf.n_layers(); ++layer) {
      const std::size_t sg = flags.local_signals ? layer : 0;
      accumulate_grad_log_q_layer(inf, x, samples[e].h, layer, out.trace.normalized[sg][e],
                                  out.phi);
    }
    if (flags.idb) {
      for (std::size_t sg = 0; sg < n_signals; ++sg) {
        accumulate_baseline_grad(state, sg, baseline_input(inf, x, samples[e].h, sg),
                                 out.trace.normalized[sg][e], out.psi);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n_entries);
  out.theta.scale(inv);
  out.phi.scale(inv);
  out.psi.scale(inv);
  return out;
}

GradientSet nvil_case_grad_phi_frozen(const ModelParams& model, const InferenceParams& inf,
                                      const BaselineState& state, const Observation& x,
                                      const VarianceFlags& flags, RngStream& rng,
                                      bool apply_norm) {
  check_state_shape(inf, state, flags);
  const PosteriorSample sample = sample_posterior(inf, x, rng);
  auto signals = raw_signal_vector(model, inf, x, sample, flags.local_signals);
  for (std::size_t sg = 0; sg < signals.size(); ++sg) {
    if (flags.idb) {
      signals[sg] -=
          baseline_forward(state.signals[sg].mlp, baseline_input(inf, x, sample.h, sg));
    }
    if (flags.scalar_baseline) signals[sg] -= state.signals[sg].stats.c;
    if (flags.variance_norm && apply_norm) {
      signals[sg] /= std::max(1.0, std::sqrt(state.signals[sg].stats.v));
    }
  }
  GradientSet phi = inf.gradient_template();
  for (std::size_t layer = 0; layer < inf.n_layers(); ++layer) {
    const std::size_t sg = flags.local_signals ? layer : 0;
    accumulate_grad_log_q_layer(inf, x, sample.h, layer, signals[sg], phi);
  }
  return phi;
}

namespace {

// Validation-style bound over the given cases, one derived stream per case.
BoundEstimate bound_over_cases(const ModelParams& model, const InferenceParams& inf,
                               const DatasetView& view, std::size_t n_cases, std::size_t K,
                               RngStream base) {
  Observation x;
  double mean_sum = 0.0;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < n_cases; ++i) {
    view.fill_case(i, x);
    const auto est = estimate_bound(model, inf, x, K, base.derive(i));
    mean_sum += est.mean;
    var_sum += est.std_error * est.std_error;
  }
  const double n = static_cast<double>(n_cases);
  return {mean_sum / n, std::sqrt(var_sum) / n, K};
}

}  // namespace

TrainResult train(ModelParams model, InferenceParams inf, BaselineState state,
                  const DatasetView& train_data, const DatasetView& valid_data,
                  const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  inf.validate();
  if (train_data.n_cases == 0) throw std::invalid_argument("trainer: empty training set");
  check_state_shape(inf, state, cfg.flags);

  const bool have_valid = valid_data.n_cases > 0;
  const DatasetView& eval_view = have_valid ? valid_data : train_data;
  const std::size_t eval_cases =
      have_valid ? valid_data.n_cases : std::min<std::size_t>(100, train_data.n_cases);

  RngStream root(cfg.seed, stream_key(0x7261696E));  // training root

  TrainResult result;
  double window_bound_sum = 0.0;
  std::size_t window_count = 0;
  double last_norm_theta = 0.0;
  double last_norm_phi = 0.0;

  auto evaluate_row = [&](std::size_t update) {
    MetricsRow row;
    row.update = update;
    if (window_count > 0) {
      row.train_bound = window_bound_sum / static_cast<double>(window_count);
    } else {
      const std::size_t n0 = std::min<std::size_t>(100, train_data.n_cases);
      row.train_bound =
          bound_over_cases(model, inf, train_data, n0, cfg.bound_samples, root.derive(4, update))
              .mean;
    }
    row.valid_bound = bound_over_cases(model, inf, eval_view, eval_cases, cfg.bound_samples,
                                       root.derive(3, update))
                          .mean;
    row.signal_mean = state.signals[0].stats.c;
    row.signal_var = state.signals[0].stats.v;
    row.grad_norm_theta = last_norm_theta;
    row.grad_norm_phi = last_norm_phi;
    result.metrics.push_back(row);
    window_bound_sum = 0.0;
    window_count = 0;
    return row.valid_bound;
  };

  auto snapshot_best = [&](double bound, std::size_t update) {
    result.best_model = model;
    result.best_inference = inf;
    result.best_baselines = state;
    result.best_valid_bound = bound;
    result.best_update = update;
  };

  snapshot_best(evaluate_row(0), 0);

  std::vector<Observation> batch(cfg.minibatch_size);
  auto model_refs = model.trainable_refs();
  auto inf_refs = inf.trainable_refs();
  auto psi_refs = state.trainable_refs();

  for (std::size_t u = 1; u <= cfg.max_updates; ++u) {
    auto batch_rng = root.derive(1, u);
    const auto idx = draw_minibatch(train_data.n_cases, cfg.minibatch_size, batch_rng);
    for (std::size_t b = 0; b < idx.size(); ++b) train_data.fill_case(idx[b], batch[b]);

    const auto mg = nvil_minibatch_gradients(model, inf, state, batch, cfg, root.derive(2, u));
    sgd_step(model_refs, mg.theta, cfg.model_lr);
    sgd_step(inf_refs, mg.phi, cfg.inference_lr);
    if (cfg.flags.idb) sgd_step(psi_refs, mg.psi, cfg.baseline_lr);

    window_bound_sum += mg.bound;
    window_count += 1;
    last_norm_theta = mg.theta.l2_norm();
    last_norm_phi = mg.phi.l2_norm();

    if (u % cfg.eval_interval == 0 || u == cfg.max_updates) {
      const double vb = evaluate_row(u);
      if (vb > result.best_valid_bound) snapshot_best(vb, u);
    }
  }

  result.final_model = std::move(model);
  result.final_inference = std::move(inf);
  result.final_baselines = std::move(state);
  return result;
}

}  // namespace nvil
