// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/wake_sleep.hpp"

#include <algorithm>
#include <stdexcept>

#include "nvil/evaluate.hpp"

namespace nvil {

WakeResult wake_gradients(const ModelParams& model, const InferenceParams& inf,
                          const std::vector<Observation>& batch, RngStream rng) {
  if (batch.empty()) throw std::invalid_argument("wake-sleep: wake batch must be nonempty");
  WakeResult out;
  out.theta = model.gradient_template();
  double bound_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto case_rng = rng.derive(i, 0);
    const auto s = sample_posterior(inf, batch[i], case_rng);
    accumulate_grad_log_joint_theta(model, batch[i], s.h, 1.0, out.theta);
    bound_sum += learning_signal(model, inf, batch[i], s);
  }
  out.theta.scale(1.0 / static_cast<double>(batch.size()));
  out.bound = bound_sum / static_cast<double>(batch.size());
  return out;
}

GradientSet sleep_gradients(const ModelParams& model, const InferenceParams& inf,
                            std::size_t n_dreams, RngStream rng,
                            const std::vector<std::size_t>& doc_lengths) {
  if (n_dreams < 1) throw std::invalid_argument("wake-sleep: needs at least one dream");
  const bool multinomial = model.visible_kind == VisibleKind::multinomial;
  if (multinomial) {
    if (doc_lengths.size() != 1 && doc_lengths.size() != n_dreams) {
      throw std::invalid_argument(
          "wake-sleep: multinomial dreams need one document length or one per dream");
    }
  } else if (!doc_lengths.empty()) {
    throw std::invalid_argument("wake-sleep: document lengths only apply to multinomial visibles");
  }

  GradientSet phi = inf.gradient_template();
  for (std::size_t d = 0; d < n_dreams; ++d) {
    auto dream_rng = rng.derive(d);
    std::optional<std::size_t> len;
    if (multinomial) len = doc_lengths[doc_lengths.size() == 1 ? 0 : d];
    const auto dream = sample_ancestral(model, dream_rng, len);
    for (std::size_t layer = 0; layer < inf.n_layers(); ++layer) {
      accumulate_grad_log_q_layer(inf, dream.x, dream.h, layer, 1.0, phi);
    }
  }
  phi.scale(1.0 / static_cast<double>(n_dreams));
  return phi;
}

TrainResult train_ws(ModelParams model, InferenceParams inf, const DatasetView& train_data,
                     const DatasetView& valid_data, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  inf.validate();
  if (train_data.n_cases == 0) throw std::invalid_argument("wake-sleep: empty training set");

  const bool have_valid = valid_data.n_cases > 0;
  const DatasetView& eval_view = have_valid ? valid_data : train_data;
  const std::size_t eval_cases =
      have_valid ? valid_data.n_cases : std::min<std::size_t>(100, train_data.n_cases);
  const bool multinomial = model.visible_kind == VisibleKind::multinomial;

  RngStream root(cfg.seed, stream_key(0x77616B65));  // wake-sleep root

  TrainResult result;
  double window_bound_sum = 0.0;
  std::size_t window_count = 0;
  double last_norm_theta = 0.0;
  double last_norm_phi = 0.0;

  auto bound_over = [&](const DatasetView& view, std::size_t n_cases, RngStream base) {
    Observation x;
    double sum = 0.0;
    for (std::size_t i = 0; i < n_cases; ++i) {
      view.fill_case(i, x);
      sum += estimate_bound(model, inf, x, cfg.bound_samples, base.derive(i)).mean;
    }
    return sum / static_cast<double>(n_cases);
  };

  auto evaluate_row = [&](std::size_t update) {
    MetricsRow row;
    row.update = update;
    if (window_count > 0) {
      row.train_bound = window_bound_sum / static_cast<double>(window_count);
    } else {
      const std::size_t n0 = std::min<std::size_t>(100, train_data.n_cases);
      row.train_bound = bound_over(train_data, n0, root.derive(4, update));
    }
    row.valid_bound = bound_over(eval_view, eval_cases, root.derive(3, update));
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
    result.best_valid_bound = bound;
    result.best_update = update;
  };

  snapshot_best(evaluate_row(0), 0);

  std::vector<Observation> batch(cfg.minibatch_size);
  std::vector<std::size_t> dream_lengths;
  auto model_refs = model.trainable_refs();
  auto inf_refs = inf.trainable_refs();

  for (std::size_t u = 1; u <= cfg.max_updates; ++u) {
    auto batch_rng = root.derive(1, u);
    const auto idx = draw_minibatch(train_data.n_cases, cfg.minibatch_size, batch_rng);
    for (std::size_t b = 0; b < idx.size(); ++b) train_data.fill_case(idx[b], batch[b]);

    const auto wake = wake_gradients(model, inf, batch, root.derive(2, u));
    sgd_step(model_refs, wake.theta, cfg.model_lr);

    if (multinomial) {
      // Dream lengths follow the empirical training length distribution.
      auto len_rng = root.derive(5, u);
      dream_lengths.resize(cfg.minibatch_size);
      for (auto& len : dream_lengths) {
        len = train_data.doc_length(len_rng.next_index(train_data.n_cases));
      }
    }
    const auto sleep =
        sleep_gradients(model, inf, cfg.minibatch_size, root.derive(6, u), dream_lengths);
    sgd_step(inf_refs, sleep, cfg.inference_lr);

    window_bound_sum += wake.bound;
    window_count += 1;
    last_norm_theta = wake.theta.l2_norm();
    last_norm_phi = sleep.l2_norm();

    if (u % cfg.eval_interval == 0 || u == cfg.max_updates) {
      const double vb = evaluate_row(u);
      if (vb > result.best_valid_bound) snapshot_best(vb, u);
    }
  }

  result.final_model = std::move(model);
  result.final_inference = std::move(inf);
  return result;
}

}  // namespace nvil
