// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/evaluate.hpp"

#include <cmath>
#include <stdexcept>

#include "nvil/metrics.hpp"

namespace nvil {

BoundEstimate estimate_bound(const ModelParams& model, const InferenceParams& inf,
                             const Observation& x, std::size_t K, RngStream rng) {
  if (K < 1) throw std::invalid_argument("evaluate: bound estimate needs K >= 1");
  std::vector<double> signals(K);
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto s = sample_posterior(inf, x, rng);
    signals[k] = learning_signal(model, inf, x, s);
    sum += signals[k];
  }
  const double n = static_cast<double>(K);
  BoundEstimate est;
  est.mean = sum / n;
  est.samples_per_case = K;
  if (K > 1) {
    double ss = 0.0;
    for (double l : signals) ss += (l - est.mean) * (l - est.mean);
    est.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

BoundEstimate dataset_bound(const ModelParams& model, const InferenceParams& inf,
                            const DatasetView& view, std::size_t K, RngStream base) {
  if (view.n_cases == 0) throw std::invalid_argument("evaluate: empty dataset");
  Observation x;
  double mean_sum = 0.0;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < view.n_cases; ++i) {
    view.fill_case(i, x);
    const auto est = estimate_bound(model, inf, x, K, base.derive(i));
    mean_sum += est.mean;
    var_sum += est.std_error * est.std_error;
  }
  const double n = static_cast<double>(view.n_cases);
  return {mean_sum / n, std::sqrt(var_sum) / n, K};
}

namespace {

std::uint64_t hash_counts(const Observation& x) {
  // FNV-1a over the count pattern; identical documents share a stream.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double v : x) {
    auto u = static_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (u >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace

double perplexity(const ModelParams& model, const InferenceParams& inf,
                  const BowDataset& corpus, std::size_t K, RngStream rng) {
  if (corpus.n_cases() == 0) throw std::invalid_argument("evaluate: empty corpus");
  Observation x;
  double exponent = 0.0;
  for (std::size_t d = 0; d < corpus.n_cases(); ++d) {
    if (corpus.lengths[d] < 1.0) {
      throw std::invalid_argument("evaluate: zero-length document in corpus");
    }
    corpus.fill_case(d, x);
    const auto est = estimate_bound(model, inf, x, K, rng.derive(hash_counts(x)));
    exponent += est.mean / corpus.lengths[d];
  }
  return std::exp(-exponent / static_cast<double>(corpus.n_cases()));
}

namespace {

// Visits every latent configuration of the given widths in counter order.
template <typename F>
void for_each_config(const std::vector<std::size_t>& widths, F&& body) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  LatentConfig h(widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) h[i].assign(widths[i], 0.0);
  const std::uint64_t n_configs = 1ULL << total;
  for (std::uint64_t code = 0; code < n_configs; ++code) {
    std::uint64_t c = code;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      for (std::size_t j = 0; j < widths[i]; ++j) {
        h[i][j] = static_cast<double>(c & 1ULL);
        c >>= 1;
      }
    }
    body(h);
  }
}

void check_enumeration_cap(std::size_t bits, std::size_t max_bits) {
  if (bits > max_bits) {
    throw std::invalid_argument("evaluate: latent space too large to enumerate (" +
                                std::to_string(bits) + " bits, cap " +
                                std::to_string(max_bits) + ")");
  }
}

}  // namespace

double exact_log_px(const ModelParams& model, const Observation& x, std::size_t max_bits) {
  model.validate();
  check_enumeration_cap(model.total_latent_bits(), max_bits);
  std::vector<double> terms;
  terms.reserve(1ULL << model.total_latent_bits());
  for_each_config(model.latent_widths(),
                  [&](const LatentConfig& h) { terms.push_back(log_joint(model, x, h)); });
  return logsumexp(terms);
}

ExactEnumeration enumerate_exact(const ModelParams& model, const InferenceParams& inf,
                                 const Observation& x, std::size_t max_bits) {
  model.validate();
  inf.validate();
  if (model.latent_widths() != inf.latent_widths()) {
    throw std::invalid_argument("evaluate: model and inference latent shapes disagree");
  }
  check_enumeration_cap(model.total_latent_bits(), max_bits);

  ExactEnumeration out;
  out.exact_grad_theta = model.gradient_template();
  out.exact_grad_phi = inf.gradient_template();

  std::vector<double> log_joints;
  std::vector<double> log_qs;
  log_joints.reserve(1ULL << model.total_latent_bits());
  log_qs.reserve(log_joints.capacity());
  for_each_config(model.latent_widths(), [&](const LatentConfig& h) {
    log_joints.push_back(log_joint(model, x, h));
    log_qs.push_back(log_q(inf, x, h));
  });
  out.log_px = logsumexp(log_joints);

  double bound = 0.0;
  double kl = 0.0;
  std::size_t idx = 0;
  for_each_config(model.latent_widths(), [&](const LatentConfig& h) {
    const double lj = log_joints[idx];
    const double lq = log_qs[idx];
    const double q = std::exp(lq);
    const double l = lj - lq;
    bound += q * l;
    kl += q * (lq - (lj - out.log_px));
    if (q > 0.0) {
      accumulate_grad_log_joint_theta(model, x, h, q, out.exact_grad_theta);
      for (std::size_t layer = 0; layer < inf.n_layers(); ++layer) {
        accumulate_grad_log_q_layer(inf, x, h, layer, q * l, out.exact_grad_phi);
      }
    }
    ++idx;
  });
  out.exact_bound = bound;
  out.kl = kl;
  return out;
}

std::vector<VarianceConfig> parse_variance_configs(const std::string& text) {
  std::vector<VarianceConfig> configs;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty()) throw std::invalid_argument("evaluate: empty variance configuration");
    VarianceConfig cfg;
    cfg.name = item;
    cfg.flags = VarianceFlags{false, false, false, false};
    if (item != "none") {
      std::size_t p = 0;
      while (p <= item.size()) {
        const std::size_t plus = std::min(item.find('+', p), item.size());
        const std::string tok = item.substr(p, plus - p);
        if (tok == "scalar") {
          cfg.flags.scalar_baseline = true;
        } else if (tok == "idb") {
          cfg.flags.idb = true;
        } else if (tok == "vn") {
          cfg.flags.variance_norm = true;
        } else if (tok == "local") {
          cfg.flags.local_signals = true;
        } else {
          throw std::invalid_argument("evaluate: unknown variance configuration token '" + tok +
                                      "'");
        }
        p = plus + 1;
      }
    }
    configs.push_back(std::move(cfg));
    pos = comma + 1;
  }
  return configs;
}

VarianceReport variance_report(const ModelParams& model, const InferenceParams& inf,
                               const BaselineState& frozen_state,
                               const std::vector<Observation>& snapshot_batch,
                               const std::vector<VarianceConfig>& configs,
                               std::size_t n_resamples, RngStream rng) {
  if (n_resamples < 1000) {
    throw std::invalid_argument("evaluate: variance report needs at least 1000 resamples");
  }
  if (snapshot_batch.empty()) {
    throw std::invalid_argument("evaluate: variance report needs a nonempty batch");
  }

  VarianceReport report;
  const double inv_batch = 1.0 / static_cast<double>(snapshot_batch.size());
  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    const auto& cfg = configs[ci];
    // The frozen state always carries one baseline triple per local signal;
    // a non-local configuration only ever reads triple 0.
    BaselineState state = frozen_state;
    if (!cfg.flags.local_signals && state.signals.size() > 1) {
      state.signals.resize(1);
    }

    GradientSet sum = inf.gradient_template();
    GradientSet sumsq = inf.gradient_template();
    GradientSet sum_unnorm = inf.gradient_template();
    GradientSet sumsq_unnorm = inf.gradient_template();
    double sig_sum = 0.0;
    double sig_sumsq = 0.0;
    std::size_t sig_n = 0;

    for (std::size_t r = 0; r < n_resamples; ++r) {
      GradientSet est = inf.gradient_template();
      GradientSet est_unnorm = inf.gradient_template();
      for (std::size_t b = 0; b < snapshot_batch.size(); ++b) {
        auto case_rng = rng.derive(ci, r, b);
        auto case_rng2 = case_rng;  // same draws for both accumulations
        est.add_scaled(nvil_case_grad_phi_frozen(model, inf, state, snapshot_batch[b],
                                                 cfg.flags, case_rng, true),
                       inv_batch);
        if (cfg.flags.variance_norm) {
          est_unnorm.add_scaled(nvil_case_grad_phi_frozen(model, inf, state, snapshot_batch[b],
                                                          cfg.flags, case_rng2, false),
                                inv_batch);
        }
      }
      if (!cfg.flags.variance_norm) est_unnorm = est;
      const auto flat = est.flatten();
      const auto flat_u = est_unnorm.flatten();
      auto& s = sum.entries();
      std::size_t k = 0;
      for (auto& e : s) {
        for (double& v : e.values) {
          v += flat[k];
          ++k;
        }
      }
      k = 0;
      for (auto& e : sumsq.entries()) {
        for (double& v : e.values) {
          v += flat[k] * flat[k];
          ++k;
        }
      }
      k = 0;
      for (auto& e : sum_unnorm.entries()) {
        for (double& v : e.values) {
          v += flat_u[k];
          ++k;
        }
      }
      k = 0;
      for (auto& e : sumsq_unnorm.entries()) {
        for (double& v : e.values) {
          v += flat_u[k] * flat_u[k];
          ++k;
        }
      }
      // Processed global signal of the first case, for the signal-variance
      // column.
      auto sig_rng = rng.derive(ci, r, 0);
      const auto s0 = sample_posterior(inf, snapshot_batch[0], sig_rng);
      double l = learning_signal(model, inf, snapshot_batch[0], s0);
      if (cfg.flags.idb) {
        std::vector<double> cx(snapshot_batch[0].size());
        for (std::size_t j = 0; j < cx.size(); ++j) {
          cx[j] = snapshot_batch[0][j] - inf.input_mean[j];
        }
        l -= baseline_forward(state.signals[0].mlp, cx);
      }
      if (cfg.flags.scalar_baseline) l -= state.signals[0].stats.c;
      if (cfg.flags.variance_norm) l /= std::max(1.0, std::sqrt(state.signals[0].stats.v));
      sig_sum += l;
      sig_sumsq += l * l;
      sig_n += 1;
    }

    const double n = static_cast<double>(n_resamples);
    VarianceReport::Row row;
    row.config = cfg.name;
    const auto flat_sum = sum.flatten();
    const auto flat_sumsq = sumsq.flatten();
    const auto flat_sum_u = sum_unnorm.flatten();
    const auto flat_sumsq_u = sumsq_unnorm.flatten();
    double var_total = 0.0;
    double norm_sq = 0.0;
    row.grad_mean.resize(flat_sum.size());
    row.grad_stderr.resize(flat_sum.size());
    for (std::size_t k = 0; k < flat_sum.size(); ++k) {
      const double mean = flat_sum[k] / n;
      const double var = std::max(0.0, flat_sumsq[k] / n - mean * mean);
      var_total += var;
      const double mean_u = flat_sum_u[k] / n;
      const double var_u = std::max(0.0, flat_sumsq_u[k] / n - mean_u * mean_u);
      row.grad_mean[k] = mean_u;
      row.grad_stderr[k] = std::sqrt(var_u / n);
      norm_sq += mean_u * mean_u;
    }
    row.grad_var = var_total / static_cast<double>(flat_sum.size());
    row.grad_mean_norm = std::sqrt(norm_sq);
    const double sig_mean = sig_sum / static_cast<double>(sig_n);
    row.signal_var = std::max(0.0, sig_sumsq / static_cast<double>(sig_n) - sig_mean * sig_mean);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string variance_report_csv(const VarianceReport& report) {
  std::string out = "config,grad_var,grad_mean_norm,signal_var\n";
  for (const auto& row : report.rows) {
    out += row.config;
    out += ',';
    out += format_g9(row.grad_var);
    out += ',';
    out += format_g9(row.grad_mean_norm);
    out += ',';
    out += format_g9(row.signal_var);
    out += '\n';
  }
  return out;
}

}  // namespace nvil
