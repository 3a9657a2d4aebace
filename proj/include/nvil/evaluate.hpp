// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <vector>

#include "nvil/data.hpp"
#include "nvil/trainer.hpp"

namespace nvil {

struct BoundEstimate {
  double mean = 0.0;       // nats
  double std_error = 0.0;  // sample std / sqrt(K); zero for K = 1
  std::size_t samples_per_case = 0;
};

// Monte Carlo estimate of the variational bound for one observation using K
// posterior samples.
BoundEstimate estimate_bound(const ModelParams& model, const InferenceParams& inf,
                             const Observation& x, std::size_t K, RngStream rng);

// Mean of per-case bound estimates over a whole dataset view; the standard
// error combines the per-case Monte Carlo errors.
BoundEstimate dataset_bound(const ModelParams& model, const InferenceParams& inf,
                            const DatasetView& view, std::size_t K, RngStream base);

// Perplexity per word, with the variational bound in place of the exact
// document log probability, so the result is an upper bound on the true
// perplexity. Per-document sample streams are derived from the document
// contents, making the value invariant to duplication and reordering.
double perplexity(const ModelParams& model, const InferenceParams& inf,
                  const BowDataset& corpus, std::size_t K, RngStream rng);

// Exact log P(x) by summation over every latent configuration (logsumexp).
// Rejects models with more than max_bits total latent bits.
double exact_log_px(const ModelParams& model, const Observation& x, std::size_t max_bits = 20);

struct ExactEnumeration {
  double log_px = 0.0;
  double exact_bound = 0.0;
  double kl = 0.0;  // KL(Q || posterior), computed from the enumerated posterior
  GradientSet exact_grad_theta;
  GradientSet exact_grad_phi;
};

// Exact bound, KL, and parameter gradients of the bound by enumeration over
// all latent configurations.
ExactEnumeration enumerate_exact(const ModelParams& model, const InferenceParams& inf,
                                 const Observation& x, std::size_t max_bits = 20);

struct VarianceConfig {
  std::string name;
  VarianceFlags flags;
};

// "none" or '+'-joined tokens from {scalar, idb, vn, local}, comma-separated
// list of configurations.
std::vector<VarianceConfig> parse_variance_configs(const std::string& text);

struct VarianceReport {
  struct Row {
    std::string config;
    double grad_var = 0.0;        // per-parameter estimator variance, averaged
    double grad_mean_norm = 0.0;  // L2 norm of the mean estimator
    double signal_var = 0.0;      // variance of the processed global signal
    // Per-parameter mean and standard error with variance normalization
    // factored out, so means are directly comparable across configurations.
    std::vector<double> grad_mean;
    std::vector<double> grad_stderr;
  };
  std::vector<Row> rows;
};

// Draws n_resamples single-sample batch gradient estimates per configuration
// on a fixed batch with frozen baseline statistics, and reports their
// per-parameter variance and mean.
VarianceReport variance_report(const ModelParams& model, const InferenceParams& inf,
                               const BaselineState& frozen_state,
                               const std::vector<Observation>& snapshot_batch,
                               const std::vector<VarianceConfig>& configs,
                               std::size_t n_resamples, RngStream rng);

std::string variance_report_csv(const VarianceReport& report);

}  // namespace nvil
