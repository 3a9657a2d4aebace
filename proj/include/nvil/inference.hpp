// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <vector>

#include "nvil/model.hpp"

namespace nvil {

// Variational posterior Q(h|x): a layered feedforward stochastic network.
// layers[0] maps the centered observation (x - input_mean) to the layer-1
// logits; layers[i] maps h^i to the layer-(i+1) logits. Any layer may carry
// within-layer autoregressive connections.
struct InferenceParams {
  std::vector<SbnLayer> layers;      // layer 1 first
  std::vector<double> input_mean;    // subtracted from x before layer 1

  std::size_t n_layers() const { return layers.size(); }
  std::size_t input_dim() const { return layers.empty() ? 0 : layers[0].weights.cols(); }
  std::vector<std::size_t> latent_widths() const;
  std::size_t total_latent_bits() const;

  void validate() const;

  std::vector<ParamRef> trainable_refs();   // weights, biases, ar weights
  std::vector<ParamRef> state_refs();       // plus input_mean and ar masks
  GradientSet gradient_template() const;
};

// Fresh network with weights ~ U(-scale, scale), zero biases and mean.
InferenceParams init_inference(std::size_t input_dim,
                               const std::vector<std::size_t>& latent_widths,
                               bool autoregressive, RngStream rng, double scale = 0.05);

struct PosteriorSample {
  LatentConfig h;
  std::vector<double> per_layer_logq;  // nats, one per layer
  double total_logq = 0.0;
};

// One exact forward sample h ~ Q(h|x), scored with the same logits used for
// sampling. Autoregressive units are drawn in ascending index order.
PosteriorSample sample_posterior(const InferenceParams& inf, const Observation& x,
                                 RngStream& rng);

// Per-layer log Q(h^i | h^{i-1}) of a given configuration (h^0 = x).
std::vector<double> layer_logq(const InferenceParams& inf, const Observation& x,
                               const LatentConfig& h);

// Wraps an externally chosen configuration as a scored PosteriorSample.
PosteriorSample score_configuration(const InferenceParams& inf, const Observation& x,
                                    const LatentConfig& h);

// log Q(h | x) in nats.
double log_q(const InferenceParams& inf, const Observation& x, const LatentConfig& h);

// Analytic score function d/dphi log Q(h|x); the score decomposes additively
// over layers, so no term crosses the sampling of an earlier layer.
GradientSet grad_log_q_phi(const InferenceParams& inf, const Observation& x,
                           const LatentConfig& h);

// Adds coeff * d/dphi log Q(h^layer | h^{layer-1}) for a single layer into an
// existing gradient set keyed like trainable_refs.
void accumulate_grad_log_q_layer(const InferenceParams& inf, const Observation& x,
                                 const LatentConfig& h, std::size_t layer, double coeff,
                                 GradientSet& out);

}  // namespace nvil
