// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "nvil/matrix.hpp"
#include "nvil/numerics.hpp"
#include "nvil/params.hpp"
#include "nvil/rng.hpp"

namespace nvil {

// A dense observation: {0,1} entries for Bernoulli visibles, non-negative
// integer word counts for multinomial visibles.
using Observation = std::vector<double>;

// Per-layer binary state, layer 1 (adjacent to the visibles) first.
using LatentConfig = std::vector<std::vector<double>>;

enum class VisibleKind { bernoulli, multinomial };

// Within-layer autoregressive connections: unit j additionally receives
// sum_{k<j} (weights .* mask)(j,k) * h_k. The mask must be strictly lower
// triangular; zeroing it reduces the layer to the plain factorial case.
struct ArBlock {
  Matrix weights;
  Matrix mask;

  static ArBlock lower_triangular(std::size_t width);
  double term(std::size_t j, const std::vector<double>& h) const;
};

// One conditional Bernoulli layer: child logits = weights * parent + biases.
struct SbnLayer {
  Matrix weights;                 // child-dim x parent-dim
  std::vector<double> biases;     // child-dim
  std::optional<ArBlock> ar;      // within-layer connections on the child
};

// Directed generative model P(x, h): a stack of sigmoid belief network layers
// with a factorial Bernoulli prior on the deepest layer.
//
// layers[0] maps h^1 to the visibles; layers[i] maps h^{i+1} to h^i. The
// optional ar block on layers[i>=1] and on the prior provides the
// autoregressive-latent variant; the visible conditional never has one.
struct ModelParams {
  std::vector<SbnLayer> layers;          // visible-most first
  std::vector<double> prior_logits;      // deepest layer
  std::optional<ArBlock> prior_ar;
  VisibleKind visible_kind = VisibleKind::bernoulli;

  std::size_t n_latent_layers() const { return layers.size(); }
  std::size_t visible_dim() const { return layers.empty() ? 0 : layers[0].weights.rows(); }
  std::vector<std::size_t> latent_widths() const;  // h^1 .. h^n
  std::size_t total_latent_bits() const;

  // Checks all shape invariants; throws std::invalid_argument on violation.
  void validate() const;

  std::vector<ParamRef> trainable_refs();
  std::vector<ParamRef> state_refs();  // trainables plus the ar masks
  GradientSet gradient_template() const;
};

// Fresh model with weights ~ U(-scale, scale), zero biases and prior logits.
// latent_widths is ordered h^1 (visible-adjacent) to h^n (deepest).
ModelParams init_model(std::size_t visible_dim, const std::vector<std::size_t>& latent_widths,
                       VisibleKind kind, bool autoregressive_latents, RngStream rng,
                       double scale = 0.05);

// Per-factor log probabilities of (x, h) under the model, in nats.
struct JointLayerLogProbs {
  double visible;                  // log P(x | h^1)
  std::vector<double> latent;      // latent[i] = log P(h^{i+1} | h^{i+2}) for i+1 < n
  double prior;                    // log P(h^n)
};

JointLayerLogProbs joint_layer_logprobs(const ModelParams& model, const Observation& x,
                                        const LatentConfig& h);

// log P(x, h) in nats.
double log_joint(const ModelParams& model, const Observation& x, const LatentConfig& h);

struct AncestralSample {
  Observation x;
  LatentConfig h;
  double log_joint;
};

// Samples h^n ~ prior, each layer conditionally downward (autoregressive units
// in ascending index order), then the visibles. doc_length is required for
// multinomial visibles and rejected otherwise.
AncestralSample sample_ancestral(const ModelParams& model, RngStream& rng,
                                 std::optional<std::size_t> doc_length = std::nullopt);

// Analytic gradient of log_joint with respect to every trainable model
// parameter.
GradientSet grad_log_joint_theta(const ModelParams& model, const Observation& x,
                                 const LatentConfig& h);

// Accumulates grad of log_joint into an existing gradient set (same keys as
// trainable_refs), scaled by coeff.
void accumulate_grad_log_joint_theta(const ModelParams& model, const Observation& x,
                                     const LatentConfig& h, double coeff, GradientSet& out);

}  // namespace nvil
