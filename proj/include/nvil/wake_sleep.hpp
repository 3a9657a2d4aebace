// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>

#include "nvil/trainer.hpp"

namespace nvil {

struct WakeResult {
  GradientSet theta;
  double bound = 0.0;  // mean learning signal over the wake batch
};

// Wake phase: h ~ Q(h|x) per case, averaged model gradient. Draws derive from
// the batch stream exactly like the NVIL minibatch, so the model gradients of
// the two trainers match bitwise on identical streams.
WakeResult wake_gradients(const ModelParams& model, const InferenceParams& inf,
                          const std::vector<Observation>& batch, RngStream rng);

// Sleep phase: (x, h) dreamed from the model, averaged recognition gradient.
// doc_lengths is required for multinomial visibles: either one length per
// dream or a single shared value.
GradientSet sleep_gradients(const ModelParams& model, const InferenceParams& inf,
                            std::size_t n_dreams, RngStream rng,
                            const std::vector<std::size_t>& doc_lengths = {});

// Alternating wake/sleep updates, one sleep batch of minibatch_size dreams
// per wake minibatch; validation evaluation and early stopping identical to
// the NVIL trainer. Baseline fields of the result stay empty.
TrainResult train_ws(ModelParams model, InferenceParams inf, const DatasetView& train_data,
                     const DatasetView& valid_data, const TrainConfig& cfg);

}  // namespace nvil
