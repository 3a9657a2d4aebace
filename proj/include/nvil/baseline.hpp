// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <vector>

#include "nvil/matrix.hpp"
#include "nvil/params.hpp"
#include "nvil/rng.hpp"

namespace nvil {

// One-hidden-layer tanh network with a scalar linear output, used as the
// input-dependent baseline C(input).
struct BaselineMlp {
  Matrix w1;                  // hidden x input
  std::vector<double> b1;     // hidden
  std::vector<double> w2;     // hidden
  double b2 = 0.0;

  std::size_t input_dim() const { return w1.cols(); }
  std::size_t hidden_dim() const { return w1.rows(); }
};

BaselineMlp init_baseline_mlp(std::size_t input_dim, std::size_t hidden_dim, RngStream rng,
                              double scale = 0.05);

// Scalar baseline value for one input.
double baseline_forward(const BaselineMlp& mlp, const std::vector<double>& input);

// Running mean / variance of one learning signal, exponentially smoothed.
struct SignalStats {
  double c = 0.0;  // running mean, nats
  double v = 0.0;  // running variance, nats^2
};

// Baseline state for the whole trainer: one (stats, mlp) triple per learning
// signal. With layer-local signals there is one signal per latent layer;
// otherwise a single global signal.
struct BaselineState {
  double alpha = 0.8;  // exponential smoothing factor
  struct PerSignal {
    SignalStats stats;
    BaselineMlp mlp;
  };
  std::vector<PerSignal> signals;

  std::size_t n_signals() const { return signals.size(); }
  std::vector<ParamRef> trainable_refs();  // mlp parameters only
  std::vector<ParamRef> state_refs();      // plus the c/v scalars
  GradientSet gradient_template() const;
};

// State for a stack of signals whose baseline inputs have the given widths
// (observation dim first, then each lower layer's width for local signals).
BaselineState init_baseline_state(const std::vector<std::size_t>& input_dims,
                                  std::size_t hidden_dim, double alpha, RngStream rng,
                                  double scale = 0.05);

// Adds coeff * dC/dpsi at the given input into the signal's gradient entries.
void accumulate_baseline_grad(const BaselineState& state, std::size_t signal,
                              const std::vector<double>& input, double coeff,
                              GradientSet& out);

// The statistics update of the gradient-computation procedure: batch mean and
// population variance are folded into (c, v) by exponential smoothing, then
// each signal is centered by the updated c (when subtract_mean) and divided
// by max(1, sqrt(v)) (when normalize). Rejects empty batches.
std::vector<double> update_signal_stats(SignalStats& stats, double alpha,
                                        const std::vector<double>& batch_signals,
                                        bool subtract_mean, bool normalize);

}  // namespace nvil
