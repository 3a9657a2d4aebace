// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nvil {

BaselineMlp init_baseline_mlp(std::size_t input_dim, std::size_t hidden_dim, RngStream rng,
                              double scale) {
  BaselineMlp mlp;
  mlp.w1 = Matrix(hidden_dim, input_dim);
  mlp.b1.assign(hidden_dim, 0.0);
  mlp.w2.assign(hidden_dim, 0.0);
  mlp.b2 = 0.0;
  auto r1 = rng.derive(21);
  for (std::size_t i = 0; i < mlp.w1.size(); ++i) {
    mlp.w1.data()[i] = scale * (2.0 * r1.next_double() - 1.0);
  }
  auto r2 = rng.derive(22);
  for (std::size_t i = 0; i < mlp.w2.size(); ++i) {
    mlp.w2[i] = scale * (2.0 * r2.next_double() - 1.0);
  }
  return mlp;
}

double baseline_forward(const BaselineMlp& mlp, const std::vector<double>& input) {
  if (input.size() != mlp.input_dim()) {
    throw std::invalid_argument("baseline: input dimension mismatch");
  }
  double out = mlp.b2;
  for (std::size_t k = 0; k < mlp.hidden_dim(); ++k) {
    const double* row = mlp.w1.row(k);
    double a = mlp.b1[k];
    for (std::size_t j = 0; j < input.size(); ++j) a += row[j] * input[j];
    out += mlp.w2[k] * std::tanh(a);
  }
  return out;
}

std::vector<ParamRef> BaselineState::trainable_refs() {
  std::vector<ParamRef> refs;
  for (std::size_t s = 0; s < signals.size(); ++s) {
    auto& m = signals[s].mlp;
    const std::string base = "baseline." + std::to_string(s);
    refs.push_back({base + ".w1", {m.w1.rows(), m.w1.cols()}, m.w1.data(), m.w1.size()});
    refs.push_back({base + ".b1", {m.b1.size()}, m.b1.data(), m.b1.size()});
    refs.push_back({base + ".w2", {m.w2.size()}, m.w2.data(), m.w2.size()});
    refs.push_back({base + ".b2", {1}, &m.b2, 1});
  }
  return refs;
}

std::vector<ParamRef> BaselineState::state_refs() {
  auto refs = trainable_refs();
  for (std::size_t s = 0; s < signals.size(); ++s) {
    const std::string base = "baseline." + std::to_string(s);
    refs.push_back({base + ".c", {1}, &signals[s].stats.c, 1});
    refs.push_back({base + ".v", {1}, &signals[s].stats.v, 1});
  }
  return refs;
}

GradientSet BaselineState::gradient_template() const {
  return GradientSet::zeros_like(const_cast<BaselineState*>(this)->trainable_refs());
}

BaselineState init_baseline_state(const std::vector<std::size_t>& input_dims,
                                  std::size_t hidden_dim, double alpha, RngStream rng,
                                  double scale) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("baseline: alpha must be in [0, 1]");
  }
  BaselineState state;
  state.alpha = alpha;
  for (std::size_t s = 0; s < input_dims.size(); ++s) {
    BaselineState::PerSignal ps;
    ps.mlp = init_baseline_mlp(input_dims[s], hidden_dim, rng.derive(30, s), scale);
    state.signals.push_back(std::move(ps));
  }
  return state;
}

void accumulate_baseline_grad(const BaselineState& state, std::size_t signal,
                              const std::vector<double>& input, double coeff,
                              GradientSet& out) {
  if (signal >= state.signals.size()) {
    throw std::invalid_argument("baseline: signal index out of range");
  }
  const auto& mlp = state.signals[signal].mlp;
  if (input.size() != mlp.input_dim()) {
    throw std::invalid_argument("baseline: input dimension mismatch");
  }
  const std::string base = "baseline." + std::to_string(signal);
  auto& gw1 = out.at(base + ".w1");
  auto& gb1 = out.at(base + ".b1");
  auto& gw2 = out.at(base + ".w2");
  auto& gb2 = out.at(base + ".b2");

  gb2.values[0] += coeff;
  for (std::size_t k = 0; k < mlp.hidden_dim(); ++k) {
    const double* row = mlp.w1.row(k);
    double a = mlp.b1[k];
    for (std::size_t j = 0; j < input.size(); ++j) a += row[j] * input[j];
    const double t = std::tanh(a);
    gw2.values[k] += coeff * t;
    const double g = coeff * mlp.w2[k] * (1.0 - t * t);
    gb1.values[k] += g;
    double* wrow = gw1.values.data() + k * input.size();
    for (std::size_t j = 0; j < input.size(); ++j) wrow[j] += g * input[j];
  }
}

std::vector<double> update_signal_stats(SignalStats& stats, double alpha,
                                        const std::vector<double>& batch_signals,
                                        bool subtract_mean, bool normalize) {
  if (batch_signals.empty()) {
    throw std::invalid_argument("baseline: cannot update statistics from an empty batch");
  }
  const double n = static_cast<double>(batch_signals.size());
  double cb = 0.0;
  for (double l : batch_signals) cb += l;
  cb /= n;
  double vb = 0.0;
  for (double l : batch_signals) vb += (l - cb) * (l - cb);
  vb /= n;  // population convention

  stats.c = alpha * stats.c + (1.0 - alpha) * cb;
  stats.v = alpha * stats.v + (1.0 - alpha) * vb;

  const double shift = subtract_mean ? stats.c : 0.0;
  const double denom = normalize ? std::max(1.0, std::sqrt(stats.v)) : 1.0;
  std::vector<double> out(batch_signals.size());
  for (std::size_t i = 0; i < batch_signals.size(); ++i) {
    out[i] = (batch_signals[i] - shift) / denom;
  }
  return out;
}

}  // namespace nvil
