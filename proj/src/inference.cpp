// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/inference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nvil {

namespace {

void fill_uniform(double* data, std::size_t n, double scale, RngStream rng) {
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = scale * (2.0 * rng.next_double() - 1.0);
  }
}

}  // namespace

std::vector<std::size_t> InferenceParams::latent_widths() const {
  std::vector<std::size_t> w(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) w[i] = layers[i].weights.rows();
  return w;
}

std::size_t InferenceParams::total_latent_bits() const {
  std::size_t n = 0;
  for (const auto& w : latent_widths()) n += w;
  return n;
}

void InferenceParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("inference: needs at least one layer");
  if (input_mean.size() != layers[0].weights.cols()) {
    throw std::invalid_argument("inference: input_mean dimension mismatch");
  }
  for (double m : input_mean) {
    if (!std::isfinite(m)) throw std::invalid_argument("inference: input_mean must be finite");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.biases.size() != l.weights.rows()) {
      throw std::invalid_argument("inference: bias/weight shape mismatch at layer " +
                                  std::to_string(i));
    }
    if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows()) {
      throw std::invalid_argument("inference: adjacent layer widths disagree at layer " +
                                  std::to_string(i));
    }
    if (l.ar) {
      const std::size_t w = l.weights.rows();
      if (l.ar->weights.rows() != w || l.ar->weights.cols() != w ||
          l.ar->mask.rows() != w || l.ar->mask.cols() != w) {
        throw std::invalid_argument("inference: autoregressive block shape mismatch");
      }
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t k = j; k < w; ++k) {
          if (l.ar->mask(j, k) != 0.0) {
            throw std::invalid_argument(
                "inference: autoregressive mask not strictly lower triangular");
          }
        }
      }
    }
  }
}

std::vector<ParamRef> InferenceParams::trainable_refs() {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string base = "inference.layer" + std::to_string(i);
    refs.push_back({base + ".weights", {l.weights.rows(), l.weights.cols()},
                    l.weights.data(), l.weights.size()});
    refs.push_back({base + ".biases", {l.biases.size()}, l.biases.data(), l.biases.size()});
    if (l.ar) {
      refs.push_back({base + ".ar_weights", {l.ar->weights.rows(), l.ar->weights.cols()},
                      l.ar->weights.data(), l.ar->weights.size()});
    }
  }
  return refs;
}

std::vector<ParamRef> InferenceParams::state_refs() {
  auto refs = trainable_refs();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (l.ar) {
      refs.push_back({"inference.layer" + std::to_string(i) + ".ar_mask",
                      {l.ar->mask.rows(), l.ar->mask.cols()}, l.ar->mask.data(),
                      l.ar->mask.size()});
    }
  }
  refs.push_back({"inference.input_mean", {input_mean.size()}, input_mean.data(),
                  input_mean.size()});
  return refs;
}

GradientSet InferenceParams::gradient_template() const {
  return GradientSet::zeros_like(const_cast<InferenceParams*>(this)->trainable_refs());
}

InferenceParams init_inference(std::size_t input_dim,
                               const std::vector<std::size_t>& latent_widths,
                               bool autoregressive, RngStream rng, double scale) {
  if (latent_widths.empty()) {
    throw std::invalid_argument("inference: needs at least one latent layer");
  }
  InferenceParams q;
  std::size_t parent = input_dim;
  for (std::size_t i = 0; i < latent_widths.size(); ++i) {
    SbnLayer l;
    l.weights = Matrix(latent_widths[i], parent);
    fill_uniform(l.weights.data(), l.weights.size(), scale, rng.derive(11, i));
    l.biases.assign(latent_widths[i], 0.0);
    if (autoregressive) {
      l.ar = ArBlock::lower_triangular(latent_widths[i]);
      fill_uniform(l.ar->weights.data(), l.ar->weights.size(), scale, rng.derive(12, i));
    }
    q.layers.push_back(std::move(l));
    parent = latent_widths[i];
  }
  q.input_mean.assign(input_dim, 0.0);
  q.validate();
  return q;
}

namespace {

void check_shapes(const InferenceParams& inf, const Observation& x, const LatentConfig* h) {
  if (x.size() != inf.input_dim()) {
    throw std::invalid_argument("inference: observation dimension mismatch");
  }
  if (h) {
    const auto widths = inf.latent_widths();
    if (h->size() != widths.size()) {
      throw std::invalid_argument("inference: latent configuration depth mismatch");
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if ((*h)[i].size() != widths[i]) {
        throw std::invalid_argument("inference: latent width mismatch at layer " +
                                    std::to_string(i + 1));
      }
    }
  }
}

std::vector<double> centered_input(const InferenceParams& inf, const Observation& x) {
  std::vector<double> c(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) c[j] = x[j] - inf.input_mean[j];
  return c;
}

}  // namespace

PosteriorSample sample_posterior(const InferenceParams& inf, const Observation& x,
                                 RngStream& rng) {
  check_shapes(inf, x, nullptr);
  PosteriorSample s;
  const std::size_t n = inf.n_layers();
  s.h.assign(n, {});
  s.per_layer_logq.assign(n, 0.0);

  std::vector<double> parent = centered_input(inf, x);
  std::vector<double> base;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = inf.layers[i];
    affine(layer.weights, parent, layer.biases, base);
    auto& bits = s.h[i];
    bits.assign(layer.weights.rows(), 0.0);
    double lp = 0.0;
    for (std::size_t j = 0; j < bits.size(); ++j) {
      double z = base[j];
      if (layer.ar) z += layer.ar->term(j, bits);
      const double p = stable_sigmoid(z);
      bits[j] = rng.next_bernoulli(p) ? 1.0 : 0.0;
      lp += bernoulli_logprob(bits[j] != 0.0, z);
    }
    s.per_layer_logq[i] = lp;
    s.total_logq += lp;
    parent = bits;
  }
  return s;
}

std::vector<double> layer_logq(const InferenceParams& inf, const Observation& x,
                               const LatentConfig& h) {
  check_shapes(inf, x, &h);
  const std::size_t n = inf.n_layers();
  std::vector<double> out(n, 0.0);
  std::vector<double> base;
  const std::vector<double> cx = centered_input(inf, x);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = inf.layers[i];
    const std::vector<double>& parent = (i == 0) ? cx : h[i - 1];
    affine(layer.weights, parent, layer.biases, base);
    double lp = 0.0;
    for (std::size_t j = 0; j < h[i].size(); ++j) {
      double z = base[j];
      if (layer.ar) z += layer.ar->term(j, h[i]);
      lp += bernoulli_logprob(h[i][j] != 0.0, z);
    }
    out[i] = lp;
  }
  return out;
}

double log_q(const InferenceParams& inf, const Observation& x, const LatentConfig& h) {
  double lp = 0.0;
  for (double v : layer_logq(inf, x, h)) lp += v;
  return lp;
}

PosteriorSample score_configuration(const InferenceParams& inf, const Observation& x,
                                    const LatentConfig& h) {
  PosteriorSample s;
  s.h = h;
  s.per_layer_logq = layer_logq(inf, x, h);
  s.total_logq = 0.0;
  for (double v : s.per_layer_logq) s.total_logq += v;
  return s;
}

void accumulate_grad_log_q_layer(const InferenceParams& inf, const Observation& x,
                                 const LatentConfig& h, std::size_t layer, double coeff,
                                 GradientSet& out) {
  check_shapes(inf, x, &h);
  if (layer >= inf.n_layers()) {
    throw std::invalid_argument("inference: layer index out of range");
  }
  const auto& l = inf.layers[layer];
  const std::vector<double> cx = (layer == 0) ? centered_input(inf, x) : std::vector<double>();
  const std::vector<double>& parent = (layer == 0) ? cx : h[layer - 1];
  std::vector<double> base;
  affine(l.weights, parent, l.biases, base);

  const std::string prefix = "inference.layer" + std::to_string(layer);
  auto& gw = out.at(prefix + ".weights");
  auto& gb = out.at(prefix + ".biases");
  GradientSet::Entry* gar = l.ar ? &out.at(prefix + ".ar_weights") : nullptr;

  const auto& bits = h[layer];
  for (std::size_t j = 0; j < bits.size(); ++j) {
    double z = base[j];
    if (l.ar) z += l.ar->term(j, bits);
    const double r = coeff * (bits[j] - stable_sigmoid(z));
    gb.values[j] += r;
    double* wrow = gw.values.data() + j * parent.size();
    for (std::size_t k = 0; k < parent.size(); ++k) wrow[k] += r * parent[k];
    if (gar) {
      double* arow = gar->values.data() + j * bits.size();
      const double* mrow = l.ar->mask.row(j);
      for (std::size_t k = 0; k < j; ++k) arow[k] += r * mrow[k] * bits[k];
    }
  }
}

GradientSet grad_log_q_phi(const InferenceParams& inf, const Observation& x,
                           const LatentConfig& h) {
  GradientSet g = inf.gradient_template();
  for (std::size_t i = 0; i < inf.n_layers(); ++i) {
    accumulate_grad_log_q_layer(inf, x, h, i, 1.0, g);
  }
  return g;
}

}  // namespace nvil
