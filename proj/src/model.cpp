// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/model.hpp"

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

void check_binary_vector(const std::vector<double>& v, const char* what) {
  for (double b : v) {
    if (b != 0.0 && b != 1.0) {
      throw std::invalid_argument(std::string("model: ") + what + " must be binary");
    }
  }
}

}  // namespace

ArBlock ArBlock::lower_triangular(std::size_t width) {
  ArBlock blk;
  blk.weights = Matrix(width, width, 0.0);
  blk.mask = Matrix(width, width, 0.0);
  for (std::size_t j = 1; j < width; ++j) {
    for (std::size_t k = 0; k < j; ++k) blk.mask(j, k) = 1.0;
  }
  return blk;
}

double ArBlock::term(std::size_t j, const std::vector<double>& h) const {
  const double* w = weights.row(j);
  const double* m = mask.row(j);
  double acc = 0.0;
  for (std::size_t k = 0; k < j; ++k) acc += w[k] * m[k] * h[k];
  return acc;
}

std::vector<std::size_t> ModelParams::latent_widths() const {
  std::vector<std::size_t> w(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) w[i] = layers[i].weights.cols();
  return w;
}

std::size_t ModelParams::total_latent_bits() const {
  std::size_t n = 0;
  for (const auto& w : latent_widths()) n += w;
  return n;
}

void ModelParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("model: needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.biases.size() != l.weights.rows()) {
      throw std::invalid_argument("model: bias/weight shape mismatch at layer " + std::to_string(i));
    }
    if (i > 0 && l.weights.rows() != layers[i - 1].weights.cols()) {
      throw std::invalid_argument("model: adjacent layer widths disagree at layer " + std::to_string(i));
    }
    if (l.ar) {
      if (i == 0) throw std::invalid_argument("model: visible layer cannot be autoregressive");
      const std::size_t w = l.weights.rows();
      if (l.ar->weights.rows() != w || l.ar->weights.cols() != w ||
          l.ar->mask.rows() != w || l.ar->mask.cols() != w) {
        throw std::invalid_argument("model: autoregressive block shape mismatch");
      }
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t k = j; k < w; ++k) {
          if (l.ar->mask(j, k) != 0.0) {
            throw std::invalid_argument("model: autoregressive mask not strictly lower triangular");
          }
        }
      }
    }
  }
  if (prior_logits.size() != layers.back().weights.cols()) {
    throw std::invalid_argument("model: prior width must match the deepest layer");
  }
  if (prior_ar) {
    const std::size_t w = prior_logits.size();
    if (prior_ar->weights.rows() != w || prior_ar->weights.cols() != w) {
      throw std::invalid_argument("model: prior autoregressive block shape mismatch");
    }
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t k = j; k < w; ++k) {
        if (prior_ar->mask(j, k) != 0.0) {
          throw std::invalid_argument("model: prior autoregressive mask not strictly lower triangular");
        }
      }
    }
  }
}

std::vector<ParamRef> ModelParams::trainable_refs() {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string base = "model.layer" + std::to_string(i);
    refs.push_back({base + ".weights", {l.weights.rows(), l.weights.cols()},
                    l.weights.data(), l.weights.size()});
    refs.push_back({base + ".biases", {l.biases.size()}, l.biases.data(), l.biases.size()});
    if (l.ar) {
      refs.push_back({base + ".ar_weights", {l.ar->weights.rows(), l.ar->weights.cols()},
                      l.ar->weights.data(), l.ar->weights.size()});
    }
  }
  refs.push_back({"model.prior_logits", {prior_logits.size()}, prior_logits.data(),
                  prior_logits.size()});
  if (prior_ar) {
    refs.push_back({"model.prior_ar_weights", {prior_ar->weights.rows(), prior_ar->weights.cols()},
                    prior_ar->weights.data(), prior_ar->weights.size()});
  }
  return refs;
}

GradientSet ModelParams::gradient_template() const {
  return GradientSet::zeros_like(const_cast<ModelParams*>(this)->trainable_refs());
}

std::vector<ParamRef> ModelParams::state_refs() {
  auto refs = trainable_refs();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (l.ar) {
      refs.push_back({"model.layer" + std::to_string(i) + ".ar_mask",
                      {l.ar->mask.rows(), l.ar->mask.cols()}, l.ar->mask.data(),
                      l.ar->mask.size()});
    }
  }
  if (prior_ar) {
    refs.push_back({"model.prior_ar_mask", {prior_ar->mask.rows(), prior_ar->mask.cols()},
                    prior_ar->mask.data(), prior_ar->mask.size()});
  }
  return refs;
}

ModelParams init_model(std::size_t visible_dim, const std::vector<std::size_t>& latent_widths,
                       VisibleKind kind, bool autoregressive_latents, RngStream rng,
                       double scale) {
  if (latent_widths.empty()) throw std::invalid_argument("model: needs at least one latent layer");
  ModelParams m;
  m.visible_kind = kind;
  std::size_t child = visible_dim;
  for (std::size_t i = 0; i < latent_widths.size(); ++i) {
    SbnLayer l;
    l.weights = Matrix(child, latent_widths[i]);
    fill_uniform(l.weights.data(), l.weights.size(), scale, rng.derive(1, i));
    l.biases.assign(child, 0.0);
    if (autoregressive_latents && i > 0) {
      l.ar = ArBlock::lower_triangular(child);
      fill_uniform(l.ar->weights.data(), l.ar->weights.size(), scale, rng.derive(2, i));
    }
    m.layers.push_back(std::move(l));
    child = latent_widths[i];
  }
  m.prior_logits.assign(latent_widths.back(), 0.0);
  if (autoregressive_latents) {
    m.prior_ar = ArBlock::lower_triangular(latent_widths.back());
    fill_uniform(m.prior_ar->weights.data(), m.prior_ar->weights.size(), scale, rng.derive(3));
  }
  m.validate();
  return m;
}

namespace {

void check_shapes(const ModelParams& model, const Observation& x, const LatentConfig& h) {
  const auto widths = model.latent_widths();
  if (h.size() != widths.size()) {
    throw std::invalid_argument("model: latent configuration depth mismatch");
  }
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (h[i].size() != widths[i]) {
      throw std::invalid_argument("model: latent width mismatch at layer " + std::to_string(i + 1));
    }
    check_binary_vector(h[i], "latent state");
  }
  if (x.size() != model.visible_dim()) {
    throw std::invalid_argument("model: observation dimension mismatch");
  }
  if (model.visible_kind == VisibleKind::multinomial) {
    for (double c : x) {
      if (c < 0.0) throw std::invalid_argument("model: negative count in observation");
    }
  } else {
    check_binary_vector(x, "observation");
  }
}

// log prob of a Bernoulli vector given base logits plus an optional
// autoregressive block conditioned on the same vector.
double bernoulli_layer_logprob(const std::vector<double>& base,
                               const std::optional<ArBlock>& ar,
                               const std::vector<double>& bits) {
  double lp = 0.0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    double z = base[j];
    if (ar) z += ar->term(j, bits);
    lp += bernoulli_logprob(bits[j] != 0.0, z);
  }
  return lp;
}

}  // namespace

JointLayerLogProbs joint_layer_logprobs(const ModelParams& model, const Observation& x,
                                        const LatentConfig& h) {
  check_shapes(model, x, h);
  const std::size_t n = model.n_latent_layers();
  JointLayerLogProbs out;
  out.latent.resize(n >= 1 ? n - 1 : 0);

  std::vector<double> base;

  // Prior over h^n.
  out.prior = bernoulli_layer_logprob(model.prior_logits, model.prior_ar, h[n - 1]);

  // P(h^{i} | h^{i+1}) for i = 1..n-1, stored as latent[i-1].
  for (std::size_t i = 1; i < n; ++i) {
    const auto& layer = model.layers[i];
    affine(layer.weights, h[i], layer.biases, base);
    out.latent[i - 1] = bernoulli_layer_logprob(base, layer.ar, h[i - 1]);
  }

  // P(x | h^1).
  affine(model.layers[0].weights, h[0], model.layers[0].biases, base);
  if (model.visible_kind == VisibleKind::bernoulli) {
    double lp = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) lp += bernoulli_logprob(x[j] != 0.0, base[j]);
    out.visible = lp;
  } else {
    const auto ls = log_softmax(base);
    double lp = 0.0;
    for (std::size_t w = 0; w < x.size(); ++w) {
      if (x[w] != 0.0) lp += x[w] * ls[w];
    }
    out.visible = lp;
  }
  return out;
}

double log_joint(const ModelParams& model, const Observation& x, const LatentConfig& h) {
  const auto parts = joint_layer_logprobs(model, x, h);
  double lp = parts.prior + parts.visible;
  for (double v : parts.latent) lp += v;
  return lp;
}

AncestralSample sample_ancestral(const ModelParams& model, RngStream& rng,
                                 std::optional<std::size_t> doc_length) {
  model.validate();
  if ((model.visible_kind == VisibleKind::multinomial) != doc_length.has_value()) {
    throw std::invalid_argument(
        "model: doc_length is required for multinomial visibles and rejected otherwise");
  }
  const std::size_t n = model.n_latent_layers();
  const auto widths = model.latent_widths();
  AncestralSample s;
  s.h.assign(n, {});

  // Deepest layer from the prior, unit by unit so autoregressive terms see
  // the bits already drawn.
  s.h[n - 1].assign(widths[n - 1], 0.0);
  for (std::size_t j = 0; j < widths[n - 1]; ++j) {
    double z = model.prior_logits[j];
    if (model.prior_ar) z += model.prior_ar->term(j, s.h[n - 1]);
    s.h[n - 1][j] = rng.next_bernoulli(stable_sigmoid(z)) ? 1.0 : 0.0;
  }

  std::vector<double> base;
  for (std::size_t i = n - 1; i >= 1; --i) {
    const auto& layer = model.layers[i];
    affine(layer.weights, s.h[i], layer.biases, base);
    s.h[i - 1].assign(widths[i - 1], 0.0);
    for (std::size_t j = 0; j < widths[i - 1]; ++j) {
      double z = base[j];
      if (layer.ar) z += layer.ar->term(j, s.h[i - 1]);
      s.h[i - 1][j] = rng.next_bernoulli(stable_sigmoid(z)) ? 1.0 : 0.0;
    }
  }

  affine(model.layers[0].weights, s.h[0], model.layers[0].biases, base);
  if (model.visible_kind == VisibleKind::bernoulli) {
    s.x.assign(base.size(), 0.0);
    for (std::size_t j = 0; j < base.size(); ++j) {
      s.x[j] = rng.next_bernoulli(stable_sigmoid(base[j])) ? 1.0 : 0.0;
    }
  } else {
    const auto ls = log_softmax(base);
    std::vector<double> probs(ls.size());
    for (std::size_t w = 0; w < ls.size(); ++w) probs[w] = std::exp(ls[w]);
    s.x.assign(ls.size(), 0.0);
    for (std::size_t t = 0; t < *doc_length; ++t) {
      double u = rng.next_double();
      std::size_t w = 0;
      for (; w + 1 < probs.size(); ++w) {
        if (u < probs[w]) break;
        u -= probs[w];
      }
      s.x[w] += 1.0;
    }
  }

  s.log_joint = log_joint(model, s.x, s.h);
  return s;
}

namespace {

// coeff_j = (target_j - p_j) contributions for one Bernoulli layer, written
// into the weight/bias/ar gradient entries.
void accumulate_bernoulli_layer(const std::vector<double>& base,
                                const std::optional<ArBlock>& ar,
                                const std::vector<double>& bits,
                                const std::vector<double>& parent, double coeff,
                                GradientSet::Entry& gw, GradientSet::Entry& gb,
                                GradientSet::Entry* gar) {
  const std::size_t rows = bits.size();
  const std::size_t cols = parent.size();
  for (std::size_t j = 0; j < rows; ++j) {
    double z = base[j];
    if (ar) z += ar->term(j, bits);
    const double r = coeff * (bits[j] - stable_sigmoid(z));
    gb.values[j] += r;
    double* wrow = gw.values.data() + j * cols;
    for (std::size_t k = 0; k < cols; ++k) wrow[k] += r * parent[k];
    if (ar && gar) {
      double* arow = gar->values.data() + j * rows;
      const double* mrow = ar->mask.row(j);
      for (std::size_t k = 0; k < j; ++k) arow[k] += r * mrow[k] * bits[k];
    }
  }
}

}  // namespace

void accumulate_grad_log_joint_theta(const ModelParams& model, const Observation& x,
                                     const LatentConfig& h, double coeff, GradientSet& out) {
  check_shapes(model, x, h);
  const std::size_t n = model.n_latent_layers();
  std::vector<double> base;

  // Visible conditional.
  {
    const auto& layer = model.layers[0];
    affine(layer.weights, h[0], layer.biases, base);
    auto& gw = out.at("model.layer0.weights");
    auto& gb = out.at("model.layer0.biases");
    if (model.visible_kind == VisibleKind::bernoulli) {
      accumulate_bernoulli_layer(base, std::nullopt, x, h[0], coeff, gw, gb, nullptr);
    } else {
      const auto ls = log_softmax(base);
      double length = 0.0;
      for (double c : x) length += c;
      for (std::size_t w = 0; w < x.size(); ++w) {
        const double r = coeff * (x[w] - length * std::exp(ls[w]));
        gb.values[w] += r;
        double* wrow = gw.values.data() + w * h[0].size();
        for (std::size_t k = 0; k < h[0].size(); ++k) wrow[k] += r * h[0][k];
      }
    }
  }

  // Latent conditionals.
  for (std::size_t i = 1; i < n; ++i) {
    const auto& layer = model.layers[i];
    affine(layer.weights, h[i], layer.biases, base);
    const std::string prefix = "model.layer" + std::to_string(i);
    auto& gw = out.at(prefix + ".weights");
    auto& gb = out.at(prefix + ".biases");
    GradientSet::Entry* gar = layer.ar ? &out.at(prefix + ".ar_weights") : nullptr;
    accumulate_bernoulli_layer(base, layer.ar, h[i - 1], h[i], coeff, gw, gb, gar);
  }

  // Prior.
  {
    auto& gp = out.at("model.prior_logits");
    GradientSet::Entry* gar = model.prior_ar ? &out.at("model.prior_ar_weights") : nullptr;
    const auto& bits = h[n - 1];
    for (std::size_t j = 0; j < bits.size(); ++j) {
      double z = model.prior_logits[j];
      if (model.prior_ar) z += model.prior_ar->term(j, bits);
      const double r = coeff * (bits[j] - stable_sigmoid(z));
      gp.values[j] += r;
      if (gar) {
        double* arow = gar->values.data() + j * bits.size();
        const double* mrow = model.prior_ar->mask.row(j);
        for (std::size_t k = 0; k < j; ++k) arow[k] += r * mrow[k] * bits[k];
      }
    }
  }
}

GradientSet grad_log_joint_theta(const ModelParams& model, const Observation& x,
                                 const LatentConfig& h) {
  GradientSet g = model.gradient_template();
  accumulate_grad_log_joint_theta(model, x, h, 1.0, g);
  return g;
}

}  // namespace nvil
