// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nvil/inference.hpp"
#include "nvil/model.hpp"

namespace nviltest {

using nvil::GradientSet;
using nvil::LatentConfig;
using nvil::Observation;
using nvil::ParamRef;

// Overwrites every trainable parameter with U(-scale, scale) draws so tests
// can work far from the near-uniform init regime.
inline void randomize(std::vector<ParamRef> refs, double scale, nvil::RngStream rng) {
  for (std::size_t r = 0; r < refs.size(); ++r) {
    auto stream = rng.derive(r);
    for (std::size_t i = 0; i < refs[r].size; ++i) {
      refs[r].data[i] = scale * (2.0 * stream.next_double() - 1.0);
    }
  }
}

// Central finite differences of an arbitrary scalar function over every
// trainable parameter. Independent of all analytic gradient code.
inline GradientSet finite_difference_grad(std::vector<ParamRef> refs,
                                          const std::function<double()>& f,
                                          double step = 1e-5) {
  GradientSet g = GradientSet::zeros_like(refs);
  for (auto& ref : refs) {
    auto& entry = g.at(ref.name);
    for (std::size_t i = 0; i < ref.size; ++i) {
      const double saved = ref.data[i];
      ref.data[i] = saved + step;
      const double up = f();
      ref.data[i] = saved - step;
      const double down = f();
      ref.data[i] = saved;
      entry.values[i] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

// Max over parameters of |a - b| / max(1, |b|).
inline double max_rel_diff(const GradientSet& a, const GradientSet& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.entries().size(); ++k) {
    const auto& ea = a.entries()[k];
    const auto& eb = b.entries()[k];
    for (std::size_t i = 0; i < ea.values.size(); ++i) {
      const double d = std::fabs(ea.values[i] - eb.values[i]) /
                       std::max(1.0, std::fabs(eb.values[i]));
      worst = std::max(worst, d);
    }
  }
  return worst;
}

// Visits all binary vectors of the given width, low bit first.
template <typename F>
void for_each_bits(std::size_t width, F&& body) {
  std::vector<double> bits(width, 0.0);
  for (std::uint64_t code = 0; code < (1ULL << width); ++code) {
    for (std::size_t j = 0; j < width; ++j) bits[j] = double((code >> j) & 1ULL);
    body(bits);
  }
}

// Visits all latent configurations for the given layer widths.
template <typename F>
void for_each_latent(const std::vector<std::size_t>& widths, F&& body) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  LatentConfig h(widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) h[i].assign(widths[i], 0.0);
  for (std::uint64_t code = 0; code < (1ULL << total); ++code) {
    std::uint64_t c = code;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      for (std::size_t j = 0; j < widths[i]; ++j) {
        h[i][j] = double(c & 1ULL);
        c >>= 1;
      }
    }
    body(h);
  }
}

// Small randomly-parameterized model + matching inference net.
struct TinyPair {
  nvil::ModelParams model;
  nvil::InferenceParams inference;
};

inline TinyPair make_tiny(std::size_t visible_dim, const std::vector<std::size_t>& widths,
                          double scale, std::uint64_t seed, bool ar_model = false,
                          bool ar_inference = false,
                          nvil::VisibleKind kind = nvil::VisibleKind::bernoulli) {
  TinyPair p;
  p.model = nvil::init_model(visible_dim, widths, kind, ar_model, nvil::RngStream(seed, 100));
  p.inference =
      nvil::init_inference(visible_dim, widths, ar_inference, nvil::RngStream(seed, 200));
  randomize(p.model.trainable_refs(), scale, nvil::RngStream(seed, 300));
  randomize(p.inference.trainable_refs(), scale, nvil::RngStream(seed, 400));
  return p;
}

}  // namespace nviltest
