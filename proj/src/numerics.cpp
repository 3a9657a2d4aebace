// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/numerics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace nvil {

double stable_sigmoid(double z) {
  if (!std::isfinite(z)) {
    throw std::invalid_argument("numerics: stable_sigmoid requires finite input");
  }
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  if (z >= 0.0) {
    return -std::log1p(std::exp(-z));
  }
  return z - std::log1p(std::exp(z));
}

double bernoulli_logprob(int bit, double logit) {
  assert(bit == 0 || bit == 1);
  assert(std::isfinite(logit));
  return bit ? log_sigmoid(logit) : log_sigmoid(-logit);
}

double logsumexp(const std::vector<double>& v) {
  if (v.empty()) {
    throw std::invalid_argument("numerics: logsumexp of empty vector");
  }
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty()) {
    throw std::invalid_argument("numerics: log_softmax of empty vector");
  }
  const double lse = logsumexp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> sample_bernoulli_vector(const LogitVector& logits, RngStream& rng) {
  std::vector<double> bits(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    bits[i] = rng.next_bernoulli(stable_sigmoid(logits[i])) ? 1.0 : 0.0;
  }
  return bits;
}

}  // namespace nvil
