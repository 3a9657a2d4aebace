// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>

#include "nvil/rng.hpp"

namespace nvil {

// Pre-sigmoid activations, natural-log-odds units. All entries must be finite.
using LogitVector = std::vector<double>;

// Numerically stable logistic function. No clamping: the algebra itself
// avoids overflow for |z| up to (and well past) 700. Throws on non-finite z.
double stable_sigmoid(double z);

// log sigmoid(z) = -log(1 + e^-z), stable over the full double range.
double log_sigmoid(double z);

// bit * log sigmoid(logit) + (1 - bit) * log sigmoid(-logit), in nats.
double bernoulli_logprob(int bit, double logit);

// logits - logsumexp(logits); exp of the result sums to 1. Rejects empty input.
std::vector<double> log_softmax(const std::vector<double>& logits);

// Streaming-safe log(sum(exp(v))) with max subtraction.
double logsumexp(const std::vector<double>& v);

// Independent Bernoulli draws, bit i ~ Bernoulli(sigmoid(logits[i])).
std::vector<double> sample_bernoulli_vector(const LogitVector& logits, RngStream& rng);

}  // namespace nvil
