// Apache License, Version 2.0, refer to LICENSE.txt
#include "doctest.h"

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "nvil/model.hpp"

using namespace nvil;
using namespace nviltest;

TEST_CASE("log_joint uniform factors") {
  auto model = init_model(2, {1}, VisibleKind::bernoulli, false, RngStream(1, 1), 0.0);
  const Observation x{1.0, 0.0};
  const LatentConfig h{{1.0}};
  CHECK(log_joint(model, x, h) == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-12));

  auto doc = init_model(4, {1}, VisibleKind::multinomial, false, RngStream(1, 2), 0.0);
  const Observation counts{1.0, 0.0, 1.0, 0.0};  // document of length 2
  // Uniform softmax: the visible factor contributes 2 ln(1/4), the one-bit
  // prior adds ln(1/2) on top.
  const auto parts = joint_layer_logprobs(doc, counts, h);
  CHECK(parts.visible == doctest::Approx(2.0 * std::log(0.25)).epsilon(1e-12));
  CHECK(log_joint(doc, counts, h) ==
        doctest::Approx(2.0 * std::log(0.25) + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log_joint rejects bad shapes and negative counts") {
  auto model = init_model(3, {2}, VisibleKind::bernoulli, false, RngStream(1, 3));
  CHECK_THROWS_AS(log_joint(model, {1.0, 0.0}, {{0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(log_joint(model, {1.0, 0.0, 1.0}, {{0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(log_joint(model, {1.0, 0.0, 1.0}, {{0.0, 1.0}, {1.0}}), std::invalid_argument);

  auto doc = init_model(3, {2}, VisibleKind::multinomial, false, RngStream(1, 4));
  CHECK_THROWS_AS(log_joint(doc, {1.0, -1.0, 0.0}, {{0.0, 1.0}}), std::invalid_argument);
}

TEST_CASE("joint distribution normalizes over all configurations") {
  auto check_normalized = [](ModelParams& model, std::size_t visible_dim) {
    double total = 0.0;
    for_each_bits(visible_dim, [&](const std::vector<double>& x) {
      for_each_latent(model.latent_widths(), [&](const LatentConfig& h) {
        total += std::exp(log_joint(model, x, h));
      });
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  };

  auto plain = make_tiny(3, {2}, 1.5, 42).model;
  check_normalized(plain, 3);

  auto deep = make_tiny(3, {2, 2}, 1.2, 43).model;
  check_normalized(deep, 3);

  auto ar = make_tiny(3, {3}, 1.5, 44, true).model;
  check_normalized(ar, 3);
}

TEST_CASE("zeroed autoregressive masks reduce to the plain network") {
  auto ar = make_tiny(4, {3, 2}, 1.0, 45, true).model;
  ModelParams plain = ar;
  // Kill the ar contribution via the masks, then drop the blocks entirely.
  for (auto& l : plain.layers) {
    if (l.ar) l.ar->mask = Matrix(l.ar->mask.rows(), l.ar->mask.cols(), 0.0);
  }
  if (plain.prior_ar) {
    plain.prior_ar->mask = Matrix(plain.prior_ar->mask.rows(), plain.prior_ar->mask.cols(), 0.0);
  }
  ModelParams stripped = ar;
  for (auto& l : stripped.layers) l.ar.reset();
  stripped.prior_ar.reset();

  for_each_bits(4, [&](const std::vector<double>& x) {
    for_each_latent(ar.latent_widths(), [&](const LatentConfig& h) {
      CHECK(log_joint(plain, x, h) == log_joint(stripped, x, h));
    });
  });
}

TEST_CASE("ancestral samples agree with their reported joint") {
  auto pair = make_tiny(4, {3, 2}, 1.0, 46, true);
  RngStream rng(9, 5);
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_ancestral(pair.model, rng);
    CHECK(s.log_joint == log_joint(pair.model, s.x, s.h));
  }
}

TEST_CASE("ancestral sampling marginals at zero parameters") {
  auto model = init_model(3, {2}, VisibleKind::bernoulli, false, RngStream(1, 6), 0.0);
  RngStream rng(31, 7);
  double ones = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_ancestral(model, rng);
    for (double b : s.x) ones += b;
    for (const auto& layer : s.h) {
      for (double b : layer) ones += b;
    }
  }
  CHECK(std::fabs(ones / (5.0 * draws) - 0.5) < 0.01);
}

TEST_CASE("huge prior logits force the deepest layer on") {
  auto model = init_model(2, {3}, VisibleKind::bernoulli, false, RngStream(1, 8), 0.0);
  for (auto& p : model.prior_logits) p = 1e6;
  RngStream rng(3, 3);
  for (int i = 0; i < 50; ++i) {
    const auto s = sample_ancestral(model, rng);
    for (double b : s.h[0]) CHECK(b == 1.0);
  }
}

TEST_CASE("ancestral sampling matches enumerated probabilities") {
  auto model = make_tiny(2, {2}, 1.2, 47).model;
  // Exact joint over the 2^4 outcomes.
  std::map<std::uint64_t, double> exact;
  for_each_bits(2, [&](const std::vector<double>& x) {
    for_each_latent(model.latent_widths(), [&](const LatentConfig& h) {
      std::uint64_t key = 0;
      for (double b : x) key = key * 2 + (b != 0.0);
      for (double b : h[0]) key = key * 2 + (b != 0.0);
      exact[key] = std::exp(log_joint(model, x, h));
    });
  });

  std::map<std::uint64_t, double> counts;
  RngStream rng(77, 8);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_ancestral(model, rng);
    std::uint64_t key = 0;
    for (double b : s.x) key = key * 2 + (b != 0.0);
    for (double b : s.h[0]) key = key * 2 + (b != 0.0);
    counts[key] += 1.0;
  }
  for (const auto& [key, p] : exact) {
    const double freq = counts[key] / draws;
    const double se = std::sqrt(p * (1.0 - p) / draws);
    CHECK(std::fabs(freq - p) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("multinomial ancestral sampling needs a length") {
  auto doc = make_tiny(5, {2}, 0.8, 48, false, false, VisibleKind::multinomial).model;
  RngStream rng(5, 1);
  CHECK_THROWS_AS(sample_ancestral(doc, rng), std::invalid_argument);
  const auto s = sample_ancestral(doc, rng, 7);
  double total = 0.0;
  for (double c : s.x) total += c;
  CHECK(total == 7.0);
  CHECK(s.log_joint == log_joint(doc, s.x, s.h));

  auto bern = make_tiny(3, {2}, 0.8, 49).model;
  CHECK_THROWS_AS(sample_ancestral(bern, rng, 7), std::invalid_argument);
}

TEST_CASE("theta gradient: uniform hand case") {
  auto model = init_model(2, {1}, VisibleKind::bernoulli, false, RngStream(1, 9), 0.0);
  const auto g = grad_log_joint_theta(model, {1.0, 1.0}, {{1.0}});
  CHECK(g.at("model.layer0.biases").values[0] == doctest::Approx(0.5));
  CHECK(g.at("model.layer0.biases").values[1] == doctest::Approx(0.5));
  CHECK(g.at("model.prior_logits").values[0] == doctest::Approx(0.5));
  // Parent is on, so weight gradient equals the bias gradient here.
  CHECK(g.at("model.layer0.weights").values[0] == doctest::Approx(0.5));
}

TEST_CASE("theta gradient of weights vanishes when the parent is off") {
  auto model = make_tiny(3, {2}, 1.0, 50).model;
  const Observation x{1.0, 0.0, 1.0};
  const LatentConfig h{{0.0, 1.0}};  // first latent off
  const auto g = grad_log_joint_theta(model, x, h);
  const auto& gw = g.at("model.layer0.weights");
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(gw.values[j * 2 + 0] == 0.0);
    CHECK(gw.values[j * 2 + 1] != 0.0);
  }
}

TEST_CASE("theta gradient matches finite differences") {
  auto check_fd = [](ModelParams model, const Observation& x, const LatentConfig& h) {
    const auto analytic = grad_log_joint_theta(model, x, h);
    const auto fd = finite_difference_grad(model.trainable_refs(),
                                           [&]() { return log_joint(model, x, h); });
    CHECK(max_rel_diff(analytic, fd) < 1e-6);
  };

  check_fd(make_tiny(3, {2, 2}, 1.5, 51).model, {1.0, 0.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
  check_fd(make_tiny(3, {3}, 1.5, 52, true).model, {0.0, 1.0, 1.0}, {{1.0, 1.0, 0.0}});
  check_fd(make_tiny(5, {2}, 1.2, 53, false, false, VisibleKind::multinomial).model,
           {2.0, 0.0, 1.0, 3.0, 0.0}, {{1.0, 0.0}});
  check_fd(make_tiny(4, {2, 3}, 1.2, 54, true).model, {1.0, 1.0, 0.0, 0.0},
           {{0.0, 1.0}, {1.0, 0.0, 1.0}});
}
