// Apache License, Version 2.0, refer to LICENSE.txt
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nvil/numerics.hpp"
#include "nvil/rng.hpp"

using namespace nvil;

TEST_CASE("stable_sigmoid basics") {
  CHECK(stable_sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(stable_sigmoid(-2.0) == doctest::Approx(0.11920292).epsilon(1e-7));
  // Large positive logit: no overflow, lands inside (1 - 1e-15, 1].
  const double big = stable_sigmoid(40.0);
  CHECK(big > 1.0 - 1e-15);
  CHECK(big <= 1.0);
  CHECK(std::isfinite(stable_sigmoid(700.0)));
  CHECK(std::isfinite(stable_sigmoid(-700.0)));
  CHECK(stable_sigmoid(-700.0) >= 0.0);
  CHECK_THROWS_AS(stable_sigmoid(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(stable_sigmoid(INFINITY), std::invalid_argument);
}

TEST_CASE("sigmoid symmetry over the stable range") {
  RngStream rng(7, 1);
  for (int i = 0; i < 2000; ++i) {
    const double z = 1400.0 * rng.next_double() - 700.0;
    CHECK(stable_sigmoid(z) + stable_sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bernoulli_logprob values") {
  CHECK(bernoulli_logprob(1, 0.0) == doctest::Approx(-0.6931471805599453).epsilon(1e-12));
  // log sigmoid(-2) = -2 - log(1 + e^-2)
  CHECK(bernoulli_logprob(0, 2.0) ==
        doctest::Approx(-2.0 - std::log1p(std::exp(-2.0))).epsilon(1e-14));
  CHECK(bernoulli_logprob(0, 2.0) == doctest::Approx(-2.126928).epsilon(1e-6));
  const double near_zero = bernoulli_logprob(1, 40.0);
  CHECK(std::isfinite(near_zero));
  CHECK(near_zero < 0.0);
  CHECK(near_zero > -1e-15);
}

TEST_CASE("bernoulli outcomes form a distribution") {
  RngStream rng(11, 2);
  for (int i = 0; i < 2000; ++i) {
    const double z = 1400.0 * rng.next_double() - 700.0;
    const double total = std::exp(bernoulli_logprob(1, z)) + std::exp(bernoulli_logprob(0, z));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log_softmax") {
  const auto uniform = log_softmax({0.0, 0.0, 0.0, 0.0});
  for (double v : uniform) CHECK(v == doctest::Approx(-1.3862943611198906).epsilon(1e-12));

  const auto skewed = log_softmax({1000.0, 0.0});
  CHECK(skewed[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(skewed[1] == doctest::Approx(-1000.0).epsilon(1e-12));

  // Shift invariance.
  const auto a = log_softmax({0.3, -1.2, 2.4});
  const auto b = log_softmax({0.3 + 17.5, -1.2 + 17.5, 2.4 + 17.5});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  CHECK_THROWS_AS(log_softmax({}), std::invalid_argument);
}

TEST_CASE("log_softmax normalizes up to length 1e4") {
  RngStream rng(3, 9);
  std::vector<double> logits(10000);
  for (auto& z : logits) z = 20.0 * rng.next_double() - 10.0;
  const auto ls = log_softmax(logits);
  double sum = 0.0;
  for (double v : ls) sum += std::exp(v);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample_bernoulli_vector extremes and determinism") {
  RngStream rng(5, 77);
  const auto zeros = sample_bernoulli_vector(std::vector<double>(32, -1e6), rng);
  for (double b : zeros) CHECK(b == 0.0);
  const auto ones = sample_bernoulli_vector(std::vector<double>(32, 1e6), rng);
  for (double b : ones) CHECK(b == 1.0);

  // Replaying the same (seed, stream) reproduces the identical sequence.
  RngStream r1(123, 456), r2(123, 456);
  for (int i = 0; i < 1000; ++i) CHECK(r1.next_u64() == r2.next_u64());
  RngStream s1(123, 456), s2(123, 456);
  const std::vector<double> logits(100, 0.35);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_bernoulli_vector(logits, s1) == sample_bernoulli_vector(logits, s2));
  }
}

TEST_CASE("zero logits sample at rate one half") {
  RngStream rng(2024, 4);
  const std::vector<double> logits(100, 0.0);
  double total = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    for (double b : sample_bernoulli_vector(logits, rng)) total += b;
  }
  const double mean = total / (100.0 * draws);
  CHECK(std::fabs(mean - 0.5) < 0.005);
}

TEST_CASE("derived streams differ and replay identically") {
  RngStream base(9, 9);
  auto a = base.derive(1);
  auto b = base.derive(2);
  CHECK(a.next_u64() != b.next_u64());
  auto a2 = base.derive(1);
  auto a3 = base.derive(1);
  for (int i = 0; i < 100; ++i) CHECK(a3.next_u64() == a2.next_u64());
}
