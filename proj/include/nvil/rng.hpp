// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>

namespace nvil {

namespace detail {

// SplitMix64 finalizer (Stafford mix13).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

// Combines tag values into a single stream id.
inline std::uint64_t stream_key(std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t k = detail::mix64(a + detail::kGolden);
  k = detail::mix64(k ^ (b + detail::kGolden));
  k = detail::mix64(k ^ (c + detail::kGolden));
  k = detail::mix64(k ^ (d + detail::kGolden));
  return k;
}

// Deterministic splittable random stream in the SplittableRandom style:
// the state advances by a per-stream odd gamma and is finalized with
// SplitMix64. The same (seed, stream_id) always replays the same sequence;
// distinct stream ids get distinct (state, gamma) pairs.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    state_ = detail::mix64(seed ^ detail::mix64(stream_id + detail::kGolden));
    gamma_ = detail::mix64(stream_id ^ detail::mix64(seed + 0x6A09E667F3BCC909ULL)) | 1ULL;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    state_ += gamma_;
    return detail::mix64(state_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Uniform in {0, ..., n-1} by rejection-free modulo of a 64-bit draw;
  // bias is below 2^-53 for any n that fits in memory here.
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(next_double() * static_cast<double>(n));
  }

  // Child stream keyed off this stream's identity, independent of how much
  // of this stream has been consumed.
  RngStream derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return RngStream(seed_, stream_key(stream_id_, a, b, c));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t gamma_;
};

}  // namespace nvil
