#pragma once

#include <array>
#include <cstdint>

namespace moeforge {

/// xoshiro256** generator keyed by (seed, stream-id).
///
/// All distributions are computed here from raw 64-bit draws so sequences are
/// identical on every platform (std::normal_distribution is not portable).
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (one variate per call, two uniforms consumed).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  const State& state() const { return s_; }
  void set_state(const State& s) { s_ = s; }

  std::uint64_t stream() const { return stream_; }

 private:
  State s_{};
  std::uint64_t stream_ = 0;
};

}  // namespace moeforge
