#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include <gmpxx.h>

namespace amiagg {

/// Deterministic ChaCha20-backed random source. Every randomized operation
/// takes one of these explicitly so runs are replayable from a seed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return NextU64(); }

  std::uint64_t NextU64();
  void Fill(std::span<std::uint8_t> out);

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t UniformBelow(std::uint64_t bound);
  mpz_class UniformBelow(const mpz_class& bound);

  /// Independent child stream; used to give each simulated node its own rng.
  Rng Fork();

 private:
  void Refill();

  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, 64> buffer_{};
  std::size_t buffer_pos_ = 64;
};

}  // namespace amiagg
