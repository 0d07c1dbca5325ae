#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace caire::seqcore {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream built on Philox4x32-10.
///
/// A stream is fully described by (key, counter). All distributions are
/// implemented here rather than through <random> so draws are identical on
/// every platform. `split` derives an independent child stream whose key is a
/// hash of the parent key and the child index; the parent is not advanced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : key_(seed) {}
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  Rng split(std::uint64_t stream) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Unbiased integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Standard normal via Box-Muller (one block per draw, no cached spare).
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::array<std::uint32_t, 4> block() noexcept;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer, used for key derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace caire::seqcore
