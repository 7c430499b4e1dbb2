#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sampa/vecmath.hpp"

namespace sampa {

/// Counter-based random source: the k-th draw of a stream is a pure hash of
/// (seed, stream, k). Child streams obtained through split() depend only on
/// the parent's identity and the child id, never on how many draws other
/// streams have made, so worker layout cannot change any sample.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  /// Independent child stream keyed by `id`. Does not advance this stream.
  SeededRng split(std::uint64_t id) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller; consumes two draws.
  double normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const SeededRng&, const SeededRng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// i.i.d. N(0, 1) entries. dim must be >= 1.
ParamVector gaussian_vector(SeededRng& rng, std::size_t dim);

/// Uniformly random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> random_permutation(SeededRng& rng, std::size_t n);

/// Stable 64-bit hash of a byte string (FNV-1a), used for config fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size) noexcept;

}  // namespace sampa
