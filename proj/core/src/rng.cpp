#include "sampa/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sampa {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL));
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

SeededRng SeededRng::split(std::uint64_t id) const noexcept {
  return SeededRng(seed_, mix64(stream_ ^ mix64(id + kGolden)));
}

std::uint64_t SeededRng::next_u64() noexcept {
  const std::uint64_t out = mix64(key_ + kGolden * (counter_ + 1));
  ++counter_;
  return out;
}

double SeededRng::uniform() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_below(std::uint64_t bound) noexcept {
  // Multiply-shift; the bias is below 2^-64 * bound which is negligible here.
  const auto wide = static_cast<unsigned __int128>(next_u64()) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

double SeededRng::normal() noexcept {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ParamVector gaussian_vector(SeededRng& rng, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("gaussian_vector: dim must be >= 1");
  ParamVector out(dim);
  for (double& v : out) v = rng.normal();
  return out;
}

std::vector<std::size_t> random_permutation(SeededRng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) noexcept {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace sampa
