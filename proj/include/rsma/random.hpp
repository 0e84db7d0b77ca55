#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace rsma {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seeded generator that derives independent named sub-streams.
///
/// A child's seed depends only on the parent's seed and the child's name, so
/// drawing from one stream never shifts another one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::string_view name) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(name)));
  }
  Rng split(std::string_view name, std::uint64_t index) const {
    return Rng(detail::splitmix64(detail::splitmix64(seed_ ^ detail::fnv1a(name)) + index));
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return mean + stddev * standard_normal_(engine_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Circularly symmetric CN(0, 1): real and imaginary parts N(0, 1/2).
  std::complex<double> complex_normal() {
    constexpr double kHalfStd = 0.70710678118654752440;
    const double re = normal(0.0, kHalfStd);
    const double im = normal(0.0, kHalfStd);
    return {re, im};
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> standard_normal_{0.0, 1.0};
};

}  // namespace rsma
