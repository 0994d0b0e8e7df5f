#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "galvae/numerics.hpp"

namespace galvae {

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded through splitmix64. Gaussian draws use Box-Muller
/// and keep the second variate of each pair for the next call, so a stream
/// of single draws equals one batched draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double gaussian();

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> spare_;
};

/// n standard normal variates. Throws DataError when n == 0.
Vector gauss_sample(Rng& rng, std::size_t n);

/// Sub-seed for a labelled stream, e.g. derive_seed(master, "gan:3").
/// Depends only on (master, label), so new labels never shift old ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace galvae
