#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cfpt {

/// Engine used everywhere in the library. Every stochastic routine takes an
/// explicit reference to one of these; nothing draws from global state.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a numeric stream id.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

/// Same as above with a textual stream label ("dataset/source", "method/cfpt", ...).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

inline Rng make_rng(std::uint64_t seed) { return Rng{splitmix64(seed)}; }

/// Uniform draw on the open interval (0, 1), 53 bits of resolution.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Exp(1) draw.
double standard_exponential(Rng& rng);

/// Gumbel(location 0, scale 1) draw.
double standard_gumbel(Rng& rng);

/// Draws an index from a discrete distribution by inversion. `probs` need not
/// be normalized; entries must be nonnegative with a positive sum.
template <typename Range>
std::size_t sample_discrete(const Range& probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform_open(rng) * total;
  std::size_t last_positive = 0;
  std::size_t i = 0;
  for (double p : probs) {
    if (p > 0.0) {
      if (u < p) return i;
      u -= p;
      last_positive = i;
    }
    ++i;
  }
  return last_positive;
}

}  // namespace cfpt
