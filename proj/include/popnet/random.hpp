#pragma once

// <random> distributions are implementation-defined, so sampling goes
// through Boost.Random, whose algorithms are fixed across platforms.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace popnet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash a root seed together with a key path into an independent stream
/// seed. Streams depend only on the key, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(seed, keys));
}

// Stream domains, so different stages never share a stream.
namespace stream {
inline constexpr std::uint64_t kStars = 1;
inline constexpr std::uint64_t kBootstrap = 2;
inline constexpr std::uint64_t kPermutation = 3;
inline constexpr std::uint64_t kScenario = 4;
inline constexpr std::uint64_t kSubject = 5;
inline constexpr std::uint64_t kReplicate = 6;
}  // namespace stream

inline double uniform01(Rng& rng) { return boost::random::uniform_01<double>{}(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) {
  return boost::random::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) {
  return boost::random::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Fisher-Yates shuffle with a portable index draw.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = uniform_int(rng, 0, i);
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
  }
}

}  // namespace popnet
