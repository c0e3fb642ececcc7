#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace sr {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a named sub-seed from one global seed: splitmix64 over the global
// seed xor'd with an FNV-1a hash of the name. Components (init, shuffle,
// gumbel, data, ...) draw from independent streams this way.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view name) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return splitmix64(global_seed ^ h);
}

// Deterministic RNG. The engine (mt19937_64) and all real/integer mappings
// are pinned here so streams are reproducible across platforms and standard
// library versions; std::uniform_*_distribution is deliberately not used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). Modulo mapping; bias is < n / 2^64.
  int uniform_int(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }

  bool flip() { return (next() & 1u) != 0; }

  // Fisher-Yates with this stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sr
