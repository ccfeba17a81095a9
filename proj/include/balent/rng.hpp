#pragma once
// Deterministic random streams. Every random choice in the project flows
// through splitmix64 so outputs are byte-identical across runs and platforms
// with the same floating-point environment. Per-record streams are derived
// from (seed, tag) via derive_stream below; the mix is part of the output
// contract and must not change.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace balent {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream seed for (seed, tag): one splitmix64 step of the seed, xor'd with
// the FNV-1a hash of the tag, then one more splitmix64 step.
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag) {
  std::uint64_t s = seed;
  std::uint64_t mixed = splitmix64_next(s) ^ fnv1a64(tag);
  return splitmix64_next(mixed);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform in the open interval (0,1)
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; consumes two uniforms per draw
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // uniform in [0, bound); rejection sampling keeps the draw unbiased
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t excess = (UINT64_MAX % bound + 1) % bound;
    const std::uint64_t cutoff = UINT64_MAX - excess;
    std::uint64_t x = next_u64();
    while (x > cutoff) x = next_u64();
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates; std::shuffle is not used anywhere because its draw sequence
// is implementation-defined.
template <class T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.next_below(i)]);
  }
}

}  // namespace balent
