#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace repmetric {

// splitmix64, used to expand a single u64 seed into generator state.
struct SplitMix64 {
  uint64_t state;

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256** 1.0 (Blackman & Vigna). Chosen as the project-wide PRNG:
// the output stream is fully specified by the seed, independent of
// platform and standard library.
class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& word : state_) word = sm.next();
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound) via rejection sampling.
  uint64_t next_below(uint64_t bound) {
    const uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    uint64_t value;
    do {
      value = next();
    } while (value < threshold);
    return value % bound;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
};

// Draws `n_take` distinct indices from [0, n_total) and returns them sorted
// ascending, so the selection preserves the source row order. Requires
// n_take <= n_total (checked by callers).
std::vector<std::size_t> sample_without_replacement(std::size_t n_total, std::size_t n_take, uint64_t seed);

}  // namespace repmetric
