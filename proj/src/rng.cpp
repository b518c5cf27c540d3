#include "repmetric/rng.hpp"

#include <algorithm>
#include <numeric>

namespace repmetric {

std::vector<std::size_t> sample_without_replacement(std::size_t n_total, std::size_t n_take,
                                                    uint64_t seed) {
  std::vector<std::size_t> pool(n_total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});

  // Partial Fisher-Yates: the first n_take slots hold the selection.
  Xoshiro256StarStar rng(seed);
  for (std::size_t i = 0; i < n_take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n_total - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n_take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace repmetric
