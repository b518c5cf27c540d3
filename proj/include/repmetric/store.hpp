#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

// Returns a copy with unit-L2 rows and normalized=true. Idempotent.
// Throws ZeroNormRow for any exactly-zero row.
EmbeddingSet l2_normalize(const EmbeddingSet& set);

struct AlignResult {
  std::vector<EmbeddingSet> sets;
  std::optional<LabelSet> labels;
};

// Restricts every set (and the optional label set) to the intersection of
// sample ids, rows sorted in canonical (lexicographic) id order. Order of
// the input rows does not affect the result.
AlignResult align(const std::vector<EmbeddingSet>& sets,
                  const std::optional<LabelSet>& labels = std::nullopt);

// Keeps the given row indices, in the given order.
EmbeddingSet take_rows(const EmbeddingSet& set, const std::vector<std::size_t>& indices);

// Deterministic sampling without replacement; selected rows keep their
// original relative order, so subsample(set, N, seed) is the identity.
EmbeddingSet subsample(const EmbeddingSet& set, std::size_t n, uint64_t seed);

}  // namespace repmetric
