#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "repmetric/report.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

struct CkaScore {
  double value = 0.0;  // in [0, 1]
  Eigen::Index n = 0;
  Eigen::Index d_x = 0;
  Eigen::Index d_y = 0;
  std::optional<uint64_t> subsample_seed;
};

// Linear CKA between two aligned sets (same N, same id order, N >= 3).
// Computed as ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F) on
// column-mean-centered matrices when D < N; the Gram-matrix route is used
// when D >= N. Both are the HSIC-normalized form with the 1/(n-1)^2
// constants cancelled.
CkaScore linear_cka(const EmbeddingSet& a, const EmbeddingSet& b);

// Raw value for pre-centered double matrices; the pairwise path and the
// bindings share it.
double linear_cka_value(const Matrix& x, const Matrix& y);

struct SubsampleSpec {
  std::size_t n = 10000;
  uint64_t seed = 0;
};

// Aligns the sets, applies one shared subsample (defaults to n=10000 when
// N exceeds that), and fills the symmetric matrix with unit diagonal.
PairwiseReport cka_pairwise(const std::vector<EmbeddingSet>& sets,
                            std::optional<SubsampleSpec> subsample = std::nullopt);

// CKA between embeddings of clean images and of the same images after an
// augmentation; 1.0 means the representation is unchanged.
CkaScore augmentation_invariance(const EmbeddingSet& clean, const EmbeddingSet& augmented);

}  // namespace repmetric
