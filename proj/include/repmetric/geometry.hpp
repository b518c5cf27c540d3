#pragma once

#include <cstdint>
#include <optional>

#include "repmetric/types.hpp"

namespace repmetric {

struct GeometryScore {
  std::optional<double> uniformity;  // <= 0
  std::optional<double> tolerance;   // in [-1, 1] for unit-norm inputs
  double t = 2.0;
  long long n_pairs_evaluated = 0;
  bool exact = true;
};

struct UniformityOptions {
  double t = 2.0;
  // Full enumeration when N <= exact_threshold (or force_exact), otherwise
  // Monte-Carlo over pair_budget seeded ordered pairs.
  long long exact_threshold = 5000;
  std::optional<long long> pair_budget;  // default 10^7
  uint64_t seed = 0;
  bool force_exact = false;
  // Restores the literal iid expectation, which includes x == y pairs.
  bool include_self_pairs = false;
};

// U = log mean over ordered pairs i != j of exp(-t * ||x_i - x_j||^2).
// Requires a normalized set with N >= 2.
GeometryScore uniformity(const EmbeddingSet& set, const UniformityOptions& options = {});

struct ToleranceOptions {
  // Default averages <x_i, x_j> over same-class ordered pairs only; the
  // unconditional form averages <x_i, x_j> * I[l(i) == l(j)] over all
  // ordered pairs i != j.
  bool unconditional = false;
  bool include_self_pairs = false;
};

GeometryScore tolerance(const EmbeddingSet& set, const LabelSet& labels,
                        const ToleranceOptions& options = {});

}  // namespace repmetric
