#include "repmetric/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "repmetric/error.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {

namespace {

constexpr long long kDefaultPairBudget = 10'000'000;

// Kahan-compensated accumulator; keeps the reduction stable and
// independent of chunking.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double value) {
    const double y = value - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

GeometryScore uniformity(const EmbeddingSet& set, const UniformityOptions& options) {
  require_normalized(set);
  const Eigen::Index n = set.matrix.rows();
  if (n < 2) {
    throw Error(errc::too_few_samples, "uniformity needs N >= 2, got " + std::to_string(n));
  }
  if (options.t <= 0.0) {
    throw Error(errc::bad_value, "t must be positive, got " + std::to_string(options.t));
  }

  GeometryScore score;
  score.t = options.t;

  const bool exact = options.force_exact || n <= options.exact_threshold;
  if (exact) {
    // Full enumeration over unordered pairs via blocked Gram products;
    // d^2(i,j) = |x_i|^2 + |x_j|^2 - 2 <x_i, x_j>.
    const Vector sq_norms = set.matrix.rowwise().squaredNorm();
    KahanSum acc;
    constexpr Eigen::Index kBlock = 256;
    for (Eigen::Index begin = 0; begin < n; begin += kBlock) {
      const Eigen::Index rows = std::min(kBlock, n - begin);
      const Matrix gram_block = set.matrix.middleRows(begin, rows) * set.matrix.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index i = begin + r;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double dist_sq = std::max(0.0, sq_norms[i] + sq_norms[j] - 2.0 * gram_block(r, j));
          acc.add(std::exp(-options.t * dist_sq));
        }
      }
    }
    const double n_d = static_cast<double>(n);
    double mean;
    if (options.include_self_pairs) {
      // Self pairs contribute exp(0) = 1 each.
      mean = (2.0 * acc.sum + n_d) / (n_d * n_d);
      score.n_pairs_evaluated = n * n;
    } else {
      mean = acc.sum / (n_d * (n_d - 1.0) / 2.0);
      score.n_pairs_evaluated = n * (n - 1);
    }
    score.uniformity = std::log(mean);
    score.exact = true;
  } else {
    const long long budget = options.pair_budget.value_or(kDefaultPairBudget);
    if (budget < 1) {
      throw Error(errc::bad_value, "pair_budget must be positive");
    }
    Xoshiro256StarStar rng(options.seed);
    KahanSum acc;
    const auto n_u = static_cast<uint64_t>(n);
    for (long long p = 0; p < budget; ++p) {
      const auto i = static_cast<Eigen::Index>(rng.next_below(n_u));
      Eigen::Index j;
      if (options.include_self_pairs) {
        j = static_cast<Eigen::Index>(rng.next_below(n_u));
      } else {
        j = static_cast<Eigen::Index>(rng.next_below(n_u - 1));
        if (j >= i) ++j;
      }
      const double dist_sq = (set.matrix.row(i) - set.matrix.row(j)).squaredNorm();
      acc.add(std::exp(-options.t * dist_sq));
    }
    score.uniformity = std::log(acc.sum / static_cast<double>(budget));
    score.n_pairs_evaluated = budget;
    score.exact = false;
  }
  return score;
}

GeometryScore tolerance(const EmbeddingSet& set, const LabelSet& labels,
                        const ToleranceOptions& options) {
  require_normalized(set);
  require_labels_for(set, labels);
  const Eigen::Index n = set.matrix.rows();
  if (n < 2 && !options.include_self_pairs) {
    throw Error(errc::too_few_samples, "tolerance needs N >= 2, got " + std::to_string(n));
  }

  // Per-class sums make the pair expectation O(N D):
  // sum_{i != j in class} <x_i, x_j> = |sum_class|^2 - sum_class |x_i|^2.
  std::vector<Vector> class_sums(static_cast<std::size_t>(labels.num_classes),
                                 Vector::Zero(set.matrix.cols()));
  std::vector<double> class_sq(static_cast<std::size_t>(labels.num_classes), 0.0);
  std::vector<long long> class_counts(static_cast<std::size_t>(labels.num_classes), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels.labels[static_cast<std::size_t>(i)]);
    class_sums[c] += set.matrix.row(i).transpose();
    class_sq[c] += set.matrix.row(i).squaredNorm();
    ++class_counts[c];
  }

  double numerator = 0.0;
  long long positive_pairs = 0;
  for (std::size_t c = 0; c < class_sums.size(); ++c) {
    if (class_counts[c] == 0) continue;
    const double pair_sum = class_sums[c].squaredNorm() - class_sq[c];
    if (options.include_self_pairs) {
      numerator += pair_sum + class_sq[c];
      positive_pairs += class_counts[c] * class_counts[c];
    } else {
      numerator += pair_sum;
      positive_pairs += class_counts[c] * (class_counts[c] - 1);
    }
  }

  GeometryScore score;
  score.exact = true;
  if (options.unconditional) {
    const auto n_ll = static_cast<long long>(n);
    const long long all_pairs = options.include_self_pairs ? n_ll * n_ll : n_ll * (n_ll - 1);
    score.tolerance = numerator / static_cast<double>(all_pairs);
    score.n_pairs_evaluated = all_pairs;
  } else {
    if (positive_pairs == 0) {
      throw Error(errc::no_positive_pairs, "no class has two or more samples");
    }
    score.tolerance = numerator / static_cast<double>(positive_pairs);
    score.n_pairs_evaluated = positive_pairs;
  }
  return score;
}

}  // namespace repmetric
