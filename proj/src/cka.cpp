#include "repmetric/cka.hpp"

#include <cmath>
#include <cstring>

#include "repmetric/error.hpp"
#include "repmetric/store.hpp"

namespace repmetric {

namespace {

Matrix center_columns(const Matrix& x) {
  return x.rowwise() - x.colwise().mean();
}

// Stable operand order so linear_cka(a, b) and linear_cka(b, a) run the
// exact same floating-point reduction (summation order is not commutative
// at the ulp level).
bool should_swap(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) return x.cols() > y.cols();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.data()[i] != y.data()[i]) return x.data()[i] > y.data()[i];
  }
  return false;
}

}  // namespace

double linear_cka_value(const Matrix& x_in, const Matrix& y_in) {
  if (x_in.rows() != y_in.rows()) {
    throw Error(errc::not_aligned, "inputs must have the same number of rows");
  }
  const bool identical =
      x_in.cols() == y_in.cols() &&
      std::memcmp(x_in.data(), y_in.data(),
                  sizeof(double) * static_cast<std::size_t>(x_in.size())) == 0;
  const bool swapped = !identical && should_swap(x_in, y_in);
  const Matrix& x = swapped ? y_in : x_in;
  const Matrix& y = swapped ? x_in : y_in;

  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);

  const Eigen::Index n = x.rows();
  double cross, x_self, y_self;
  if (x.cols() < n && y.cols() < n) {
    // Feature-space route: O(N D^2) memory instead of the N x N Grams.
    cross = (yc.transpose() * xc).squaredNorm();
    x_self = (xc.transpose() * xc).norm();
    y_self = (yc.transpose() * yc).norm();
  } else {
    const Matrix kx = xc * xc.transpose();
    const Matrix ky = yc * yc.transpose();
    cross = kx.cwiseProduct(ky).sum();
    x_self = kx.norm();
    y_self = ky.norm();
  }

  if (x_self == 0.0 || y_self == 0.0) {
    throw Error(errc::degenerate_input,
                "a centered input is identically zero; CKA is undefined");
  }
  // Bit-identical inputs score exactly 1; the ratio would round that last
  // ulp away.
  if (identical) return 1.0;
  return cross / (x_self * y_self);
}

CkaScore linear_cka(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.sample_ids != b.sample_ids) {
    throw Error(errc::not_aligned,
                "inputs must share sample ids in the same order (run align first)");
  }
  if (a.matrix.rows() < 3) {
    throw Error(errc::too_few_samples,
                "linear CKA needs N >= 3, got " + std::to_string(a.matrix.rows()));
  }

  CkaScore score;
  score.value = linear_cka_value(a.matrix, b.matrix);
  score.n = a.matrix.rows();
  score.d_x = a.matrix.cols();
  score.d_y = b.matrix.cols();
  return score;
}

PairwiseReport cka_pairwise(const std::vector<EmbeddingSet>& sets,
                            std::optional<SubsampleSpec> subsample) {
  if (sets.size() < 2) {
    throw Error(errc::too_few_samples,
                "pairwise CKA needs at least 2 sets, got " + std::to_string(sets.size()));
  }
  AlignResult aligned = align(sets);

  // One shared subsample keeps every pair comparable; defaults to the
  // 10,000-sample cap for large inputs.
  const auto n = static_cast<std::size_t>(aligned.sets[0].matrix.rows());
  if (!subsample && n > SubsampleSpec{}.n) {
    subsample = SubsampleSpec{};
  }
  std::map<std::string, std::string> params;
  if (subsample && subsample->n < n) {
    for (auto& set : aligned.sets) {
      set = repmetric::subsample(set, subsample->n, subsample->seed);
    }
    params["subsample_n"] = std::to_string(subsample->n);
    params["subsample_seed"] = std::to_string(subsample->seed);
  }
  params["n"] = std::to_string(aligned.sets[0].matrix.rows());

  const auto m = static_cast<Eigen::Index>(aligned.sets.size());
  Matrix matrix = Matrix::Identity(m, m);
  std::vector<std::string> tags;
  for (const auto& set : aligned.sets) tags.push_back(set.model_tag);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double value = linear_cka(aligned.sets[static_cast<std::size_t>(i)],
                                      aligned.sets[static_cast<std::size_t>(j)])
                               .value;
      matrix(i, j) = value;
      matrix(j, i) = value;
    }
  }
  return PairwiseReport::make("linear_cka", std::move(tags), std::move(matrix), std::move(params));
}

CkaScore augmentation_invariance(const EmbeddingSet& clean, const EmbeddingSet& augmented) {
  if (clean.sample_ids != augmented.sample_ids) {
    throw Error(errc::not_aligned,
                "clean and augmented sets must cover the same images in the same order");
  }
  return linear_cka(clean, augmented);
}

}  // namespace repmetric
