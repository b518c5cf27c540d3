#include "repmetric/store.hpp"

#include <algorithm>
#include <unordered_map>

#include "repmetric/error.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {

EmbeddingSet l2_normalize(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  for (Eigen::Index i = 0; i < out.matrix.rows(); ++i) {
    const double norm = out.matrix.row(i).norm();
    if (norm == 0.0) {
      throw Error(errc::zero_norm_row, "cannot normalize a zero row", static_cast<long>(i));
    }
    out.matrix.row(i) /= norm;
  }
  out.normalized = true;
  return out;
}

EmbeddingSet take_rows(const EmbeddingSet& set, const std::vector<std::size_t>& indices) {
  EmbeddingSet out;
  out.model_tag = set.model_tag;
  out.normalized = set.normalized;
  out.matrix.resize(static_cast<Eigen::Index>(indices.size()), set.matrix.cols());
  out.sample_ids.reserve(indices.size());
  if (set.labels) out.labels.emplace();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.matrix.row(static_cast<Eigen::Index>(r)) =
        set.matrix.row(static_cast<Eigen::Index>(indices[r]));
    out.sample_ids.push_back(set.sample_ids[indices[r]]);
    if (set.labels) out.labels->push_back((*set.labels)[indices[r]]);
  }
  return out;
}

AlignResult align(const std::vector<EmbeddingSet>& sets, const std::optional<LabelSet>& labels) {
  if (sets.size() < 2) {
    throw Error(errc::too_few_samples, "align needs at least 2 sets, got " +
                                           std::to_string(sets.size()));
  }

  // Intersection of ids over all sets (and the label set when given),
  // then canonical lexicographic order.
  std::vector<std::string> common(sets[0].sample_ids);
  std::sort(common.begin(), common.end());
  auto intersect = [&common](const std::vector<std::string>& ids) {
    std::vector<std::string> sorted(ids);
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::string> next;
    std::set_intersection(common.begin(), common.end(), sorted.begin(), sorted.end(),
                          std::back_inserter(next));
    common = std::move(next);
  };
  for (std::size_t s = 1; s < sets.size(); ++s) intersect(sets[s].sample_ids);
  if (labels) intersect(labels->sample_ids);

  if (common.empty()) {
    throw Error(errc::empty_intersection, "no sample ids shared by all inputs");
  }

  AlignResult result;
  result.sets.reserve(sets.size());
  for (const auto& set : sets) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(set.sample_ids.size());
    for (std::size_t i = 0; i < set.sample_ids.size(); ++i) index.emplace(set.sample_ids[i], i);
    std::vector<std::size_t> rows;
    rows.reserve(common.size());
    for (const auto& id : common) rows.push_back(index.at(id));
    result.sets.push_back(take_rows(set, rows));
  }
  if (labels) result.labels = labels->restricted_to(common);
  return result;
}

EmbeddingSet subsample(const EmbeddingSet& set, std::size_t n, uint64_t seed) {
  const auto total = static_cast<std::size_t>(set.matrix.rows());
  if (n > total) {
    throw Error(errc::sample_too_large,
                "requested " + std::to_string(n) + " of " + std::to_string(total) + " samples");
  }
  if (n == 0) {
    throw Error(errc::zero_dimension, "subsample size must be positive");
  }
  return take_rows(set, sample_without_replacement(total, n, seed));
}

}  // namespace repmetric
