#include "repmetric/types.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "repmetric/error.hpp"

namespace repmetric {

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

EmbeddingSet EmbeddingSet::create(std::string model_tag, Matrix matrix,
                                  std::vector<std::string> sample_ids,
                                  std::optional<std::vector<int>> labels) {
  if (matrix.rows() < 1 || matrix.cols() < 1) {
    throw Error(errc::zero_dimension,
                "embedding matrix must be at least 1x1, got " + std::to_string(matrix.rows()) +
                    "x" + std::to_string(matrix.cols()));
  }
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (!std::isfinite(matrix(i, j))) {
        throw Error(errc::non_finite_value, "non-finite entry at column " + std::to_string(j),
                    static_cast<long>(i));
      }
    }
  }
  if (sample_ids.empty()) {
    sample_ids = default_ids(static_cast<std::size_t>(matrix.rows()));
  }
  if (static_cast<Eigen::Index>(sample_ids.size()) != matrix.rows()) {
    throw Error(errc::label_mismatch, "expected " + std::to_string(matrix.rows()) +
                                          " sample ids, got " + std::to_string(sample_ids.size()));
  }
  std::unordered_set<std::string> seen;
  seen.reserve(sample_ids.size());
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    if (!seen.insert(sample_ids[i]).second) {
      throw Error(errc::duplicate_ids, "duplicate sample id \"" + sample_ids[i] + "\"",
                  static_cast<long>(i));
    }
  }
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != matrix.rows()) {
      throw Error(errc::label_mismatch, "labels length " + std::to_string(labels->size()) +
                                            " does not match N=" + std::to_string(matrix.rows()));
    }
    for (std::size_t i = 0; i < labels->size(); ++i) {
      if ((*labels)[i] < 0) {
        throw Error(errc::bad_value, "negative class label", static_cast<long>(i));
      }
    }
  }

  EmbeddingSet set;
  set.model_tag = std::move(model_tag);
  set.sample_ids = std::move(sample_ids);
  set.matrix = std::move(matrix);
  set.labels = std::move(labels);
  set.normalized = false;
  return set;
}

LabelSet LabelSet::create(std::vector<std::string> sample_ids, std::vector<int> labels,
                          int num_classes) {
  if (sample_ids.size() != labels.size()) {
    throw Error(errc::label_mismatch, "ids/labels length mismatch: " +
                                          std::to_string(sample_ids.size()) + " vs " +
                                          std::to_string(labels.size()));
  }
  if (labels.empty()) {
    throw Error(errc::zero_dimension, "label set is empty");
  }
  int max_label = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw Error(errc::bad_value, "negative class label", static_cast<long>(i));
    }
    max_label = std::max(max_label, labels[i]);
  }
  if (num_classes == 0) {
    num_classes = max_label + 1;
  } else if (num_classes < max_label + 1) {
    throw Error(errc::bad_value, "num_classes=" + std::to_string(num_classes) +
                                     " but labels reach " + std::to_string(max_label));
  }
  std::unordered_set<std::string> seen;
  seen.reserve(sample_ids.size());
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    if (!seen.insert(sample_ids[i]).second) {
      throw Error(errc::duplicate_ids, "duplicate sample id \"" + sample_ids[i] + "\"",
                  static_cast<long>(i));
    }
  }

  LabelSet set;
  set.sample_ids = std::move(sample_ids);
  set.labels = std::move(labels);
  set.num_classes = num_classes;
  return set;
}

LabelSet LabelSet::restricted_to(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(sample_ids.size());
  for (std::size_t i = 0; i < sample_ids.size(); ++i) index.emplace(sample_ids[i], i);

  LabelSet out;
  out.num_classes = num_classes;
  out.sample_ids.reserve(ids.size());
  out.labels.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(errc::label_mismatch, "no label for sample id \"" + id + "\"");
    }
    out.sample_ids.push_back(id);
    out.labels.push_back(labels[it->second]);
  }
  if (out.labels.empty()) {
    throw Error(errc::zero_dimension, "restriction produced an empty label set");
  }
  return out;
}

void require_normalized(const EmbeddingSet& set) {
  if (!set.normalized) {
    throw Error(errc::not_normalized,
                "operation requires unit-L2 rows; run l2_normalize first (set \"" +
                    set.model_tag + "\")");
  }
  for (Eigen::Index i = 0; i < set.matrix.rows(); ++i) {
    const double norm = set.matrix.row(i).norm();
    if (std::abs(norm - 1.0) > kNormTolerance) {
      throw Error(errc::not_normalized,
                  "row norm " + std::to_string(norm) + " violates the normalized invariant",
                  static_cast<long>(i));
    }
  }
}

void require_labels_for(const EmbeddingSet& set, const LabelSet& labels) {
  if (labels.sample_ids != set.sample_ids) {
    throw Error(errc::label_mismatch,
                "label ids do not match embedding ids (align the inputs first)");
  }
}

}  // namespace repmetric
