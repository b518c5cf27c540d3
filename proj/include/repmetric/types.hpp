#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace repmetric {

// All internal computation runs in 64-bit floats regardless of the width
// of the input files. Row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Tolerance used when checking the unit-norm invariant of a set that
// claims normalized=true.
inline constexpr double kNormTolerance = 1e-5;

// One model's embedding matrix plus bookkeeping. Immutable by convention
// after construction; every operation returns a new set.
struct EmbeddingSet {
  std::string model_tag;
  std::vector<std::string> sample_ids;  // unique, length N
  Matrix matrix;                        // N x D
  std::optional<std::vector<int>> labels;
  bool normalized = false;

  Eigen::Index n() const { return matrix.rows(); }
  Eigen::Index d() const { return matrix.cols(); }

  // Validates N >= 1, D >= 1, finite entries, unique ids, label length.
  // Empty `sample_ids` defaults to "0".."N-1".
  static EmbeddingSet create(std::string model_tag, Matrix matrix,
                             std::vector<std::string> sample_ids = {},
                             std::optional<std::vector<int>> labels = std::nullopt);
};

struct LabelSet {
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t n() const { return labels.size(); }

  // num_classes == 0 infers max(label) + 1.
  static LabelSet create(std::vector<std::string> sample_ids, std::vector<int> labels,
                         int num_classes = 0);

  // Re-orders / restricts to `ids`; throws LabelMismatch on any id we do
  // not carry.
  LabelSet restricted_to(const std::vector<std::string>& ids) const;
};

std::vector<std::string> default_ids(std::size_t n);

// Throws NotNormalized unless the set's flag is true and every row norm is
// within kNormTolerance of 1.
void require_normalized(const EmbeddingSet& set);

// Throws LabelMismatch unless labels cover exactly the set's ids in order.
void require_labels_for(const EmbeddingSet& set, const LabelSet& labels);

}  // namespace repmetric
