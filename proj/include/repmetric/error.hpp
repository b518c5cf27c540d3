#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace repmetric {

enum class errc {
  malformed_header,
  ragged_row,
  bad_value,
  non_finite_value,
  zero_dimension,
  zero_norm_row,
  duplicate_ids,
  empty_intersection,
  sample_too_large,
  too_few_samples,
  not_normalized,
  no_positive_pairs,
  label_mismatch,
  not_aligned,
  degenerate_input,
  k_too_large,
  mismatched_k,
  mismatched_nodes,
  empty_train,
  k_class_mismatch,
  degenerate_labels,
  dim_mismatch,
  misaligned_predictions,
  config_invalid,
  io_error,
};

const char* errc_name(errc code);

// All library failures surface as Error. `code` is the machine-readable
// condition; `index` carries a row/sample index where one applies.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}
  Error(errc code, const std::string& message, long index)
      : std::runtime_error(std::string(errc_name(code)) + "(" + std::to_string(index) + "): " + message),
        code_(code),
        index_(index) {}

  errc code() const noexcept { return code_; }
  std::optional<long> index() const noexcept { return index_; }

 private:
  errc code_;
  std::optional<long> index_;
};

}  // namespace repmetric
