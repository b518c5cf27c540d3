#include "repmetric/error.hpp"

namespace repmetric {

const char* errc_name(errc code) {
  switch (code) {
    case errc::malformed_header: return "MalformedHeader";
    case errc::ragged_row: return "RaggedRow";
    case errc::bad_value: return "BadValue";
    case errc::non_finite_value: return "NonFiniteValue";
    case errc::zero_dimension: return "ZeroDimension";
    case errc::zero_norm_row: return "ZeroNormRow";
    case errc::duplicate_ids: return "DuplicateIDs";
    case errc::empty_intersection: return "EmptyIntersection";
    case errc::sample_too_large: return "SampleTooLarge";
    case errc::too_few_samples: return "TooFewSamples";
    case errc::not_normalized: return "NotNormalized";
    case errc::no_positive_pairs: return "NoPositivePairs";
    case errc::label_mismatch: return "LabelMismatch";
    case errc::not_aligned: return "NotAligned";
    case errc::degenerate_input: return "DegenerateInput";
    case errc::k_too_large: return "KTooLarge";
    case errc::mismatched_k: return "MismatchedK";
    case errc::mismatched_nodes: return "MismatchedNodes";
    case errc::empty_train: return "EmptyTrain";
    case errc::k_class_mismatch: return "KClassMismatch";
    case errc::degenerate_labels: return "DegenerateLabels";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::misaligned_predictions: return "MisalignedPredictions";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace repmetric
