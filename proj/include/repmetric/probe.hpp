#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repmetric/report.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

struct ProbeConfig {
  int epochs = 40;
  int batch_size = 256;
  double learning_rate = 0.01;  // base rate per 256 samples, scaled linearly
  double momentum = 0.9;
  double weight_decay = 1e-4;  // applied to weights only
  bool standardize = true;     // frozen train-set per-dimension whitening
  double holdout_fraction = 0.0;  // > 0 keeps the best epoch by held-out accuracy
  uint64_t seed = 0;
  bool strict_labels = false;  // error instead of warn on classes absent from train
};

struct FeatureNorm {
  Vector mean;
  Vector variance;  // > 0 where used
};

struct ProbeModel {
  Matrix weights;  // C x D
  Vector bias;     // C
  std::optional<FeatureNorm> feature_norm;
  ProbeConfig train_config;
  std::string model_tag;
  std::vector<double> loss_history;  // mean training loss per epoch
};

// Multinomial logistic regression by mini-batch SGD with momentum and a
// cosine-decayed learning rate. Deterministic for a fixed seed.
ProbeModel train_probe(const EmbeddingSet& train, const LabelSet& labels,
                       const ProbeConfig& config = {});

struct PredictionSet {
  std::string model_tag;
  std::vector<std::string> sample_ids;
  std::vector<int> predictions;
  std::optional<std::vector<bool>> correct;
};

struct ProbeEval {
  PredictionSet predictions;
  std::optional<double> accuracy;  // set when labels were given
};

// Argmax of logits, ties to the lowest class index.
ProbeEval evaluate_probe(const ProbeModel& model, const EmbeddingSet& test,
                         const std::optional<LabelSet>& labels = std::nullopt);

// Mean cross-entropy plus 0.5 * weight_decay * ||W||_F^2, with its exact
// gradient. Exposed so the finite-difference check drives the same loss
// the trainer minimizes.
struct LossGrad {
  double loss = 0.0;
  Matrix grad_weights;
  Vector grad_bias;
};

LossGrad probe_loss_grad(const Matrix& x, const std::vector<int>& y, int num_classes,
                         const Matrix& weights, const Vector& bias, double weight_decay);

// Correctness-partition analytics over several models' predictions.
struct ReferencePartition {
  std::string reference_tag;
  // Fractions over the exhaustive 4-way split: reference and at least one
  // other correct / reference only / others only / neither.
  double both = 0.0;
  double reference_only = 0.0;
  double others_only = 0.0;
  double neither = 0.0;
};

struct PatternCount {
  uint32_t pattern = 0;  // bit m set = model m correct, in tag order
  long long count = 0;
};

struct OverlapPartition {
  std::vector<std::string> tags;
  long long n = 0;
  double all_correct = 0.0;
  double none_correct = 0.0;
  double agreement = 0.0;  // label-free identical-prediction fraction
  std::map<std::string, double> unique_correct;  // only this model correct
  std::vector<PatternCount> pattern_counts;      // exhaustive, nonzero cells
  std::optional<ReferencePartition> reference;
};

OverlapPartition overlap_partition(const std::vector<PredictionSet>& predsets,
                                   const LabelSet& labels,
                                   const std::optional<std::string>& reference = std::nullopt);

// Symmetric matrix of pairwise identical-prediction fractions.
PairwiseReport agreement_pairwise(const std::vector<PredictionSet>& predsets);

// <prefix>.json header + <prefix>.weights rawf32 blob (weights then bias).
void save_probe(const ProbeModel& model, const std::string& path_prefix);
ProbeModel load_probe(const std::string& path_prefix);

void save_predictions_csv(const PredictionSet& predictions, const std::string& path);
PredictionSet load_predictions_csv(const std::string& path, const std::string& model_tag);

}  // namespace repmetric
