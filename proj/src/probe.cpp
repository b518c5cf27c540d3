#include "repmetric/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "repmetric/error.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {

namespace {

constexpr double kVarianceFloor = 1e-8;

Matrix apply_feature_norm(const Matrix& x, const FeatureNorm& norm) {
  Matrix out = x.rowwise() - norm.mean.transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) /= std::sqrt(norm.variance[j]);
  }
  return out;
}

int argmax_lowest(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

void check_same_ids(const std::vector<PredictionSet>& predsets) {
  for (std::size_t s = 1; s < predsets.size(); ++s) {
    if (predsets[s].sample_ids != predsets[0].sample_ids) {
      throw Error(errc::misaligned_predictions,
                  "prediction sets \"" + predsets[0].model_tag + "\" and \"" +
                      predsets[s].model_tag + "\" cover different samples");
    }
  }
}

}  // namespace

LossGrad probe_loss_grad(const Matrix& x, const std::vector<int>& y, int num_classes,
                         const Matrix& weights, const Vector& bias, double weight_decay) {
  const Eigen::Index batch = x.rows();
  Matrix logits = x * weights.transpose();
  logits.rowwise() += bias.transpose();

  // Softmax cross-entropy with the usual max-shift for stability.
  Matrix probs(batch, num_classes);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double peak = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = logits.row(i).array() - peak;
    const Eigen::RowVectorXd exps = shifted.array().exp();
    const double total = exps.sum();
    probs.row(i) = exps / total;
    loss += std::log(total) - shifted[y[static_cast<std::size_t>(i)]];
  }
  loss /= static_cast<double>(batch);
  loss += 0.5 * weight_decay * weights.squaredNorm();

  Matrix dlogits = probs;
  for (Eigen::Index i = 0; i < batch; ++i) {
    dlogits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  dlogits /= static_cast<double>(batch);

  LossGrad grad;
  grad.loss = loss;
  grad.grad_weights = dlogits.transpose() * x + weight_decay * weights;
  grad.grad_bias = dlogits.colwise().sum().transpose();
  return grad;
}

ProbeModel train_probe(const EmbeddingSet& train, const LabelSet& labels,
                       const ProbeConfig& config) {
  require_labels_for(train, labels);
  const Eigen::Index n = train.matrix.rows();
  const Eigen::Index dim = train.matrix.cols();
  const int num_classes = labels.num_classes;
  if (n < num_classes) {
    throw Error(errc::too_few_samples, "need at least one sample per class: N=" +
                                           std::to_string(n) + ", C=" + std::to_string(num_classes));
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw Error(errc::bad_value, "epochs and batch_size must be positive");
  }

  std::vector<long long> class_counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : labels.labels) ++class_counts[static_cast<std::size_t>(label)];
  for (int c = 0; c < num_classes; ++c) {
    if (class_counts[static_cast<std::size_t>(c)] == 0) {
      if (config.strict_labels) {
        throw Error(errc::degenerate_labels,
                    "class " + std::to_string(c) + " has no training samples");
      }
      std::cerr << "[repmetric] warning: class " << c << " has no training samples\n";
    }
  }

  ProbeModel model;
  model.model_tag = train.model_tag;
  model.train_config = config;

  Matrix features = train.matrix;
  if (config.standardize) {
    FeatureNorm norm;
    norm.mean = features.colwise().mean().transpose();
    Matrix centered = features.rowwise() - norm.mean.transpose();
    norm.variance =
        (centered.array().square().colwise().sum() / static_cast<double>(n)).transpose().matrix();
    norm.variance.array() += kVarianceFloor;
    features = apply_feature_norm(features, norm);
    model.feature_norm = std::move(norm);
  }

  // Seeded held-out split for best-epoch selection, when requested.
  Xoshiro256StarStar rng(config.seed);
  std::vector<std::size_t> train_rows(static_cast<std::size_t>(n));
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::vector<std::size_t> holdout_rows;
  if (config.holdout_fraction > 0.0) {
    const auto n_holdout = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(n) - 1.0,
                         std::floor(config.holdout_fraction * static_cast<double>(n))));
    if (n_holdout > 0) {
      holdout_rows = sample_without_replacement(static_cast<std::size_t>(n), n_holdout,
                                                config.seed ^ 0x9e3779b97f4a7c15ULL);
      std::vector<std::size_t> kept;
      kept.reserve(train_rows.size() - holdout_rows.size());
      std::size_t h = 0;
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        if (h < holdout_rows.size() && holdout_rows[h] == i) {
          ++h;
        } else {
          kept.push_back(i);
        }
      }
      train_rows = std::move(kept);
    }
  }

  Matrix weights = Matrix::Zero(num_classes, dim);
  Vector bias = Vector::Zero(num_classes);
  Matrix velocity_w = Matrix::Zero(num_classes, dim);
  Vector velocity_b = Vector::Zero(num_classes);

  const double effective_lr =
      config.learning_rate * static_cast<double>(config.batch_size) / 256.0;

  auto holdout_accuracy = [&](const Matrix& w, const Vector& b) {
    long long correct = 0;
    for (std::size_t row : holdout_rows) {
      Eigen::RowVectorXd logits =
          features.row(static_cast<Eigen::Index>(row)) * w.transpose() + b.transpose();
      if (argmax_lowest(logits) == labels.labels[row]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(holdout_rows.size());
  };

  Matrix best_weights = weights;
  Vector best_bias = bias;
  double best_holdout = -1.0;

  std::vector<std::size_t> order = train_rows;
  Matrix batch_x;
  std::vector<int> batch_y;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = effective_lr * 0.5 *
                      (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                      static_cast<double>(config.epochs)));
    // Fisher-Yates reshuffle from the shared stream each epoch.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_below(i))]);
    }

    double epoch_loss = 0.0;
    long long epoch_samples = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto rows = static_cast<Eigen::Index>(end - begin);
      batch_x.resize(rows, dim);
      batch_y.resize(static_cast<std::size_t>(rows));
      for (Eigen::Index r = 0; r < rows; ++r) {
        batch_x.row(r) = features.row(static_cast<Eigen::Index>(order[begin + static_cast<std::size_t>(r)]));
        batch_y[static_cast<std::size_t>(r)] = labels.labels[order[begin + static_cast<std::size_t>(r)]];
      }

      LossGrad grad = probe_loss_grad(batch_x, batch_y, num_classes, weights, bias,
                                      config.weight_decay);
      velocity_w = config.momentum * velocity_w + grad.grad_weights;
      velocity_b = config.momentum * velocity_b + grad.grad_bias;
      weights -= lr * velocity_w;
      bias -= lr * velocity_b;

      epoch_loss += grad.loss * static_cast<double>(rows);
      epoch_samples += rows;
    }
    model.loss_history.push_back(epoch_loss / static_cast<double>(epoch_samples));

    if (!holdout_rows.empty()) {
      const double acc = holdout_accuracy(weights, bias);
      if (acc > best_holdout) {
        best_holdout = acc;
        best_weights = weights;
        best_bias = bias;
      }
    }
  }

  if (!holdout_rows.empty()) {
    model.weights = std::move(best_weights);
    model.bias = std::move(best_bias);
  } else {
    model.weights = std::move(weights);
    model.bias = std::move(bias);
  }
  return model;
}

ProbeEval evaluate_probe(const ProbeModel& model, const EmbeddingSet& test,
                         const std::optional<LabelSet>& labels) {
  if (test.matrix.cols() != model.weights.cols()) {
    throw Error(errc::dim_mismatch, "probe expects D=" + std::to_string(model.weights.cols()) +
                                        ", test has D=" + std::to_string(test.matrix.cols()));
  }
  if (labels) require_labels_for(test, *labels);

  Matrix features = model.feature_norm ? apply_feature_norm(test.matrix, *model.feature_norm)
                                       : test.matrix;
  Matrix logits = features * model.weights.transpose();
  logits.rowwise() += model.bias.transpose();

  ProbeEval eval;
  eval.predictions.model_tag = model.model_tag;
  eval.predictions.sample_ids = test.sample_ids;
  eval.predictions.predictions.resize(static_cast<std::size_t>(test.matrix.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    eval.predictions.predictions[static_cast<std::size_t>(i)] = argmax_lowest(logits.row(i));
  }

  if (labels) {
    std::vector<bool> correct(eval.predictions.predictions.size());
    long long hits = 0;
    for (std::size_t i = 0; i < correct.size(); ++i) {
      correct[i] = eval.predictions.predictions[i] == labels->labels[i];
      if (correct[i]) ++hits;
    }
    eval.predictions.correct = std::move(correct);
    eval.accuracy = static_cast<double>(hits) / static_cast<double>(test.matrix.rows());
  }
  return eval;
}

OverlapPartition overlap_partition(const std::vector<PredictionSet>& predsets,
                                   const LabelSet& labels,
                                   const std::optional<std::string>& reference) {
  if (predsets.size() < 2) {
    throw Error(errc::too_few_samples, "overlap partition needs at least 2 prediction sets");
  }
  if (predsets.size() > 32) {
    throw Error(errc::bad_value, "overlap partition supports at most 32 models");
  }
  check_same_ids(predsets);
  if (labels.sample_ids != predsets[0].sample_ids) {
    throw Error(errc::label_mismatch, "labels cover different samples than the predictions");
  }

  const std::size_t n = labels.n();
  const std::size_t m = predsets.size();

  OverlapPartition partition;
  partition.n = static_cast<long long>(n);
  for (const auto& predset : predsets) partition.tags.push_back(predset.model_tag);

  int reference_index = -1;
  if (reference) {
    for (std::size_t s = 0; s < m; ++s) {
      if (predsets[s].model_tag == *reference) reference_index = static_cast<int>(s);
    }
    if (reference_index < 0) {
      throw Error(errc::bad_value, "reference tag \"" + *reference + "\" is not in the group");
    }
  }

  std::unordered_map<uint32_t, long long> histogram;
  long long agree = 0;
  long long ref_both = 0, ref_only = 0, ref_others = 0, ref_neither = 0;
  for (std::size_t i = 0; i < n; ++i) {
    uint32_t pattern = 0;
    bool identical = true;
    for (std::size_t s = 0; s < m; ++s) {
      if (predsets[s].predictions[i] == labels.labels[i]) {
        pattern |= (uint32_t{1} << s);
      }
      if (predsets[s].predictions[i] != predsets[0].predictions[i]) identical = false;
    }
    ++histogram[pattern];
    if (identical) ++agree;
    if (reference_index >= 0) {
      const bool ref_correct = (pattern >> reference_index) & 1u;
      const bool other_correct = (pattern & ~(uint32_t{1} << reference_index)) != 0;
      if (ref_correct && other_correct) ++ref_both;
      else if (ref_correct) ++ref_only;
      else if (other_correct) ++ref_others;
      else ++ref_neither;
    }
  }

  const auto frac = [n](long long count) {
    return static_cast<double>(count) / static_cast<double>(n);
  };
  const uint32_t full = m == 32 ? ~uint32_t{0} : (uint32_t{1} << m) - 1;
  partition.all_correct = frac(histogram.count(full) ? histogram[full] : 0);
  partition.none_correct = frac(histogram.count(0) ? histogram[0] : 0);
  partition.agreement = frac(agree);
  for (std::size_t s = 0; s < m; ++s) {
    const uint32_t solo = uint32_t{1} << s;
    partition.unique_correct[predsets[s].model_tag] =
        frac(histogram.count(solo) ? histogram[solo] : 0);
  }
  partition.pattern_counts.reserve(histogram.size());
  for (const auto& [pattern, count] : histogram) {
    partition.pattern_counts.push_back({pattern, count});
  }
  std::sort(partition.pattern_counts.begin(), partition.pattern_counts.end(),
            [](const PatternCount& a, const PatternCount& b) { return a.pattern < b.pattern; });

  if (reference_index >= 0) {
    ReferencePartition ref;
    ref.reference_tag = *reference;
    ref.both = frac(ref_both);
    ref.reference_only = frac(ref_only);
    ref.others_only = frac(ref_others);
    ref.neither = frac(ref_neither);
    partition.reference = std::move(ref);
  }
  return partition;
}

PairwiseReport agreement_pairwise(const std::vector<PredictionSet>& predsets) {
  if (predsets.size() < 2) {
    throw Error(errc::too_few_samples, "pairwise agreement needs at least 2 prediction sets");
  }
  check_same_ids(predsets);

  const auto m = static_cast<Eigen::Index>(predsets.size());
  const std::size_t n = predsets[0].sample_ids.size();
  Matrix matrix = Matrix::Identity(m, m);
  std::vector<std::string> tags;
  for (const auto& predset : predsets) tags.push_back(predset.model_tag);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      long long same = 0;
      const auto& pa = predsets[static_cast<std::size_t>(a)].predictions;
      const auto& pb = predsets[static_cast<std::size_t>(b)].predictions;
      for (std::size_t i = 0; i < n; ++i) {
        if (pa[i] == pb[i]) ++same;
      }
      const double value = static_cast<double>(same) / static_cast<double>(n);
      matrix(a, b) = value;
      matrix(b, a) = value;
    }
  }
  return PairwiseReport::make("prediction_agreement", std::move(tags), std::move(matrix),
                              {{"n", std::to_string(n)}});
}

void save_probe(const ProbeModel& model, const std::string& path_prefix) {
  nlohmann::ordered_json header;
  header["model_tag"] = model.model_tag;
  header["num_classes"] = model.weights.rows();
  header["dim"] = model.weights.cols();
  header["standardize"] = model.feature_norm.has_value();
  if (model.feature_norm) {
    header["feature_mean"] = std::vector<double>(
        model.feature_norm->mean.data(), model.feature_norm->mean.data() + model.feature_norm->mean.size());
    header["feature_variance"] = std::vector<double>(
        model.feature_norm->variance.data(),
        model.feature_norm->variance.data() + model.feature_norm->variance.size());
  }
  const auto& config = model.train_config;
  header["train_config"] = {{"epochs", config.epochs},
                            {"batch_size", config.batch_size},
                            {"learning_rate", config.learning_rate},
                            {"momentum", config.momentum},
                            {"weight_decay", config.weight_decay},
                            {"holdout_fraction", config.holdout_fraction},
                            {"seed", config.seed}};

  {
    std::ofstream out(path_prefix + ".json");
    if (!out) {
      throw Error(errc::io_error, "cannot open \"" + path_prefix + ".json\" for writing");
    }
    out << header.dump(2) << '\n';
  }
  {
    std::ofstream out(path_prefix + ".weights", std::ios::binary);
    if (!out) {
      throw Error(errc::io_error, "cannot open \"" + path_prefix + ".weights\" for writing");
    }
    std::vector<float> blob;
    blob.reserve(static_cast<std::size_t>(model.weights.size() + model.bias.size()));
    for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
      blob.push_back(static_cast<float>(model.weights.data()[i]));
    }
    for (Eigen::Index i = 0; i < model.bias.size(); ++i) {
      blob.push_back(static_cast<float>(model.bias[i]));
    }
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) {
      throw Error(errc::io_error, "failed writing \"" + path_prefix + ".weights\"");
    }
  }
}

ProbeModel load_probe(const std::string& path_prefix) {
  nlohmann::json header;
  {
    std::ifstream in(path_prefix + ".json");
    if (!in) {
      throw Error(errc::io_error, "cannot open \"" + path_prefix + ".json\"");
    }
    try {
      header = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(errc::malformed_header, "bad probe header: " + std::string(e.what()));
    }
  }

  ProbeModel model;
  model.model_tag = header.value("model_tag", "");
  const auto num_classes = header.at("num_classes").get<Eigen::Index>();
  const auto dim = header.at("dim").get<Eigen::Index>();
  if (num_classes < 1 || dim < 1) {
    throw Error(errc::malformed_header, "probe header declares empty dimensions");
  }
  if (header.value("standardize", false)) {
    FeatureNorm norm;
    const auto mean = header.at("feature_mean").get<std::vector<double>>();
    const auto variance = header.at("feature_variance").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != dim ||
        static_cast<Eigen::Index>(variance.size()) != dim) {
      throw Error(errc::malformed_header, "probe standardization stats do not match dim");
    }
    norm.mean = Eigen::Map<const Vector>(mean.data(), dim);
    norm.variance = Eigen::Map<const Vector>(variance.data(), dim);
    model.feature_norm = std::move(norm);
  }
  if (header.contains("train_config")) {
    const auto& config = header["train_config"];
    model.train_config.epochs = config.value("epochs", 40);
    model.train_config.batch_size = config.value("batch_size", 256);
    model.train_config.learning_rate = config.value("learning_rate", 0.01);
    model.train_config.momentum = config.value("momentum", 0.9);
    model.train_config.weight_decay = config.value("weight_decay", 1e-4);
    model.train_config.holdout_fraction = config.value("holdout_fraction", 0.0);
    model.train_config.seed = config.value("seed", uint64_t{0});
  }

  std::ifstream in(path_prefix + ".weights", std::ios::binary);
  if (!in) {
    throw Error(errc::io_error, "cannot open \"" + path_prefix + ".weights\"");
  }
  const std::size_t count = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(dim) +
                            static_cast<std::size_t>(num_classes);
  std::vector<float> blob(count);
  if (!in.read(reinterpret_cast<char*>(blob.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    throw Error(errc::io_error, "probe weight blob is truncated");
  }
  model.weights.resize(num_classes, dim);
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
    model.weights.data()[i] = static_cast<double>(blob[static_cast<std::size_t>(i)]);
  }
  model.bias.resize(num_classes);
  for (Eigen::Index i = 0; i < num_classes; ++i) {
    model.bias[i] = static_cast<double>(
        blob[static_cast<std::size_t>(model.weights.size() + i)]);
  }
  return model;
}

void save_predictions_csv(const PredictionSet& predictions, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  out << "id,prediction\n";
  for (std::size_t i = 0; i < predictions.sample_ids.size(); ++i) {
    out << predictions.sample_ids[i] << ',' << predictions.predictions[i] << '\n';
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

PredictionSet load_predictions_csv(const std::string& path, const std::string& model_tag) {
  std::ifstream in(path);
  if (!in) {
    throw Error(errc::io_error, "cannot open \"" + path + "\"");
  }
  PredictionSet predset;
  predset.model_tag = model_tag;
  std::string line;
  long line_index = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_index;
    if (line.empty() && in.peek() == EOF) break;
    if (line_index == 0 && line == "id,prediction") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(errc::ragged_row, "expected id,prediction in \"" + path + "\"", line_index);
    }
    predset.sample_ids.push_back(line.substr(0, comma));
    try {
      predset.predictions.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(errc::bad_value, "cannot parse prediction in \"" + path + "\"", line_index);
    }
  }
  if (predset.sample_ids.empty()) {
    throw Error(errc::zero_dimension, "prediction file \"" + path + "\" is empty");
  }
  return predset;
}

}  // namespace repmetric
