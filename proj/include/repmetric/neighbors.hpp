#pragma once

#include <optional>
#include <string>
#include <vector>

#include "repmetric/report.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

enum class SimilarityMetric { cosine, euclidean };

SimilarityMetric parse_metric(const std::string& name);
const char* metric_name(SimilarityMetric metric);

// Exact top-k neighbor lists (self excluded), sorted by descending
// similarity (ascending distance for euclidean), ties broken by canonical
// id order.
struct NeighborGraph {
  std::string model_tag;
  int k = 0;
  SimilarityMetric similarity_metric = SimilarityMetric::cosine;
  std::vector<std::string> node_ids;
  std::vector<std::vector<int>> neighbors;      // indices into node_ids
  std::vector<std::vector<double>> scores;      // metric value per edge

  std::vector<std::string> neighbor_ids(std::size_t node) const;
};

NeighborGraph build_graph(const EmbeddingSet& set, int k, SimilarityMetric metric);

// Mean over nodes of |shared neighbors| / k; order within lists ignored.
double graph_overlap(const NeighborGraph& g1, const NeighborGraph& g2);

PairwiseReport overlap_pairwise(const std::vector<NeighborGraph>& graphs);

// CSV rows: node_id,rank,neighbor_id,similarity
void save_graph_csv(const NeighborGraph& graph, const std::string& path);

enum class Voting { uniform, temperature_weighted };

Voting parse_voting(const std::string& name);
const char* voting_name(Voting voting);

struct KnnOptions {
  Voting voting = Voting::temperature_weighted;
  double temperature = 0.07;
  bool per_class_accuracy = false;
};

struct KnnEvalResult {
  int k = 0;
  double accuracy = 0.0;
  Voting voting = Voting::temperature_weighted;
  double temperature = 0.07;
  std::optional<std::vector<double>> per_class_accuracy;
  std::vector<int> predictions;  // one per test sample
};

// Cosine k-NN on L2-normalized embeddings. temperature_weighted scores a
// class by sum exp(sim / temperature) over its neighbors; uniform counts
// them. Ties go to the class of the nearest tied neighbor, then to the
// lowest class index.
KnnEvalResult knn_classify(const EmbeddingSet& train, const LabelSet& train_labels,
                           const EmbeddingSet& test, const LabelSet& test_labels, int k,
                           const KnnOptions& options = {});

struct KnnSweepResult {
  KnnEvalResult best;
  std::vector<KnnEvalResult> table;
};

// Runs knn_classify per k; accuracy ties resolve toward the smaller k.
// Non-positive k values are skipped with a warning.
KnnSweepResult knn_sweep(const EmbeddingSet& train, const LabelSet& train_labels,
                         const EmbeddingSet& test, const LabelSet& test_labels,
                         const std::vector<int>& ks, const KnnOptions& options = {});

}  // namespace repmetric
