#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

enum class KmeansMode { automatic, lloyd, minibatch };

KmeansMode parse_kmeans_mode(const std::string& name);
const char* kmeans_mode_name(KmeansMode mode);

struct KmeansOptions {
  int n_init = 10;
  KmeansMode mode = KmeansMode::automatic;  // minibatch when N > 100000
  long long batch = 16384;
  uint64_t seed = 0;
  int max_iter = 300;
};

struct ClusterResult {
  int k = 0;
  std::vector<int> assignments;  // in [0, k)
  Matrix centroids;              // k x D
  double inertia = 0.0;          // exact full-data sum of squared distances
  int n_init_runs = 0;
  int best_run_index = 0;
  uint64_t seed = 0;
  KmeansMode mode_used = KmeansMode::lloyd;
  std::vector<std::string> sample_ids;
  std::vector<double> inertia_trace;  // winning run, one entry per iteration
  std::vector<double> run_inertias;   // final exact inertia of every run
};

// k-means++ seeded runs; run r derives its seed as seed + r; the run with
// the lowest exact full-data inertia wins (ties to the lower run index).
ClusterResult kmeans(const EmbeddingSet& set, int k, const KmeansOptions& options = {});

double compute_inertia(const Matrix& data, const Matrix& centroids,
                       const std::vector<int>& assignments);

enum class MappingMode { hungarian, greedy };

using Contingency = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

Contingency build_contingency(const std::vector<int>& assignments, int k,
                              const std::vector<int>& labels, int num_classes);

struct ClusterAccuracy {
  MappingMode mode = MappingMode::hungarian;
  std::vector<int> mapping;  // cluster -> class
  double accuracy = 0.0;
  Contingency contingency;
};

// Maximum-weight perfect assignment on a square count matrix (Kuhn-Munkres
// via min-cost on negated counts, O(k^3)). Returns cluster->class mapping
// and the matched sample count.
std::pair<std::vector<int>, long long> max_assignment(const Contingency& counts);

// One-to-one mapping; requires k == num_classes.
ClusterAccuracy hungarian_accuracy(const ClusterResult& result, const LabelSet& labels);

// Many-to-one: each cluster maps to its majority class (ties to the lowest
// class index). Any k; warns when k < num_classes.
ClusterAccuracy greedy_accuracy(const ClusterResult& result, const LabelSet& labels);

void save_assignments_csv(const ClusterResult& result, const std::string& path);
void save_contingency_csv(const Contingency& counts, const std::string& path);

}  // namespace repmetric
