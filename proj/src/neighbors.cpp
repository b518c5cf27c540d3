#include "repmetric/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <unordered_map>

#include "repmetric/error.hpp"
#include "repmetric/parallel.hpp"
#include "repmetric/store.hpp"

namespace repmetric {

namespace {

// Rank of each row in canonical (lexicographic) id order; the tie-breaker
// for equal similarities.
std::vector<int> canonical_ranks(const std::vector<std::string>& ids) {
  std::vector<int> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&ids](int a, int b) { return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)]; });
  std::vector<int> rank(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  return rank;
}

// Top-k candidate indices from one row of scores. higher_better selects by
// descending value (cosine) or ascending (euclidean distance).
void select_top_k(const Eigen::RowVectorXd& scores, const std::vector<int>& ranks, int k,
                  bool higher_better, int exclude_index, std::vector<int>& out) {
  out.clear();
  out.reserve(static_cast<std::size_t>(scores.size()));
  for (int j = 0; j < scores.size(); ++j) {
    if (j != exclude_index) out.push_back(j);
  }
  auto better = [&](int a, int b) {
    const double sa = scores[a];
    const double sb = scores[b];
    if (sa != sb) return higher_better ? sa > sb : sa < sb;
    return ranks[static_cast<std::size_t>(a)] < ranks[static_cast<std::size_t>(b)];
  };
  std::partial_sort(out.begin(), out.begin() + k, out.end(), better);
  out.resize(static_cast<std::size_t>(k));
}

constexpr Eigen::Index kQueryBlock = 256;

}  // namespace

SimilarityMetric parse_metric(const std::string& name) {
  if (name == "cosine") return SimilarityMetric::cosine;
  if (name == "euclidean") return SimilarityMetric::euclidean;
  throw Error(errc::config_invalid, "unknown similarity metric \"" + name + "\"");
}

const char* metric_name(SimilarityMetric metric) {
  return metric == SimilarityMetric::cosine ? "cosine" : "euclidean";
}

Voting parse_voting(const std::string& name) {
  if (name == "uniform") return Voting::uniform;
  if (name == "temperature_weighted" || name == "temperature") return Voting::temperature_weighted;
  throw Error(errc::config_invalid, "unknown voting scheme \"" + name + "\"");
}

const char* voting_name(Voting voting) {
  return voting == Voting::uniform ? "uniform" : "temperature_weighted";
}

std::vector<std::string> NeighborGraph::neighbor_ids(std::size_t node) const {
  std::vector<std::string> ids;
  ids.reserve(neighbors[node].size());
  for (int index : neighbors[node]) ids.push_back(node_ids[static_cast<std::size_t>(index)]);
  return ids;
}

NeighborGraph build_graph(const EmbeddingSet& set, int k, SimilarityMetric metric) {
  const Eigen::Index n = set.matrix.rows();
  if (k < 1 || static_cast<Eigen::Index>(k) > n - 1) {
    throw Error(errc::k_too_large,
                "k=" + std::to_string(k) + " needs 1 <= k <= N-1 with N=" + std::to_string(n));
  }

  const bool cosine = metric == SimilarityMetric::cosine;
  Matrix base;
  Vector sq_norms;
  if (cosine) {
    base = l2_normalize(set).matrix;
  } else {
    base = set.matrix;
    sq_norms = base.rowwise().squaredNorm();
  }

  NeighborGraph graph;
  graph.model_tag = set.model_tag;
  graph.k = k;
  graph.similarity_metric = metric;
  graph.node_ids = set.sample_ids;
  graph.neighbors.resize(static_cast<std::size_t>(n));
  graph.scores.resize(static_cast<std::size_t>(n));

  const std::vector<int> ranks = canonical_ranks(set.sample_ids);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    std::vector<int> selected;
    Eigen::RowVectorXd row_scores(n);
    for (std::size_t block = begin; block < end; block += static_cast<std::size_t>(kQueryBlock)) {
      const auto block_end = std::min(end, block + static_cast<std::size_t>(kQueryBlock));
      const auto rows = static_cast<Eigen::Index>(block_end - block);
      const Matrix products =
          base.middleRows(static_cast<Eigen::Index>(block), rows) * base.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto i = static_cast<Eigen::Index>(block) + r;
        if (cosine) {
          row_scores = products.row(r);
        } else {
          row_scores = (sq_norms[i] + sq_norms.array() - 2.0 * products.row(r).transpose().array())
                           .max(0.0)
                           .sqrt()
                           .matrix()
                           .transpose();
        }
        select_top_k(row_scores, ranks, k, cosine, static_cast<int>(i), selected);
        auto& neighbor_row = graph.neighbors[static_cast<std::size_t>(i)];
        auto& score_row = graph.scores[static_cast<std::size_t>(i)];
        neighbor_row = selected;
        score_row.resize(selected.size());
        for (std::size_t s = 0; s < selected.size(); ++s) {
          score_row[s] = row_scores[selected[s]];
        }
      }
    }
  });
  return graph;
}

double graph_overlap(const NeighborGraph& g1, const NeighborGraph& g2) {
  if (g1.k != g2.k) {
    throw Error(errc::mismatched_k,
                "graphs have k=" + std::to_string(g1.k) + " and k=" + std::to_string(g2.k));
  }
  std::unordered_map<std::string, std::size_t> g2_row;
  g2_row.reserve(g2.node_ids.size());
  for (std::size_t i = 0; i < g2.node_ids.size(); ++i) g2_row.emplace(g2.node_ids[i], i);
  if (g1.node_ids.size() != g2.node_ids.size()) {
    throw Error(errc::mismatched_nodes, "graphs cover different node counts");
  }

  double shared_total = 0.0;
  for (std::size_t i = 0; i < g1.node_ids.size(); ++i) {
    auto it = g2_row.find(g1.node_ids[i]);
    if (it == g2_row.end()) {
      throw Error(errc::mismatched_nodes, "node \"" + g1.node_ids[i] + "\" missing from one graph");
    }
    std::vector<std::string> a = g1.neighbor_ids(i);
    std::vector<std::string> b = g2.neighbor_ids(it->second);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    shared_total += static_cast<double>(shared.size()) / static_cast<double>(g1.k);
  }
  return shared_total / static_cast<double>(g1.node_ids.size());
}

PairwiseReport overlap_pairwise(const std::vector<NeighborGraph>& graphs) {
  if (graphs.size() < 2) {
    throw Error(errc::too_few_samples,
                "pairwise overlap needs at least 2 graphs, got " + std::to_string(graphs.size()));
  }
  const auto m = static_cast<Eigen::Index>(graphs.size());
  Matrix matrix = Matrix::Identity(m, m);
  std::vector<std::string> tags;
  for (const auto& graph : graphs) tags.push_back(graph.model_tag);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double value = graph_overlap(graphs[static_cast<std::size_t>(i)],
                                         graphs[static_cast<std::size_t>(j)]);
      matrix(i, j) = value;
      matrix(j, i) = value;
    }
  }
  std::map<std::string, std::string> params{{"k", std::to_string(graphs[0].k)},
                                            {"metric", metric_name(graphs[0].similarity_metric)}};
  return PairwiseReport::make("nn_graph_overlap", std::move(tags), std::move(matrix),
                              std::move(params));
}

void save_graph_csv(const NeighborGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  out << "node_id,rank,neighbor_id,similarity\n";
  char buffer[64];
  for (std::size_t i = 0; i < graph.node_ids.size(); ++i) {
    for (std::size_t r = 0; r < graph.neighbors[i].size(); ++r) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", graph.scores[i][r]);
      out << graph.node_ids[i] << ',' << r << ','
          << graph.node_ids[static_cast<std::size_t>(graph.neighbors[i][r])] << ',' << buffer
          << '\n';
    }
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

KnnEvalResult knn_classify(const EmbeddingSet& train, const LabelSet& train_labels,
                           const EmbeddingSet& test, const LabelSet& test_labels, int k,
                           const KnnOptions& options) {
  require_labels_for(train, train_labels);
  require_labels_for(test, test_labels);
  if (train_labels.num_classes != test_labels.num_classes) {
    throw Error(errc::label_mismatch,
                "train declares " + std::to_string(train_labels.num_classes) +
                    " classes, test declares " + std::to_string(test_labels.num_classes));
  }
  if (train.matrix.cols() != test.matrix.cols()) {
    throw Error(errc::dim_mismatch, "train D=" + std::to_string(train.matrix.cols()) +
                                        " vs test D=" + std::to_string(test.matrix.cols()));
  }
  const Eigen::Index n_train = train.matrix.rows();
  if (n_train == 0) {
    throw Error(errc::empty_train, "train set is empty");
  }
  if (k < 1 || static_cast<Eigen::Index>(k) > n_train) {
    throw Error(errc::k_too_large,
                "k=" + std::to_string(k) + " needs 1 <= k <= N_train=" + std::to_string(n_train));
  }
  if (options.temperature <= 0.0) {
    throw Error(errc::bad_value, "temperature must be positive");
  }

  const Matrix train_unit = l2_normalize(train).matrix;
  const Matrix test_unit = l2_normalize(test).matrix;
  const std::vector<int> ranks = canonical_ranks(train.sample_ids);
  const int num_classes = train_labels.num_classes;

  const Eigen::Index n_test = test.matrix.rows();
  std::vector<int> predictions(static_cast<std::size_t>(n_test), 0);

  parallel_for(static_cast<std::size_t>(n_test), [&](std::size_t begin, std::size_t end) {
    std::vector<int> selected;
    std::vector<double> class_scores(static_cast<std::size_t>(num_classes));
    for (std::size_t block = begin; block < end; block += static_cast<std::size_t>(kQueryBlock)) {
      const auto block_end = std::min(end, block + static_cast<std::size_t>(kQueryBlock));
      const auto rows = static_cast<Eigen::Index>(block_end - block);
      const Matrix sims =
          test_unit.middleRows(static_cast<Eigen::Index>(block), rows) * train_unit.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd row = sims.row(r);
        select_top_k(row, ranks, k, /*higher_better=*/true, /*exclude_index=*/-1, selected);

        std::fill(class_scores.begin(), class_scores.end(), 0.0);
        for (int index : selected) {
          const auto cls = static_cast<std::size_t>(train_labels.labels[static_cast<std::size_t>(index)]);
          if (options.voting == Voting::uniform) {
            class_scores[cls] += 1.0;
          } else {
            class_scores[cls] += std::exp(row[index] / options.temperature);
          }
        }
        const double best_score = *std::max_element(class_scores.begin(), class_scores.end());
        // Ties go to the class of the nearest neighbor among tied classes,
        // then to the lowest class index.
        int prediction = -1;
        for (int index : selected) {
          const int cls = train_labels.labels[static_cast<std::size_t>(index)];
          if (class_scores[static_cast<std::size_t>(cls)] == best_score) {
            prediction = cls;
            break;
          }
        }
        if (prediction < 0) {
          for (std::size_t c = 0; c < class_scores.size(); ++c) {
            if (class_scores[c] == best_score) {
              prediction = static_cast<int>(c);
              break;
            }
          }
        }
        predictions[block + static_cast<std::size_t>(r)] = prediction;
      }
    }
  });

  KnnEvalResult result;
  result.k = k;
  result.voting = options.voting;
  result.temperature = options.temperature;
  result.predictions = std::move(predictions);

  long long correct = 0;
  std::vector<long long> class_total(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> class_correct(static_cast<std::size_t>(num_classes), 0);
  for (Eigen::Index i = 0; i < n_test; ++i) {
    const int truth = test_labels.labels[static_cast<std::size_t>(i)];
    ++class_total[static_cast<std::size_t>(truth)];
    if (result.predictions[static_cast<std::size_t>(i)] == truth) {
      ++correct;
      ++class_correct[static_cast<std::size_t>(truth)];
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n_test);
  if (options.per_class_accuracy) {
    std::vector<double> per_class(static_cast<std::size_t>(num_classes));
    for (std::size_t c = 0; c < per_class.size(); ++c) {
      // -1 marks classes with no test samples.
      per_class[c] = class_total[c] > 0
                         ? static_cast<double>(class_correct[c]) / static_cast<double>(class_total[c])
                         : -1.0;
    }
    result.per_class_accuracy = std::move(per_class);
  }
  return result;
}

KnnSweepResult knn_sweep(const EmbeddingSet& train, const LabelSet& train_labels,
                         const EmbeddingSet& test, const LabelSet& test_labels,
                         const std::vector<int>& ks, const KnnOptions& options) {
  KnnSweepResult sweep;
  bool have_best = false;
  for (int k : ks) {
    if (k <= 0) {
      // k-NN is undefined for k <= 0 (the published sweep lists 0); skip
      // rather than guess a replacement.
      std::cerr << "[repmetric] warning: skipping non-positive k=" << k << " in sweep\n";
      continue;
    }
    KnnEvalResult result = knn_classify(train, train_labels, test, test_labels, k, options);
    if (!have_best || result.accuracy > sweep.best.accuracy ||
        (result.accuracy == sweep.best.accuracy && result.k < sweep.best.k)) {
      sweep.best = result;
      have_best = true;
    }
    sweep.table.push_back(std::move(result));
  }
  if (!have_best) {
    throw Error(errc::bad_value, "sweep contains no positive k values");
  }
  return sweep;
}

}  // namespace repmetric
