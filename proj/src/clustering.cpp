#include "repmetric/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <vector>

#include "repmetric/error.hpp"
#include "repmetric/parallel.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {

namespace {

constexpr long long kMinibatchAutoThreshold = 100000;

// Nearest centroid per row; ties go to the lower centroid index. Returns
// the summed min squared distances (the inertia of this assignment).
double assign_nearest(const Matrix& data, const Matrix& centroids, std::vector<int>& assignments,
                      std::vector<double>& min_dist_sq) {
  const Eigen::Index n = data.rows();
  const Eigen::Index k = centroids.rows();
  const Vector data_sq = data.rowwise().squaredNorm();
  const Vector centroid_sq = centroids.rowwise().squaredNorm();
  assignments.assign(static_cast<std::size_t>(n), 0);
  min_dist_sq.assign(static_cast<std::size_t>(n), 0.0);

  constexpr Eigen::Index kBlock = 512;
  double total = 0.0;
  for (Eigen::Index begin = 0; begin < n; begin += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - begin);
    const Matrix products = data.middleRows(begin, rows) * centroids.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double dist = data_sq[begin + r] + centroid_sq[c] - 2.0 * products(r, c);
        if (dist < best_dist) {
          best_dist = dist;
          best = static_cast<int>(c);
        }
      }
      best_dist = std::max(0.0, best_dist);
      assignments[static_cast<std::size_t>(begin + r)] = best;
      min_dist_sq[static_cast<std::size_t>(begin + r)] = best_dist;
      total += best_dist;
    }
  }
  return total;
}

Matrix kmeanspp_init(const Matrix& data, int k, Xoshiro256StarStar& rng) {
  const Eigen::Index n = data.rows();
  Matrix centroids(k, data.cols());
  centroids.row(0) = data.row(static_cast<Eigen::Index>(rng.next_below(static_cast<uint64_t>(n))));

  Vector dist_sq = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist_sq.sum();
    Eigen::Index chosen;
    if (total <= 0.0) {
      // Every remaining point coincides with a centroid.
      chosen = static_cast<Eigen::Index>(rng.next_below(static_cast<uint64_t>(n)));
    } else {
      const double target = rng.next_double() * total;
      double cumulative = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += dist_sq[i];
        if (cumulative >= target) {
          chosen = i;
          break;
        }
      }
    }
    centroids.row(c) = data.row(chosen);
    dist_sq = dist_sq.cwiseMin((data.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

// Moves each empty centroid onto the point currently farthest from its
// assigned centroid, keeping k constant.
void reseed_empty(const Matrix& data, Matrix& centroids, const std::vector<int>& assignments,
                  std::vector<double>& min_dist_sq) {
  const Eigen::Index k = centroids.rows();
  std::vector<long long> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++counts[static_cast<std::size_t>(a)];
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    std::size_t farthest = 0;
    for (std::size_t i = 1; i < min_dist_sq.size(); ++i) {
      if (min_dist_sq[i] > min_dist_sq[farthest]) farthest = i;
    }
    centroids.row(c) = data.row(static_cast<Eigen::Index>(farthest));
    min_dist_sq[farthest] = 0.0;  // keep later empties from picking the same donor
    ++counts[static_cast<std::size_t>(c)];
  }
}

struct SingleRun {
  Matrix centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> trace;
};

SingleRun run_lloyd(const Matrix& data, int k, uint64_t seed, int max_iter) {
  Xoshiro256StarStar rng(seed);
  SingleRun run;
  run.centroids = kmeanspp_init(data, k, rng);

  std::vector<int> previous;
  std::vector<double> min_dist_sq;
  for (int iter = 0; iter < max_iter; ++iter) {
    run.inertia = assign_nearest(data, run.centroids, run.assignments, min_dist_sq);
    run.trace.push_back(run.inertia);
    if (run.assignments == previous) break;
    previous = run.assignments;

    Matrix sums = Matrix::Zero(k, data.cols());
    std::vector<long long> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int c = run.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += data.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        run.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    reseed_empty(data, run.centroids, run.assignments, min_dist_sq);
  }
  return run;
}

SingleRun run_minibatch(const Matrix& data, int k, long long batch, uint64_t seed) {
  Xoshiro256StarStar rng(seed);
  SingleRun run;
  run.centroids = kmeanspp_init(data, k, rng);

  const Eigen::Index n = data.rows();
  const long long batch_size = std::min<long long>(batch, n);
  const long long steps = (10 * n + batch_size - 1) / batch_size;
  std::vector<long long> counts(static_cast<std::size_t>(k), 0);
  std::vector<Eigen::Index> batch_rows(static_cast<std::size_t>(batch_size));
  std::vector<int> batch_assign(static_cast<std::size_t>(batch_size));

  for (long long step = 0; step < steps; ++step) {
    for (auto& row : batch_rows) {
      row = static_cast<Eigen::Index>(rng.next_below(static_cast<uint64_t>(n)));
    }
    // Cache assignments for the whole batch, then apply per-point centroid
    // updates with the 1/count learning rate.
    const Vector centroid_sq = run.centroids.rowwise().squaredNorm();
    for (std::size_t b = 0; b < batch_rows.size(); ++b) {
      const auto row = data.row(batch_rows[b]);
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double dist = centroid_sq[c] - 2.0 * row.dot(run.centroids.row(c));
        if (dist < best_dist) {
          best_dist = dist;
          best = static_cast<int>(c);
        }
      }
      batch_assign[b] = best;
    }
    for (std::size_t b = 0; b < batch_rows.size(); ++b) {
      const int c = batch_assign[b];
      const double lr = 1.0 / static_cast<double>(++counts[static_cast<std::size_t>(c)]);
      run.centroids.row(c) =
          (1.0 - lr) * run.centroids.row(c) + lr * data.row(batch_rows[b]);
    }
  }

  std::vector<double> min_dist_sq;
  run.inertia = assign_nearest(data, run.centroids, run.assignments, min_dist_sq);
  // A centroid can end the stream empty; reseed and settle once more.
  std::vector<long long> final_counts(static_cast<std::size_t>(k), 0);
  for (int a : run.assignments) ++final_counts[static_cast<std::size_t>(a)];
  if (std::find(final_counts.begin(), final_counts.end(), 0LL) != final_counts.end()) {
    reseed_empty(data, run.centroids, run.assignments, min_dist_sq);
    run.inertia = assign_nearest(data, run.centroids, run.assignments, min_dist_sq);
  }
  run.trace.push_back(run.inertia);
  return run;
}

}  // namespace

KmeansMode parse_kmeans_mode(const std::string& name) {
  if (name == "auto") return KmeansMode::automatic;
  if (name == "lloyd") return KmeansMode::lloyd;
  if (name == "minibatch") return KmeansMode::minibatch;
  throw Error(errc::config_invalid, "unknown k-means mode \"" + name + "\"");
}

const char* kmeans_mode_name(KmeansMode mode) {
  switch (mode) {
    case KmeansMode::automatic: return "auto";
    case KmeansMode::lloyd: return "lloyd";
    case KmeansMode::minibatch: return "minibatch";
  }
  return "?";
}

double compute_inertia(const Matrix& data, const Matrix& centroids,
                       const std::vector<int>& assignments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    total += (data.row(i) - centroids.row(assignments[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

ClusterResult kmeans(const EmbeddingSet& set, int k, const KmeansOptions& options) {
  const Eigen::Index n = set.matrix.rows();
  if (k < 1 || static_cast<Eigen::Index>(k) > n) {
    throw Error(errc::k_too_large,
                "k=" + std::to_string(k) + " needs 1 <= k <= N=" + std::to_string(n));
  }
  if (options.n_init < 1) {
    throw Error(errc::bad_value, "n_init must be at least 1");
  }
  KmeansMode mode = options.mode;
  if (mode == KmeansMode::automatic) {
    mode = n > kMinibatchAutoThreshold ? KmeansMode::minibatch : KmeansMode::lloyd;
  }
  if (mode == KmeansMode::minibatch && options.batch < k) {
    throw Error(errc::bad_value, "minibatch size " + std::to_string(options.batch) +
                                     " must be at least k=" + std::to_string(k));
  }

  // Independent seeded runs; selection by exact full-data inertia, ties to
  // the lower run index, so the result does not depend on scheduling.
  std::vector<SingleRun> runs(static_cast<std::size_t>(options.n_init));
  parallel_for(runs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const uint64_t run_seed = options.seed + static_cast<uint64_t>(r);
      runs[r] = mode == KmeansMode::lloyd
                    ? run_lloyd(set.matrix, k, run_seed, options.max_iter)
                    : run_minibatch(set.matrix, k, options.batch, run_seed);
    }
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }

  ClusterResult result;
  result.k = k;
  result.assignments = std::move(runs[best].assignments);
  result.centroids = std::move(runs[best].centroids);
  result.inertia = runs[best].inertia;
  result.n_init_runs = options.n_init;
  result.best_run_index = static_cast<int>(best);
  result.seed = options.seed;
  result.mode_used = mode;
  result.sample_ids = set.sample_ids;
  result.inertia_trace = std::move(runs[best].trace);
  result.run_inertias.reserve(runs.size());
  for (const auto& run : runs) result.run_inertias.push_back(run.inertia);
  return result;
}

Contingency build_contingency(const std::vector<int>& assignments, int k,
                              const std::vector<int>& labels, int num_classes) {
  if (assignments.size() != labels.size()) {
    throw Error(errc::label_mismatch, "assignments and labels differ in length");
  }
  Contingency counts = Contingency::Zero(k, num_classes);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] < 0 || assignments[i] >= k) {
      throw Error(errc::bad_value, "cluster id out of range", static_cast<long>(i));
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(errc::bad_value, "class label out of range", static_cast<long>(i));
    }
    counts(assignments[i], labels[i]) += 1;
  }
  return counts;
}

std::pair<std::vector<int>, long long> max_assignment(const Contingency& counts) {
  if (counts.rows() != counts.cols()) {
    throw Error(errc::k_class_mismatch, "assignment matrix must be square, got " +
                                            std::to_string(counts.rows()) + "x" +
                                            std::to_string(counts.cols()));
  }
  const int n = static_cast<int>(counts.rows());

  // Kuhn-Munkres with potentials on the negated counts (min-cost form),
  // O(n^3). 1-based scratch arrays; column 0 is the virtual source.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_value(static_cast<std::size_t>(n) + 1,
                                  std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cost =
            -static_cast<double>(counts(i0 - 1, j - 1)) - u[static_cast<std::size_t>(i0)] -
            v[static_cast<std::size_t>(j)];
        if (cost < min_value[static_cast<std::size_t>(j)]) {
          min_value[static_cast<std::size_t>(j)] = cost;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (min_value[static_cast<std::size_t>(j)] < delta) {
          delta = min_value[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          min_value[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> mapping(static_cast<std::size_t>(n), -1);
  long long total = 0;
  for (int j = 1; j <= n; ++j) {
    const int i = match[static_cast<std::size_t>(j)];
    mapping[static_cast<std::size_t>(i - 1)] = j - 1;
    total += counts(i - 1, j - 1);
  }
  return {std::move(mapping), total};
}

ClusterAccuracy hungarian_accuracy(const ClusterResult& result, const LabelSet& labels) {
  if (result.sample_ids != labels.sample_ids) {
    throw Error(errc::label_mismatch, "cluster result and labels cover different samples");
  }
  if (result.k != labels.num_classes) {
    throw Error(errc::k_class_mismatch,
                "one-to-one matching needs k == num_classes, got k=" + std::to_string(result.k) +
                    " and C=" + std::to_string(labels.num_classes));
  }

  ClusterAccuracy accuracy;
  accuracy.mode = MappingMode::hungarian;
  accuracy.contingency = build_contingency(result.assignments, result.k, labels.labels,
                                           labels.num_classes);
  auto [mapping, matched] = max_assignment(accuracy.contingency);
  accuracy.mapping = std::move(mapping);
  accuracy.accuracy = static_cast<double>(matched) / static_cast<double>(labels.n());
  return accuracy;
}

ClusterAccuracy greedy_accuracy(const ClusterResult& result, const LabelSet& labels) {
  if (result.sample_ids != labels.sample_ids) {
    throw Error(errc::label_mismatch, "cluster result and labels cover different samples");
  }
  if (result.k < labels.num_classes) {
    std::cerr << "[repmetric] warning: greedy mapping with k=" << result.k << " < "
              << labels.num_classes << " classes cannot reach every class\n";
  }

  ClusterAccuracy accuracy;
  accuracy.mode = MappingMode::greedy;
  accuracy.contingency = build_contingency(result.assignments, result.k, labels.labels,
                                           labels.num_classes);
  accuracy.mapping.resize(static_cast<std::size_t>(result.k));
  long long matched = 0;
  for (int c = 0; c < result.k; ++c) {
    int best_class = 0;
    long long best_count = accuracy.contingency(c, 0);
    for (int cls = 1; cls < labels.num_classes; ++cls) {
      if (accuracy.contingency(c, cls) > best_count) {
        best_count = accuracy.contingency(c, cls);
        best_class = cls;
      }
    }
    accuracy.mapping[static_cast<std::size_t>(c)] = best_class;
    matched += best_count;
  }
  accuracy.accuracy = static_cast<double>(matched) / static_cast<double>(labels.n());
  return accuracy;
}

void save_assignments_csv(const ClusterResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  out << "id,cluster\n";
  for (std::size_t i = 0; i < result.sample_ids.size(); ++i) {
    out << result.sample_ids[i] << ',' << result.assignments[i] << '\n';
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

void save_contingency_csv(const Contingency& counts, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (j) out << ',';
      out << counts(i, j);
    }
    out << '\n';
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

}  // namespace repmetric
