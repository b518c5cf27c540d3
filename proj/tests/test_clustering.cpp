#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "repmetric/clustering.hpp"
#include "repmetric/error.hpp"
#include "test_util.hpp"

using namespace repmetric;

namespace {

EmbeddingSet set_of(const Matrix& m) { return EmbeddingSet::create("x", m); }

// Exhaustive assignment oracle for square count matrices.
long long brute_force_best_assignment(const Contingency& counts) {
  const int n = static_cast<int>(counts.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  long long best = -1;
  do {
    long long total = 0;
    for (int i = 0; i < n; ++i) total += counts(i, perm[static_cast<std::size_t>(i)]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Contingency random_contingency(int rows, int cols, uint64_t seed, int max_count = 20) {
  testutil::Gaussian gen(seed);
  Contingency counts(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      counts(i, j) = static_cast<long long>(gen.next_int(static_cast<uint64_t>(max_count)));
  return counts;
}

ClusterResult result_with(const std::vector<int>& assignments, int k) {
  ClusterResult result;
  result.k = k;
  result.assignments = assignments;
  result.sample_ids = default_ids(assignments.size());
  return result;
}

}  // namespace

TEST_CASE("k = N gives zero inertia") {
  const Matrix m = testutil::random_matrix(6, 3, 1);
  KmeansOptions options;
  options.n_init = 2;
  const ClusterResult result = kmeans(set_of(m), 6, options);
  CHECK(result.inertia == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("k = 1 recovers the mean and total variance") {
  const Matrix m = testutil::random_matrix(40, 3, 2);
  KmeansOptions options;
  options.n_init = 1;
  const ClusterResult result = kmeans(set_of(m), 1, options);
  const Eigen::RowVectorXd mean = m.colwise().mean();
  CHECK((result.centroids.row(0) - mean).norm() < 1e-10);
  const double expected = (m.rowwise() - mean).squaredNorm();
  CHECK(result.inertia == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("two separated blobs are recovered with the expected inertia") {
  Matrix centers(2, 4);
  centers << 10, 0, 0, 0, -10, 0, 0, 0;
  const auto blob = testutil::make_blobs(centers, 200, 0.1, 3);
  const ClusterResult result = kmeans(set_of(blob.points), 2, {.n_init = 4, .seed = 5});

  // Each recovered centroid sits within 0.1 of one true center.
  for (int c = 0; c < 2; ++c) {
    const double to_first = (result.centroids.row(c) - centers.row(0)).norm();
    const double to_second = (result.centroids.row(c) - centers.row(1)).norm();
    CHECK(std::min(to_first, to_second) < 0.1);
  }
  // E[inertia] ~= N * D * sigma^2.
  const double expected = 400.0 * 4.0 * 0.01;
  CHECK(result.inertia > expected * 0.8);
  CHECK(result.inertia < expected * 1.2);

  const LabelSet labels = LabelSet::create(default_ids(400), blob.labels);
  CHECK(hungarian_accuracy(result, labels).accuracy == 1.0);
}

TEST_CASE("lloyd inertia trace is monotone non-increasing") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix m = testutil::random_matrix(120, 5, 100 + seed);
    const ClusterResult result = kmeans(set_of(m), 6, {.n_init = 1, .seed = seed});
    REQUIRE(result.inertia_trace.size() >= 1);
    for (std::size_t i = 1; i < result.inertia_trace.size(); ++i) {
      CHECK(result.inertia_trace[i] <= result.inertia_trace[i - 1] + 1e-9);
    }
  }
}

TEST_CASE("best-of-n_init takes the lowest run inertia") {
  const Matrix m = testutil::random_matrix(80, 4, 11);
  const ClusterResult result = kmeans(set_of(m), 5, {.n_init = 6, .seed = 17});
  CHECK(result.run_inertias.size() == 6);
  for (double run_inertia : result.run_inertias) {
    CHECK(result.inertia <= run_inertia + 1e-12);
  }
  CHECK(result.inertia == result.run_inertias[static_cast<std::size_t>(result.best_run_index)]);
}

TEST_CASE("fixed seed reproduces k-means bit-exactly") {
  const Matrix m = testutil::random_matrix(90, 4, 12);
  const KmeansOptions options{.n_init = 3, .seed = 77};
  const ClusterResult first = kmeans(set_of(m), 4, options);
  const ClusterResult second = kmeans(set_of(m), 4, options);
  CHECK(first.assignments == second.assignments);
  CHECK(first.centroids == second.centroids);
  CHECK(first.inertia == second.inertia);
}

TEST_CASE("reported inertia equals the recomputed value") {
  const Matrix m = testutil::random_matrix(70, 3, 13);
  const ClusterResult result = kmeans(set_of(m), 4, {.n_init = 2, .seed = 3});
  const double recomputed = compute_inertia(m, result.centroids, result.assignments);
  CHECK(result.inertia == doctest::Approx(recomputed).epsilon(1e-6));
}

TEST_CASE("minibatch mode clusters blobs and validates batch size") {
  Matrix centers(2, 3);
  centers << 8, 0, 0, -8, 0, 0;
  const auto blob = testutil::make_blobs(centers, 150, 0.2, 21);
  KmeansOptions options;
  options.mode = KmeansMode::minibatch;
  options.batch = 64;
  options.n_init = 2;
  options.seed = 9;
  const ClusterResult result = kmeans(set_of(blob.points), 2, options);
  CHECK(result.mode_used == KmeansMode::minibatch);
  const LabelSet labels = LabelSet::create(default_ids(300), blob.labels);
  CHECK(hungarian_accuracy(result, labels).accuracy == 1.0);

  options.batch = 1;
  CHECK_THROWS_AS(kmeans(set_of(blob.points), 2, options), Error);
}

TEST_CASE("kmeans rejects k out of range") {
  const Matrix m = testutil::random_matrix(5, 2, 31);
  try {
    kmeans(set_of(m), 6);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == errc::k_too_large);
  }
  CHECK_THROWS_AS(kmeans(set_of(m), 0), Error);
}

TEST_CASE("hungarian accuracy recognizes relabeled perfect clusterings") {
  const std::vector<int> labels_vec{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<int> swapped{2, 2, 2, 0, 0, 0, 1, 1, 1};
  const LabelSet labels = LabelSet::create(default_ids(9), labels_vec);
  const ClusterAccuracy accuracy = hungarian_accuracy(result_with(swapped, 3), labels);
  CHECK(accuracy.accuracy == 1.0);
  CHECK(accuracy.mapping == std::vector<int>{1, 2, 0});
}

TEST_CASE("hungarian matches the brute-force permutation maximum") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 2 + static_cast<int>(seed % 4);  // up to 5x5 here
    const Contingency counts = random_contingency(n, n, 1000 + seed);
    const auto [mapping, total] = max_assignment(counts);
    CHECK(total == brute_force_best_assignment(counts));

    // Mapping must be a permutation.
    std::vector<int> sorted = mapping;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  }
}

TEST_CASE("hungarian requires k == num_classes") {
  const LabelSet labels = LabelSet::create(default_ids(4), {0, 1, 2, 0});
  try {
    hungarian_accuracy(result_with({0, 1, 0, 1}, 2), labels);
    FAIL("expected KClassMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == errc::k_class_mismatch);
  }
}

TEST_CASE("greedy accuracy on the hand-enumerated contingency") {
  // Contingency [[3,1],[2,2]]: cluster0 -> class0; cluster1 ties -> class0.
  const std::vector<int> assignments{0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> labels_vec{0, 0, 0, 1, 0, 0, 1, 1};
  const LabelSet labels = LabelSet::create(default_ids(8), labels_vec);
  const ClusterAccuracy accuracy = greedy_accuracy(result_with(assignments, 2), labels);
  CHECK(accuracy.contingency(0, 0) == 3);
  CHECK(accuracy.contingency(1, 1) == 2);
  CHECK(accuracy.mapping == std::vector<int>{0, 0});
  CHECK(accuracy.accuracy == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("greedy overclustering reaches 1.0 on pure clusters") {
  // 2 classes split over 4 pure clusters.
  const std::vector<int> assignments{0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> labels_vec{0, 0, 0, 0, 1, 1, 1, 1};
  const LabelSet labels = LabelSet::create(default_ids(8), labels_vec);
  CHECK(greedy_accuracy(result_with(assignments, 4), labels).accuracy == 1.0);
}

TEST_CASE("greedy is at least hungarian when k equals the class count") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 3 + static_cast<int>(seed % 3);
    testutil::Gaussian gen(2000 + seed);
    const int samples = 60;
    std::vector<int> assignments(samples), labels_vec(samples);
    for (int i = 0; i < samples; ++i) {
      assignments[static_cast<std::size_t>(i)] = static_cast<int>(gen.next_int(n));
      labels_vec[static_cast<std::size_t>(i)] = static_cast<int>(gen.next_int(n));
    }
    const LabelSet labels = LabelSet::create(default_ids(samples), labels_vec, n);
    const ClusterResult result = result_with(assignments, n);
    CHECK(greedy_accuracy(result, labels).accuracy >=
          hungarian_accuracy(result, labels).accuracy - 1e-12);
  }
}

TEST_CASE("diagonal-dominant contingency gives equal greedy and hungarian accuracy") {
  const std::vector<int> assignments{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<int> labels_vec{0, 0, 1, 1, 1, 0, 2, 2, 2};
  const LabelSet labels = LabelSet::create(default_ids(9), labels_vec);
  const ClusterResult result = result_with(assignments, 3);
  CHECK(greedy_accuracy(result, labels).accuracy == hungarian_accuracy(result, labels).accuracy);
}
