#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repmetric/error.hpp"
#include "repmetric/neighbors.hpp"
#include "test_util.hpp"

using namespace repmetric;

namespace {

EmbeddingSet set_of(const Matrix& m, const char* tag = "x") {
  return EmbeddingSet::create(tag, m);
}

// Independent neighbor oracle: plain per-pair loops, no blocking, same tie
// rule (descending similarity, then lexicographic id).
std::vector<std::vector<std::string>> brute_force_neighbors(const EmbeddingSet& set, int k,
                                                            SimilarityMetric metric) {
  const Eigen::Index n = set.matrix.rows();
  std::vector<std::vector<std::string>> result(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::string>> candidates;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double score;
      if (metric == SimilarityMetric::cosine) {
        score = set.matrix.row(i).dot(set.matrix.row(j)) /
                (set.matrix.row(i).norm() * set.matrix.row(j).norm());
        score = -score;  // sort ascending = descending similarity
      } else {
        score = (set.matrix.row(i) - set.matrix.row(j)).norm();
      }
      candidates.emplace_back(score, set.sample_ids[static_cast<std::size_t>(j)]);
    }
    std::sort(candidates.begin(), candidates.end());
    for (int r = 0; r < k; ++r) {
      result[static_cast<std::size_t>(i)].push_back(candidates[static_cast<std::size_t>(r)].second);
    }
  }
  return result;
}

NeighborGraph graph_from_lists(const std::string& tag, int k,
                               const std::vector<std::string>& node_ids,
                               const std::vector<std::vector<int>>& neighbors) {
  NeighborGraph graph;
  graph.model_tag = tag;
  graph.k = k;
  graph.similarity_metric = SimilarityMetric::cosine;
  graph.node_ids = node_ids;
  graph.neighbors = neighbors;
  graph.scores.assign(neighbors.size(), std::vector<double>(static_cast<std::size_t>(k), 0.0));
  return graph;
}

}  // namespace

TEST_CASE("middle of three collinear points prefers the nearer endpoint") {
  Matrix m(3, 1);
  m << 0.0, 1.0, 3.0;
  const NeighborGraph graph = build_graph(set_of(m, "line"), 1, SimilarityMetric::euclidean);
  CHECK(graph.neighbor_ids(1) == std::vector<std::string>{"0"});
}

TEST_CASE("k = N-1 lists every other node") {
  const Matrix m = testutil::random_matrix(6, 3, 4);
  const NeighborGraph graph = build_graph(set_of(m), 5, SimilarityMetric::cosine);
  for (std::size_t i = 0; i < 6; ++i) {
    auto ids = graph.neighbor_ids(i);
    CHECK(ids.size() == 5);
    CHECK(std::find(ids.begin(), ids.end(), graph.node_ids[i]) == ids.end());
  }
}

TEST_CASE("build_graph matches the brute-force scan on random points") {
  const Matrix m = testutil::random_matrix(100, 5, 8);
  for (const auto metric : {SimilarityMetric::cosine, SimilarityMetric::euclidean}) {
    const EmbeddingSet set = set_of(m);
    const NeighborGraph graph = build_graph(set, 5, metric);
    const auto expected = brute_force_neighbors(set, 5, metric);
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(graph.neighbor_ids(i) == expected[i]);
    }
  }
}

TEST_CASE("build_graph rejects k out of range") {
  const Matrix m = testutil::random_matrix(4, 2, 9);
  try {
    build_graph(set_of(m), 4, SimilarityMetric::cosine);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == errc::k_too_large);
  }
  CHECK_THROWS_AS(build_graph(set_of(m), 0, SimilarityMetric::cosine), Error);
}

TEST_CASE("duplicate points break ties by canonical id order") {
  Matrix m(4, 2);
  m << 1, 0, 1, 0, 1, 0, 0, 1;
  const EmbeddingSet set = EmbeddingSet::create("dup", m, {"d", "b", "c", "far"});
  const NeighborGraph graph = build_graph(set, 2, SimilarityMetric::cosine);
  // Node "d" sees equal similarity to "b" and "c"; id order decides.
  CHECK(graph.neighbor_ids(0) == std::vector<std::string>{"b", "c"});
}

TEST_CASE("build_graph neighbor sets survive row permutation") {
  const Matrix m = testutil::random_matrix(30, 4, 10);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("s" + std::to_string(i));
  const EmbeddingSet a = EmbeddingSet::create("a", m, ids);

  Matrix permuted(30, 4);
  std::vector<std::string> permuted_ids(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    const Eigen::Index src = (i * 11 + 5) % 30;
    permuted.row(i) = m.row(src);
    permuted_ids[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(src)];
  }
  const EmbeddingSet b = EmbeddingSet::create("b", permuted, permuted_ids);

  const NeighborGraph ga = build_graph(a, 4, SimilarityMetric::cosine);
  const NeighborGraph gb = build_graph(b, 4, SimilarityMetric::cosine);
  CHECK(graph_overlap(ga, gb) == 1.0);
}

TEST_CASE("cosine graphs ignore per-row positive rescaling") {
  const Matrix m = testutil::random_matrix(25, 4, 12);
  Matrix scaled = m;
  testutil::Gaussian gen(13);
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
    scaled.row(i) *= 0.5 + 3.0 * gen.next_uniform();
  }
  const NeighborGraph ga = build_graph(set_of(m), 5, SimilarityMetric::cosine);
  const NeighborGraph gb = build_graph(set_of(scaled), 5, SimilarityMetric::cosine);
  CHECK(graph_overlap(ga, gb) == 1.0);
}

TEST_CASE("graph_overlap identities and hand-built half overlap") {
  const Matrix m = testutil::random_matrix(20, 3, 14);
  const NeighborGraph g = build_graph(set_of(m), 4, SimilarityMetric::cosine);
  CHECK(graph_overlap(g, g) == 1.0);

  // 7 nodes, k=4: a(v) = {v+1..v+4}, b(v) = {v+1, v+2, v+5, v+6};
  // intersection is exactly {v+1, v+2} at every node.
  std::vector<std::string> ids{"0", "1", "2", "3", "4", "5", "6"};
  std::vector<std::vector<int>> a(7), b(7);
  for (int v = 0; v < 7; ++v) {
    for (int offset = 1; offset <= 4; ++offset) a[v].push_back((v + offset) % 7);
    b[v] = {(v + 1) % 7, (v + 2) % 7, (v + 5) % 7, (v + 6) % 7};
  }
  const NeighborGraph ga = graph_from_lists("a", 4, ids, a);
  const NeighborGraph gb = graph_from_lists("b", 4, ids, b);
  CHECK(graph_overlap(ga, gb) == 0.5);
  CHECK(graph_overlap(gb, ga) == 0.5);
}

TEST_CASE("graph_overlap of disjoint neighbor sets is zero") {
  std::vector<std::string> ids{"0", "1", "2", "3", "4"};
  std::vector<std::vector<int>> a(5), b(5);
  for (int v = 0; v < 5; ++v) {
    a[v] = {(v + 1) % 5};
    b[v] = {(v + 2) % 5};
  }
  CHECK(graph_overlap(graph_from_lists("a", 1, ids, a), graph_from_lists("b", 1, ids, b)) == 0.0);
}

TEST_CASE("graph_overlap validates k and node sets") {
  const Matrix m = testutil::random_matrix(10, 3, 15);
  const NeighborGraph g2 = build_graph(set_of(m), 2, SimilarityMetric::cosine);
  const NeighborGraph g3 = build_graph(set_of(m), 3, SimilarityMetric::cosine);
  try {
    graph_overlap(g2, g3);
    FAIL("expected MismatchedK");
  } catch (const Error& e) {
    CHECK(e.code() == errc::mismatched_k);
  }

  const EmbeddingSet other = EmbeddingSet::create(
      "o", m, {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  const NeighborGraph g_other = build_graph(other, 2, SimilarityMetric::cosine);
  try {
    graph_overlap(g2, g_other);
    FAIL("expected MismatchedNodes");
  } catch (const Error& e) {
    CHECK(e.code() == errc::mismatched_nodes);
  }
}

TEST_CASE("overlap_pairwise mirrors pairwise calls") {
  const Matrix base = testutil::random_matrix(30, 4, 16);
  const NeighborGraph g1 = build_graph(set_of(base, "m1"), 3, SimilarityMetric::cosine);
  const NeighborGraph g2 =
      build_graph(set_of((base * testutil::random_orthogonal(4, 17)).eval(), "m2"), 3,
                  SimilarityMetric::cosine);
  const NeighborGraph g3 =
      build_graph(set_of(testutil::random_matrix(30, 4, 18), "m3"), 3, SimilarityMetric::cosine);

  const PairwiseReport report = overlap_pairwise({g1, g2, g3});
  CHECK(report.model_tags == std::vector<std::string>{"m1", "m2", "m3"});
  for (int i = 0; i < 3; ++i) CHECK(report.matrix(i, i) == 1.0);
  CHECK(report.matrix(0, 1) == graph_overlap(g1, g2));
  CHECK(report.matrix(0, 2) == graph_overlap(g1, g3));
  CHECK(report.matrix(1, 2) == graph_overlap(g2, g3));
  CHECK(report.matrix == report.matrix.transpose().eval());
}

TEST_CASE("knn predicts the label of an exactly matching train point") {
  Matrix train(3, 2);
  train << 1, 0, 0, 1, -1, 0;
  const LabelSet train_labels = LabelSet::create({"0", "1", "2"}, {2, 1, 0});
  Matrix test(1, 2);
  test << 0, 1;
  const LabelSet test_labels = LabelSet::create({"t"}, {1}, 3);
  const EmbeddingSet test_set = EmbeddingSet::create("t", test, {"t"});

  const KnnEvalResult result =
      knn_classify(set_of(train, "tr"), train_labels, test_set, test_labels, 1);
  CHECK(result.predictions == std::vector<int>{1});
  CHECK(result.accuracy == 1.0);
}

TEST_CASE("knn separates clean blobs perfectly") {
  Matrix centers(2, 4);
  centers << 1, 0, 0, 0, 0, 1, 0, 0;
  const auto train = testutil::make_blobs(centers, 40, 0.01, 61);
  const auto test = testutil::make_blobs(centers, 15, 0.01, 62);
  const EmbeddingSet train_set = set_of(train.points, "train");
  const EmbeddingSet test_set = set_of(test.points, "test");
  const LabelSet train_labels = LabelSet::create(train_set.sample_ids, train.labels);
  const LabelSet test_labels = LabelSet::create(test_set.sample_ids, test.labels);

  for (const Voting voting : {Voting::temperature_weighted, Voting::uniform}) {
    KnnOptions options;
    options.voting = voting;
    CHECK(knn_classify(train_set, train_labels, test_set, test_labels, 5, options).accuracy ==
          1.0);
  }
}

TEST_CASE("uniform-vote tie goes to the class of the nearest neighbor") {
  Matrix train(2, 2);
  train << 1.0, 0.0, 0.9, 0.435889894354067;  // second row also unit-ish, further from query
  const LabelSet train_labels = LabelSet::create({"0", "1"}, {1, 0});
  Matrix query(1, 2);
  query << 1.0, 0.0;
  const EmbeddingSet test_set = EmbeddingSet::create("q", query, {"q"});
  const LabelSet test_labels = LabelSet::create({"q"}, {1}, 2);

  KnnOptions options;
  options.voting = Voting::uniform;
  const KnnEvalResult result =
      knn_classify(set_of(train, "tr"), train_labels, test_set, test_labels, 2, options);
  // Counts tie 1-1; the nearest neighbor has class 1.
  CHECK(result.predictions == std::vector<int>{1});
}

TEST_CASE("knn with train as test and k=1 is perfect") {
  const Matrix m = testutil::random_matrix(30, 5, 63);
  std::vector<int> labels(30);
  testutil::Gaussian gen(64);
  for (auto& label : labels) label = static_cast<int>(gen.next_int(5));
  const EmbeddingSet set = set_of(m, "m");
  const LabelSet label_set = LabelSet::create(set.sample_ids, labels, 5);
  CHECK(knn_classify(set, label_set, set, label_set, 1).accuracy == 1.0);
}

TEST_CASE("knn validates k, temperature, and dimensions") {
  const Matrix m = testutil::random_matrix(5, 3, 65);
  const EmbeddingSet set = set_of(m, "m");
  const LabelSet labels = LabelSet::create(set.sample_ids, {0, 1, 0, 1, 0});
  try {
    knn_classify(set, labels, set, labels, 6);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == errc::k_too_large);
  }
  KnnOptions options;
  options.temperature = 0.0;
  CHECK_THROWS_AS(knn_classify(set, labels, set, labels, 2, options), Error);

  const EmbeddingSet wide = set_of(testutil::random_matrix(5, 4, 66), "w");
  const LabelSet wide_labels = LabelSet::create(wide.sample_ids, {0, 1, 0, 1, 0});
  try {
    knn_classify(set, labels, wide, wide_labels, 2);
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == errc::dim_mismatch);
  }
}

TEST_CASE("knn sweep honors the smallest-k tie rule and skips k <= 0") {
  Matrix centers(2, 3);
  centers << 5, 0, 0, 0, 5, 0;
  const auto blob = testutil::make_blobs(centers, 30, 0.05, 67);
  const EmbeddingSet set = set_of(blob.points, "m");
  const LabelSet labels = LabelSet::create(set.sample_ids, blob.labels);

  const KnnSweepResult sweep = knn_sweep(set, labels, set, labels, {0, 10, 5});
  CHECK(sweep.table.size() == 2);  // k=0 skipped
  CHECK(sweep.best.accuracy == 1.0);
  CHECK(sweep.best.k == 5);  // both k reach 1.0; smaller k wins
  for (const auto& row : sweep.table) {
    CHECK(sweep.best.accuracy >= row.accuracy);
  }

  const KnnSweepResult single = knn_sweep(set, labels, set, labels, {1});
  CHECK(single.best.accuracy == knn_classify(set, labels, set, labels, 1).accuracy);
  CHECK_THROWS_AS(knn_sweep(set, labels, set, labels, {0, -3}), Error);
}

TEST_CASE("per-class accuracy accounts every class") {
  Matrix centers(3, 3);
  centers << 4, 0, 0, 0, 4, 0, 0, 0, 4;
  const auto blob = testutil::make_blobs(centers, 20, 0.05, 68);
  const EmbeddingSet set = set_of(blob.points, "m");
  const LabelSet labels = LabelSet::create(set.sample_ids, blob.labels);
  KnnOptions options;
  options.per_class_accuracy = true;
  const KnnEvalResult result = knn_classify(set, labels, set, labels, 3, options);
  REQUIRE(result.per_class_accuracy.has_value());
  CHECK(result.per_class_accuracy->size() == 3);
  for (double value : *result.per_class_accuracy) CHECK(value == 1.0);
}
