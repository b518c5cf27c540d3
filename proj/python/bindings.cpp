// Python bindings for the core metrics. Arrays cross the boundary as
// numpy float64 (copied, row-major); results come back as plain dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "repmetric/cka.hpp"
#include "repmetric/clustering.hpp"
#include "repmetric/error.hpp"
#include "repmetric/geometry.hpp"
#include "repmetric/neighbors.hpp"
#include "repmetric/probe.hpp"
#include "repmetric/store.hpp"
#include "repmetric/types.hpp"

namespace py = pybind11;
using namespace repmetric;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<long long, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& array) {
  if (array.ndim() != 2) {
    throw Error(errc::dim_mismatch, "expected a 2-D array, got " + std::to_string(array.ndim()) +
                                        "-D");
  }
  Matrix out(array.shape(0), array.shape(1));
  std::memcpy(out.data(), array.data(),
              static_cast<std::size_t>(out.size()) * sizeof(double));
  return out;
}

std::vector<int> to_labels(const IntArray& array) {
  if (array.ndim() != 1) {
    throw Error(errc::dim_mismatch, "labels must be a 1-D array");
  }
  std::vector<int> out(static_cast<std::size_t>(array.shape(0)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<int>(array.data()[i]);
  }
  return out;
}

py::array_t<double> from_matrix(const Matrix& matrix) {
  py::array_t<double> out({matrix.rows(), matrix.cols()});
  std::memcpy(out.mutable_data(), matrix.data(),
              static_cast<std::size_t>(matrix.size()) * sizeof(double));
  return out;
}

py::array_t<int> from_int_vector(const std::vector<int>& values) {
  py::array_t<int> out(static_cast<py::ssize_t>(values.size()));
  std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(int));
  return out;
}

py::array_t<double> from_vector(const Vector& values) {
  py::array_t<double> out(static_cast<py::ssize_t>(values.size()));
  std::memcpy(out.mutable_data(), values.data(),
              static_cast<std::size_t>(values.size()) * sizeof(double));
  return out;
}

EmbeddingSet make_set(const DoubleArray& array, const char* tag) {
  return EmbeddingSet::create(tag, to_matrix(array));
}

LabelSet make_labels(const IntArray& array, int num_classes) {
  auto labels = to_labels(array);
  auto ids = default_ids(labels.size());
  return LabelSet::create(std::move(ids), std::move(labels), num_classes);
}

py::dict knn_result_dict(const KnnEvalResult& result) {
  py::dict out;
  out["k"] = result.k;
  out["accuracy"] = result.accuracy;
  out["voting"] = voting_name(result.voting);
  out["temperature"] = result.temperature;
  out["predictions"] = from_int_vector(result.predictions);
  return out;
}

py::dict cluster_accuracy_dict(const ClusterAccuracy& accuracy) {
  py::dict out;
  out["accuracy"] = accuracy.accuracy;
  out["mapping"] = from_int_vector(accuracy.mapping);
  return out;
}

ClusterResult result_from_assignments(const IntArray& assignments, int k) {
  ClusterResult result;
  result.k = k;
  auto values = to_labels(assignments);
  if (k <= 0) {
    for (int value : values) result.k = std::max(result.k, value + 1);
  }
  result.assignments = std::move(values);
  result.sample_ids = default_ids(result.assignments.size());
  return result;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metrics for comparing learned image representations";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "RepmetricError", PyExc_ValueError);

  m.def(
      "linear_cka",
      [](const DoubleArray& x, const DoubleArray& y) {
        return linear_cka(make_set(x, "x"), make_set(y, "y")).value;
      },
      py::arg("x"), py::arg("y"),
      "Linear CKA between two aligned embedding matrices (rows are samples).");

  m.def(
      "augmentation_invariance",
      [](const DoubleArray& clean, const DoubleArray& augmented) {
        return augmentation_invariance(make_set(clean, "clean"), make_set(augmented, "augmented"))
            .value;
      },
      py::arg("clean"), py::arg("augmented"),
      "CKA between clean and augmented embeddings of the same images.");

  m.def(
      "uniformity",
      [](const DoubleArray& x, double t, long long exact_threshold,
         std::optional<long long> pair_budget, uint64_t seed, bool include_self_pairs) {
        UniformityOptions options;
        options.t = t;
        options.exact_threshold = exact_threshold;
        options.pair_budget = pair_budget;
        options.seed = seed;
        options.include_self_pairs = include_self_pairs;
        const GeometryScore score = uniformity(l2_normalize(make_set(x, "x")), options);
        py::dict out;
        out["uniformity"] = *score.uniformity;
        out["exact"] = score.exact;
        out["n_pairs_evaluated"] = score.n_pairs_evaluated;
        return out;
      },
      py::arg("x"), py::arg("t") = 2.0, py::arg("exact_threshold") = 5000,
      py::arg("pair_budget") = std::nullopt, py::arg("seed") = 0,
      py::arg("include_self_pairs") = false,
      "Hypersphere uniformity; rows are L2-normalized first.");

  m.def(
      "tolerance",
      [](const DoubleArray& x, const IntArray& labels, bool unconditional,
         bool include_self_pairs) {
        ToleranceOptions options;
        options.unconditional = unconditional;
        options.include_self_pairs = include_self_pairs;
        return *tolerance(l2_normalize(make_set(x, "x")), make_labels(labels, 0), options)
                    .tolerance;
      },
      py::arg("x"), py::arg("labels"), py::arg("unconditional") = false,
      py::arg("include_self_pairs") = false,
      "Mean same-class cosine similarity; rows are L2-normalized first.");

  m.def(
      "nn_graph_overlap",
      [](const DoubleArray& x, const DoubleArray& y, int k, const std::string& metric) {
        const SimilarityMetric parsed = parse_metric(metric);
        return graph_overlap(build_graph(make_set(x, "x"), k, parsed),
                             build_graph(make_set(y, "y"), k, parsed));
      },
      py::arg("x"), py::arg("y"), py::arg("k"), py::arg("metric") = "cosine",
      "Mean shared top-k neighbors per node between two embeddings of the same samples.");

  m.def(
      "knn_classify",
      [](const DoubleArray& train_x, const IntArray& train_y, const DoubleArray& test_x,
         const IntArray& test_y, int k, const std::string& voting, double temperature) {
        LabelSet train_labels = make_labels(train_y, 0);
        LabelSet test_labels = make_labels(test_y, 0);
        const int num_classes = std::max(train_labels.num_classes, test_labels.num_classes);
        train_labels.num_classes = num_classes;
        test_labels.num_classes = num_classes;
        KnnOptions options;
        options.voting = parse_voting(voting);
        options.temperature = temperature;
        return knn_result_dict(knn_classify(make_set(train_x, "train"), train_labels,
                                            make_set(test_x, "test"), test_labels, k, options));
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("test_x"), py::arg("test_y"),
      py::arg("k") = 200, py::arg("voting") = "temperature_weighted",
      py::arg("temperature") = 0.07, "Cosine k-NN classification accuracy.");

  m.def(
      "kmeans",
      [](const DoubleArray& x, int k, int n_init, const std::string& mode, long long batch,
         uint64_t seed) {
        KmeansOptions options;
        options.n_init = n_init;
        options.mode = parse_kmeans_mode(mode);
        options.batch = batch;
        options.seed = seed;
        const ClusterResult result = kmeans(make_set(x, "x"), k, options);
        py::dict out;
        out["assignments"] = from_int_vector(result.assignments);
        out["centroids"] = from_matrix(result.centroids);
        out["inertia"] = result.inertia;
        out["best_run_index"] = result.best_run_index;
        return out;
      },
      py::arg("x"), py::arg("k"), py::arg("n_init") = 10, py::arg("mode") = "auto",
      py::arg("batch") = 16384, py::arg("seed") = 0,
      "Best-of-n_init k-means++ clustering (Lloyd or mini-batch).");

  m.def(
      "hungarian_accuracy",
      [](const IntArray& assignments, const IntArray& labels, int k) {
        const LabelSet label_set = make_labels(labels, 0);
        const ClusterResult result =
            result_from_assignments(assignments, k > 0 ? k : label_set.num_classes);
        return cluster_accuracy_dict(hungarian_accuracy(result, label_set));
      },
      py::arg("assignments"), py::arg("labels"), py::arg("k") = 0,
      "Clustering accuracy under the optimal one-to-one cluster/class matching.");

  m.def(
      "greedy_accuracy",
      [](const IntArray& assignments, const IntArray& labels, int k) {
        const LabelSet label_set = make_labels(labels, 0);
        const ClusterResult result = result_from_assignments(assignments, k);
        return cluster_accuracy_dict(greedy_accuracy(result, label_set));
      },
      py::arg("assignments"), py::arg("labels"), py::arg("k") = 0,
      "Clustering accuracy under the greedy majority-class mapping.");

  m.def(
      "prediction_agreement",
      [](const std::vector<IntArray>& predictions) {
        std::vector<PredictionSet> predsets;
        for (std::size_t s = 0; s < predictions.size(); ++s) {
          PredictionSet predset;
          predset.model_tag = "m" + std::to_string(s);
          predset.predictions = to_labels(predictions[s]);
          predset.sample_ids = default_ids(predset.predictions.size());
          predsets.push_back(std::move(predset));
        }
        return from_matrix(agreement_pairwise(predsets).matrix);
      },
      py::arg("predictions"),
      "Pairwise identical-prediction fractions over a list of prediction vectors.");

  py::class_<ProbeModel>(m, "LinearProbe")
      .def_property_readonly("weights", [](const ProbeModel& model) { return from_matrix(model.weights); })
      .def_property_readonly("bias", [](const ProbeModel& model) { return from_vector(model.bias); })
      .def_property_readonly("loss_history",
                             [](const ProbeModel& model) { return model.loss_history; })
      .def(
          "predict",
          [](const ProbeModel& model, const DoubleArray& x) {
            const ProbeEval eval = evaluate_probe(model, make_set(x, "eval"));
            return from_int_vector(eval.predictions.predictions);
          },
          py::arg("x"))
      .def(
          "accuracy",
          [](const ProbeModel& model, const DoubleArray& x, const IntArray& y) {
            const LabelSet labels = make_labels(y, static_cast<int>(model.weights.rows()));
            return *evaluate_probe(model, make_set(x, "eval"), labels).accuracy;
          },
          py::arg("x"), py::arg("y"));

  m.def(
      "train_probe",
      [](const DoubleArray& x, const IntArray& y, int epochs, int batch_size, double lr,
         double momentum, double weight_decay, bool standardize, double holdout, uint64_t seed) {
        ProbeConfig config;
        config.epochs = epochs;
        config.batch_size = batch_size;
        config.learning_rate = lr;
        config.momentum = momentum;
        config.weight_decay = weight_decay;
        config.standardize = standardize;
        config.holdout_fraction = holdout;
        config.seed = seed;
        return train_probe(make_set(x, "train"), make_labels(y, 0), config);
      },
      py::arg("x"), py::arg("y"), py::arg("epochs") = 40, py::arg("batch_size") = 256,
      py::arg("lr") = 0.01, py::arg("momentum") = 0.9, py::arg("weight_decay") = 1e-4,
      py::arg("standardize") = true, py::arg("holdout") = 0.0, py::arg("seed") = 0,
      "Train a linear probe (softmax regression by SGD) on frozen embeddings.");
}
