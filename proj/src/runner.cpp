#include "repmetric/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_map>

#include "repmetric/cka.hpp"
#include "repmetric/clustering.hpp"
#include "repmetric/error.hpp"
#include "repmetric/geometry.hpp"
#include "repmetric/json_out.hpp"
#include "repmetric/neighbors.hpp"
#include "repmetric/parallel.hpp"
#include "repmetric/probe.hpp"
#include "repmetric/store.hpp"

namespace fs = std::filesystem;

namespace repmetric {

namespace {

const std::set<std::string> kAnalysisTypes = {"geometry", "cka",    "invariance", "graph",
                                              "knn",      "kmeans", "probe",      "overlap"};

std::string param_or(const std::map<std::string, std::string>& params, const std::string& key,
                     const std::string& fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

bool has_param(const std::map<std::string, std::string>& params, const std::string& key) {
  return params.find(key) != params.end();
}

double param_double(const std::map<std::string, std::string>& params, const std::string& key,
                    double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw Error(errc::config_invalid, "parameter \"" + key + "\" is not a number: " + it->second);
  }
}

long long param_int(const std::map<std::string, std::string>& params, const std::string& key,
                    long long fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw Error(errc::config_invalid, "parameter \"" + key + "\" is not an integer: " + it->second);
  }
}

bool param_bool(const std::map<std::string, std::string>& params, const std::string& key,
                bool fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error(errc::config_invalid, "parameter \"" + key + "\" is not a boolean: " + it->second);
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

// Inputs are loaded once up front; analyses referencing a failed input
// fail individually instead of aborting the run.
struct LoadedInput {
  std::optional<EmbeddingSet> set;
  std::string error;
  std::optional<LabelSet> labels;
  std::string labels_error;
};

std::string input_key(const std::string& tag, const std::string& split) {
  return tag + "\x1f" + split;
}

class RunContext {
 public:
  RunContext(const RunConfig& config) : config_(config) {
    for (const auto& input : config.embeddings) {
      LoadedInput loaded;
      try {
        LoadOptions options;
        options.ids_path = input.ids_path;
        loaded.set = load_embeddings(input.path, input.format, input.tag, options);
      } catch (const std::exception& e) {
        loaded.error = e.what();
      }
      if (loaded.set) {
        try {
          if (input.labels_path) {
            loaded.labels = load_labels(*input.labels_path, config.num_classes.value_or(0))
                                .restricted_to(loaded.set->sample_ids);
          } else if (config.labels_path) {
            loaded.labels = load_labels(*config.labels_path, config.num_classes.value_or(0))
                                .restricted_to(loaded.set->sample_ids);
          }
        } catch (const std::exception& e) {
          loaded.labels_error = e.what();
        }
      }
      inputs_.emplace(input_key(input.tag, input.split), std::move(loaded));
    }
  }

  const EmbeddingSet& set(const std::string& tag, const std::string& split) const {
    auto it = inputs_.find(input_key(tag, split));
    if (it == inputs_.end()) {
      throw Error(errc::config_invalid, "no input with tag \"" + tag + "\" and split \"" + split + "\"");
    }
    if (!it->second.set) {
      throw Error(errc::io_error, "input \"" + tag + "/" + split + "\" failed to load: " +
                                      it->second.error);
    }
    return *it->second.set;
  }

  const LabelSet& labels(const std::string& tag, const std::string& split) const {
    auto it = inputs_.find(input_key(tag, split));
    if (it == inputs_.end() || !it->second.set) {
      throw Error(errc::config_invalid, "no loaded input \"" + tag + "/" + split + "\"");
    }
    if (!it->second.labels) {
      throw Error(errc::label_mismatch,
                  "no labels available for \"" + tag + "/" + split + "\"" +
                      (it->second.labels_error.empty() ? "" : ": " + it->second.labels_error));
    }
    return *it->second.labels;
  }

  bool has_labels(const std::string& tag, const std::string& split) const {
    auto it = inputs_.find(input_key(tag, split));
    return it != inputs_.end() && it->second.labels.has_value();
  }

  bool has_input(const std::string& tag, const std::string& split) const {
    return inputs_.count(input_key(tag, split)) > 0;
  }

  // Tags for an analysis: its explicit list, else every tag with the split.
  std::vector<std::string> tags_with_split(const AnalysisSpec& spec, const std::string& split) const {
    std::vector<std::string> tags;
    if (!spec.tags.empty()) {
      for (const auto& tag : spec.tags) {
        if (!has_input(tag, split)) {
          throw Error(errc::config_invalid,
                      "analysis \"" + spec.name + "\" references missing input \"" + tag + "/" +
                          split + "\"");
        }
        tags.push_back(tag);
      }
      return tags;
    }
    for (const auto& input : config_.embeddings) {
      if (input.split == split) tags.push_back(input.tag);
    }
    return tags;
  }

  const RunConfig& config() const { return config_; }

 private:
  const RunConfig& config_;
  std::unordered_map<std::string, LoadedInput> inputs_;
};

ordered_json geometry_json(const GeometryScore& score) {
  ordered_json out;
  if (score.uniformity) out["uniformity"] = *score.uniformity;
  if (score.tolerance) out["tolerance"] = *score.tolerance;
  out["t"] = score.t;
  out["n_pairs_evaluated"] = score.n_pairs_evaluated;
  out["exact"] = score.exact;
  return out;
}

ordered_json knn_json(const KnnEvalResult& result) {
  ordered_json out;
  out["k"] = result.k;
  out["accuracy"] = result.accuracy;
  out["voting"] = voting_name(result.voting);
  out["temperature"] = result.temperature;
  if (result.per_class_accuracy) out["per_class_accuracy"] = *result.per_class_accuracy;
  return out;
}

struct AnalysisIO {
  std::string out_dir;
  uint64_t seed = 0;
  std::vector<std::string> outputs;

  std::string path(const std::string& stem, const std::string& extension) {
    std::string full = (fs::path(out_dir) / (stem + extension)).string();
    outputs.push_back(full);
    return full;
  }
};

void write_report_files(const PairwiseReport& report, const std::string& stem, AnalysisIO& io) {
  write_text_file(io.path(stem, ".json"), emit_json(report));
  write_text_file(io.path(stem, ".csv"), emit_csv(report));
}

void run_geometry(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  const auto tags = context.tags_with_split(spec, "test");
  if (tags.empty()) {
    throw Error(errc::config_invalid, "geometry analysis has no inputs");
  }
  UniformityOptions uniformity_options;
  uniformity_options.t = param_double(spec.params, "t", 2.0);
  uniformity_options.seed = static_cast<uint64_t>(param_int(spec.params, "seed",
                                                            static_cast<long long>(io.seed)));
  if (has_param(spec.params, "pair_budget")) {
    uniformity_options.pair_budget = param_int(spec.params, "pair_budget", 0);
  }
  uniformity_options.exact_threshold =
      param_int(spec.params, "exact_threshold", uniformity_options.exact_threshold);
  uniformity_options.include_self_pairs = param_bool(spec.params, "include_self_pairs", false);
  ToleranceOptions tolerance_options;
  tolerance_options.unconditional = param_bool(spec.params, "unconditional", false);
  tolerance_options.include_self_pairs = uniformity_options.include_self_pairs;

  ordered_json doc;
  doc["analysis"] = "geometry";
  doc["name"] = spec.name;
  doc["t"] = uniformity_options.t;
  doc["results"] = ordered_json::array();
  for (const auto& tag : tags) {
    const EmbeddingSet normalized = l2_normalize(context.set(tag, "test"));
    GeometryScore score = uniformity(normalized, uniformity_options);
    if (context.has_labels(tag, "test")) {
      score.tolerance = tolerance(normalized, context.labels(tag, "test"), tolerance_options).tolerance;
    }
    ordered_json entry = geometry_json(score);
    ordered_json row;
    row["tag"] = tag;
    for (auto& [key, value] : entry.items()) row[key] = value;
    doc["results"].push_back(std::move(row));
  }
  doc["created_at"] = utc_timestamp();
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
}

void run_cka(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  const auto tags = context.tags_with_split(spec, "test");
  std::vector<EmbeddingSet> sets;
  for (const auto& tag : tags) sets.push_back(context.set(tag, "test"));
  std::optional<SubsampleSpec> subsample;
  if (has_param(spec.params, "subsample")) {
    subsample = SubsampleSpec{static_cast<std::size_t>(param_int(spec.params, "subsample", 10000)),
                              static_cast<uint64_t>(param_int(spec.params, "seed",
                                                              static_cast<long long>(io.seed)))};
  }
  PairwiseReport report = cka_pairwise(sets, subsample);
  write_report_files(report, spec.name, io);
}

void run_invariance(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (!has_param(spec.params, "clean") || !has_param(spec.params, "augmented")) {
    throw Error(errc::config_invalid, "invariance analysis needs \"clean\" and \"augmented\" tags");
  }
  const std::string clean_tag = spec.params.at("clean");
  const std::string augmented_tag = spec.params.at("augmented");
  const CkaScore score =
      augmentation_invariance(context.set(clean_tag, "test"), context.set(augmented_tag, "test"));

  ordered_json doc;
  doc["analysis"] = "invariance";
  doc["name"] = spec.name;
  doc["clean"] = clean_tag;
  doc["augmented"] = augmented_tag;
  doc["value"] = score.value;
  doc["n"] = score.n;
  doc["d_x"] = score.d_x;
  doc["d_y"] = score.d_y;
  doc["created_at"] = utc_timestamp();
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
}

void run_graph(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (!has_param(spec.params, "k")) {
    throw Error(errc::config_invalid, "graph analysis needs an explicit \"k\"");
  }
  const int k = static_cast<int>(param_int(spec.params, "k", 0));
  const SimilarityMetric metric = parse_metric(param_or(spec.params, "metric", "cosine"));
  const auto tags = context.tags_with_split(spec, "test");
  std::vector<EmbeddingSet> sets;
  for (const auto& tag : tags) sets.push_back(context.set(tag, "test"));
  AlignResult aligned = align(sets);

  std::vector<NeighborGraph> graphs;
  graphs.reserve(aligned.sets.size());
  for (const auto& set : aligned.sets) graphs.push_back(build_graph(set, k, metric));
  if (param_bool(spec.params, "dump_graphs", false)) {
    for (const auto& graph : graphs) {
      save_graph_csv(graph, io.path(spec.name + "_graph_" + graph.model_tag, ".csv"));
    }
  }
  PairwiseReport report = overlap_pairwise(graphs);
  write_report_files(report, spec.name, io);
}

void run_knn(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (!has_param(spec.params, "tag")) {
    throw Error(errc::config_invalid, "knn analysis needs \"tag\"");
  }
  const std::string tag = spec.params.at("tag");
  const EmbeddingSet& train = context.set(tag, "train");
  const EmbeddingSet& test = context.set(tag, "test");
  const LabelSet& train_labels = context.labels(tag, "train");
  const LabelSet& test_labels = context.labels(tag, "test");

  KnnOptions options;
  options.voting = parse_voting(param_or(spec.params, "voting", "temperature_weighted"));
  options.temperature = param_double(spec.params, "temperature", 0.07);
  options.per_class_accuracy = param_bool(spec.params, "per_class", false);

  ordered_json doc;
  doc["analysis"] = "knn";
  doc["name"] = spec.name;
  doc["tag"] = tag;
  if (has_param(spec.params, "ks")) {
    std::vector<int> ks;
    std::string text = spec.params.at("ks");
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    for (int value; in >> value;) ks.push_back(value);
    const KnnSweepResult sweep = knn_sweep(train, train_labels, test, test_labels, ks, options);
    doc["best"] = knn_json(sweep.best);
    doc["table"] = ordered_json::array();
    for (const auto& row : sweep.table) doc["table"].push_back(knn_json(row));
  } else {
    const int k = static_cast<int>(param_int(spec.params, "k", 200));
    doc["result"] = knn_json(knn_classify(train, train_labels, test, test_labels, k, options));
  }
  doc["created_at"] = utc_timestamp();
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
}

void run_kmeans(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (!has_param(spec.params, "tag") || !has_param(spec.params, "k")) {
    throw Error(errc::config_invalid, "kmeans analysis needs \"tag\" and \"k\"");
  }
  const std::string tag = spec.params.at("tag");
  const int k = static_cast<int>(param_int(spec.params, "k", 0));
  const EmbeddingSet& set = context.set(tag, "test");

  KmeansOptions options;
  options.n_init = static_cast<int>(param_int(spec.params, "n_init", 10));
  options.mode = parse_kmeans_mode(param_or(spec.params, "mode", "auto"));
  options.batch = param_int(spec.params, "batch", 16384);
  options.seed = static_cast<uint64_t>(param_int(spec.params, "seed",
                                                 static_cast<long long>(io.seed)));
  const ClusterResult result = kmeans(set, k, options);

  ordered_json doc;
  doc["analysis"] = "kmeans";
  doc["name"] = spec.name;
  doc["tag"] = tag;
  doc["k"] = result.k;
  doc["mode"] = kmeans_mode_name(result.mode_used);
  doc["n_init"] = result.n_init_runs;
  doc["best_run_index"] = result.best_run_index;
  doc["seed"] = result.seed;
  doc["inertia"] = result.inertia;
  doc["run_inertias"] = result.run_inertias;

  if (context.has_labels(tag, "test")) {
    const LabelSet& labels = context.labels(tag, "test");
    if (result.k == labels.num_classes) {
      const ClusterAccuracy hungarian = hungarian_accuracy(result, labels);
      doc["hungarian_accuracy"] = hungarian.accuracy;
      save_contingency_csv(hungarian.contingency, io.path(spec.name + "_contingency", ".csv"));
    }
    const ClusterAccuracy greedy = greedy_accuracy(result, labels);
    doc["greedy_accuracy"] = greedy.accuracy;
  }
  doc["created_at"] = utc_timestamp();
  save_assignments_csv(result, io.path(spec.name + "_assignments", ".csv"));
  save_npy(io.path(spec.name + "_centroids", ".npy"), result.centroids);
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
}

ProbeConfig probe_config_from(const AnalysisSpec& spec, uint64_t default_seed) {
  ProbeConfig config;
  config.epochs = static_cast<int>(param_int(spec.params, "epochs", config.epochs));
  config.batch_size = static_cast<int>(param_int(spec.params, "batch", config.batch_size));
  config.learning_rate = param_double(spec.params, "lr", config.learning_rate);
  config.momentum = param_double(spec.params, "momentum", config.momentum);
  config.weight_decay = param_double(spec.params, "weight_decay", config.weight_decay);
  config.standardize = param_bool(spec.params, "standardize", config.standardize);
  config.holdout_fraction = param_double(spec.params, "holdout", config.holdout_fraction);
  config.seed = static_cast<uint64_t>(param_int(spec.params, "seed",
                                                static_cast<long long>(default_seed)));
  return config;
}

void run_probe(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (!has_param(spec.params, "tag")) {
    throw Error(errc::config_invalid, "probe analysis needs \"tag\"");
  }
  const std::string tag = spec.params.at("tag");
  const EmbeddingSet& train = context.set(tag, "train");
  const EmbeddingSet& test = context.set(tag, "test");
  const LabelSet& train_labels = context.labels(tag, "train");

  const ProbeConfig config = probe_config_from(spec, io.seed);
  const ProbeModel model = train_probe(train, train_labels, config);
  const ProbeEval train_eval = evaluate_probe(model, train, train_labels);
  std::optional<LabelSet> test_labels;
  if (context.has_labels(tag, "test")) test_labels = context.labels(tag, "test");
  const ProbeEval test_eval = evaluate_probe(model, test, test_labels);

  ordered_json doc;
  doc["analysis"] = "probe";
  doc["name"] = spec.name;
  doc["tag"] = tag;
  doc["epochs"] = config.epochs;
  doc["final_train_loss"] = model.loss_history.back();
  doc["train_accuracy"] = *train_eval.accuracy;
  if (test_eval.accuracy) doc["test_accuracy"] = *test_eval.accuracy;
  doc["created_at"] = utc_timestamp();

  save_probe(model, io.path(spec.name + "_model", ""));
  io.outputs.pop_back();  // save_probe writes two files under the prefix
  io.outputs.push_back((fs::path(io.out_dir) / (spec.name + "_model.json")).string());
  io.outputs.push_back((fs::path(io.out_dir) / (spec.name + "_model.weights")).string());
  save_predictions_csv(test_eval.predictions, io.path(spec.name + "_predictions", ".csv"));
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
}

void run_overlap(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  std::vector<PredictionSet> predsets;
  std::optional<LabelSet> labels;

  if (has_param(spec.params, "predictions")) {
    // Comma-separated prediction CSVs named tag=path.
    std::istringstream in(spec.params.at("predictions"));
    std::string entry;
    while (std::getline(in, entry, ',')) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) {
        throw Error(errc::config_invalid, "predictions entries must be tag=path");
      }
      predsets.push_back(load_predictions_csv(entry.substr(eq + 1), entry.substr(0, eq)));
    }
    if (predsets.empty()) {
      throw Error(errc::config_invalid, "no prediction files given");
    }
    if (!context.config().labels_path) {
      throw Error(errc::config_invalid, "overlap over prediction files needs global labels");
    }
    labels = load_labels(*context.config().labels_path, context.config().num_classes.value_or(0))
                 .restricted_to(predsets[0].sample_ids);
  } else {
    // Train one probe per tag on its train split, predict on its test split.
    std::vector<std::string> tags = context.tags_with_split(spec, "train");
    if (tags.size() < 2) {
      throw Error(errc::config_invalid, "overlap analysis needs at least 2 tags with train splits");
    }
    const ProbeConfig base_config = probe_config_from(spec, io.seed);
    for (std::size_t t = 0; t < tags.size(); ++t) {
      ProbeConfig config = base_config;
      config.seed = base_config.seed + t;
      const ProbeModel model = train_probe(context.set(tags[t], "train"),
                                           context.labels(tags[t], "train"), config);
      ProbeEval eval = evaluate_probe(model, context.set(tags[t], "test"));
      predsets.push_back(std::move(eval.predictions));
    }
    labels = context.labels(tags[0], "test");
  }

  std::optional<std::string> reference;
  if (has_param(spec.params, "reference")) reference = spec.params.at("reference");
  const OverlapPartition partition = overlap_partition(predsets, *labels, reference);
  const PairwiseReport agreement = agreement_pairwise(predsets);

  ordered_json doc;
  doc["analysis"] = "overlap";
  doc["name"] = spec.name;
  doc["tags"] = partition.tags;
  doc["n"] = partition.n;
  doc["all_correct"] = partition.all_correct;
  doc["none_correct"] = partition.none_correct;
  doc["agreement"] = partition.agreement;
  doc["unique_correct"] = ordered_json::object();
  for (const auto& [tag, fraction] : partition.unique_correct) {
    doc["unique_correct"][tag] = fraction;
  }
  if (partition.reference) {
    doc["reference"] = {{"tag", partition.reference->reference_tag},
                        {"both", partition.reference->both},
                        {"reference_only", partition.reference->reference_only},
                        {"others_only", partition.reference->others_only},
                        {"neither", partition.reference->neither}};
  }
  doc["pattern_counts"] = ordered_json::array();
  for (const auto& cell : partition.pattern_counts) {
    doc["pattern_counts"].push_back({{"pattern", cell.pattern}, {"count", cell.count}});
  }
  doc["created_at"] = utc_timestamp();
  write_text_file(io.path(spec.name, ".json"), dump_json(doc));
  write_text_file(io.path(spec.name + "_agreement", ".json"), emit_json(agreement));
  write_text_file(io.path(spec.name + "_agreement", ".csv"), emit_csv(agreement));
}

void dispatch(const RunContext& context, const AnalysisSpec& spec, AnalysisIO& io) {
  if (spec.type == "geometry") return run_geometry(context, spec, io);
  if (spec.type == "cka") return run_cka(context, spec, io);
  if (spec.type == "invariance") return run_invariance(context, spec, io);
  if (spec.type == "graph") return run_graph(context, spec, io);
  if (spec.type == "knn") return run_knn(context, spec, io);
  if (spec.type == "kmeans") return run_kmeans(context, spec, io);
  if (spec.type == "probe") return run_probe(context, spec, io);
  if (spec.type == "overlap") return run_overlap(context, spec, io);
  throw Error(errc::config_invalid, "unknown analysis type \"" + spec.type + "\"");
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::config_invalid, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(errc::config_invalid, "config root must be a JSON object");
  }

  RunConfig config;
  try {
    config.seed = doc.value("seed", uint64_t{0});
    config.out_dir = resolve(base_dir, doc.value("out_dir", std::string("reports")));
    config.format = parse_report_format(doc.value("format", std::string("json")));
    if (doc.contains("labels")) {
      if (doc["labels"].is_string()) {
        config.labels_path = resolve(base_dir, doc["labels"].get<std::string>());
      } else if (doc["labels"].is_object()) {
        config.labels_path = resolve(base_dir, doc["labels"].at("path").get<std::string>());
        if (doc["labels"].contains("num_classes")) {
          config.num_classes = doc["labels"]["num_classes"].get<int>();
        }
      } else {
        throw Error(errc::config_invalid, "\"labels\" must be a path or an object");
      }
    }
    if (doc.contains("num_classes")) config.num_classes = doc["num_classes"].get<int>();

    if (!doc.contains("embeddings") || !doc["embeddings"].is_array() || doc["embeddings"].empty()) {
      throw Error(errc::config_invalid, "config needs a non-empty \"embeddings\" array");
    }
    for (const auto& entry : doc["embeddings"]) {
      EmbeddingInput input;
      input.tag = entry.at("tag").get<std::string>();
      input.path = resolve(base_dir, entry.at("path").get<std::string>());
      input.format = parse_format(entry.value("format", std::string("npy")));
      if (entry.contains("ids")) input.ids_path = resolve(base_dir, entry["ids"].get<std::string>());
      if (entry.contains("labels")) {
        input.labels_path = resolve(base_dir, entry["labels"].get<std::string>());
      }
      input.split = entry.value("split", std::string("test"));
      if (input.split != "train" && input.split != "test") {
        throw Error(errc::config_invalid, "split must be \"train\" or \"test\", got \"" +
                                              input.split + "\"");
      }
      config.embeddings.push_back(std::move(input));
    }

    if (doc.contains("analyses")) {
      if (!doc["analyses"].is_array()) {
        throw Error(errc::config_invalid, "\"analyses\" must be an array");
      }
      for (const auto& entry : doc["analyses"]) {
        AnalysisSpec spec;
        spec.type = entry.at("type").get<std::string>();
        spec.name = entry.value("name", spec.type);
        for (const auto& [key, value] : entry.items()) {
          if (key == "type" || key == "name" || key == "tags") continue;
          if (value.is_string()) {
            spec.params[key] = value.get<std::string>();
          } else if (value.is_boolean()) {
            spec.params[key] = value.get<bool>() ? "true" : "false";
          } else if (value.is_number_integer() || value.is_number_unsigned()) {
            spec.params[key] = std::to_string(value.get<long long>());
          } else if (value.is_number_float()) {
            spec.params[key] = format_double(value.get<double>());
          } else {
            throw Error(errc::config_invalid, "analysis parameter \"" + key +
                                                  "\" must be a scalar");
          }
        }
        if (entry.contains("tags")) {
          spec.tags = entry["tags"].get<std::vector<std::string>>();
        }
        config.analyses.push_back(std::move(spec));
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::config_invalid, std::string("config field error: ") + e.what());
  }

  // Unique (tag, split) pairs and unique analysis names.
  std::set<std::string> keys;
  for (const auto& input : config.embeddings) {
    if (!keys.insert(input_key(input.tag, input.split)).second) {
      throw Error(errc::config_invalid,
                  "duplicate input tag/split \"" + input.tag + "/" + input.split + "\"");
    }
  }
  std::set<std::string> names;
  for (auto& spec : config.analyses) {
    std::string name = spec.name;
    int suffix = 2;
    while (!names.insert(name).second) {
      name = spec.name + "_" + std::to_string(suffix++);
    }
    spec.name = name;
  }

  // Every referenced path must exist before any computation starts.
  auto check_path = [](const std::string& path) {
    if (!fs::exists(path)) {
      throw Error(errc::config_invalid, "referenced file does not exist: \"" + path + "\"");
    }
  };
  for (const auto& input : config.embeddings) {
    check_path(input.path);
    if (input.format == FileFormat::rawf32) check_path(input.path + ".json");
    if (input.ids_path) check_path(*input.ids_path);
    if (input.labels_path) check_path(*input.labels_path);
  }
  if (config.labels_path) check_path(*config.labels_path);
  for (auto& spec : config.analyses) {
    if (!kAnalysisTypes.count(spec.type)) {
      throw Error(errc::config_invalid, "unknown analysis type \"" + spec.type + "\"");
    }
    // Prediction CSVs referenced by overlap analyses resolve and validate
    // here like every other input path.
    auto it = spec.params.find("predictions");
    if (it != spec.params.end()) {
      std::istringstream in(it->second);
      std::string entry;
      std::string resolved_list;
      while (std::getline(in, entry, ',')) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
          throw Error(errc::config_invalid, "predictions entries must be tag=path");
        }
        const std::string path = resolve(base_dir, entry.substr(eq + 1));
        check_path(path);
        if (!resolved_list.empty()) resolved_list += ',';
        resolved_list += entry.substr(0, eq) + "=" + path;
      }
      it->second = resolved_list;
    }
  }
  return config;
}

RunConfig RunConfig::from_file(const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(errc::config_invalid, "config file does not exist: \"" + path + "\"");
  }
  return from_json_text(read_text_file(path), fs::path(path).parent_path().string());
}

RunSummary run(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(errc::io_error, "cannot create output directory \"" + config.out_dir + "\"");
  }

  RunContext context(config);

  RunSummary summary;
  summary.analyses.resize(config.analyses.size());
  parallel_for(config.analyses.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const AnalysisSpec& spec = config.analyses[i];
      AnalysisOutcome& outcome = summary.analyses[i];
      outcome.name = spec.name;
      AnalysisIO io;
      io.out_dir = config.out_dir;
      io.seed = config.seed;
      try {
        dispatch(context, spec, io);
        outcome.ok = true;
        outcome.outputs = std::move(io.outputs);
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
      }
    }
  });

  int failed = 0;
  ordered_json doc;
  doc["seed"] = config.seed;
  doc["analyses"] = ordered_json::array();
  for (const auto& outcome : summary.analyses) {
    ordered_json entry;
    entry["name"] = outcome.name;
    entry["status"] = outcome.ok ? "ok" : "failed";
    if (!outcome.ok) {
      entry["error"] = outcome.error;
      ++failed;
    }
    ordered_json outputs = ordered_json::array();
    for (const auto& output : outcome.outputs) {
      outputs.push_back(fs::path(output).filename().string());
    }
    entry["outputs"] = std::move(outputs);
    doc["analyses"].push_back(std::move(entry));
  }
  doc["n_failed"] = failed;
  doc["created_at"] = utc_timestamp();
  write_text_file((fs::path(config.out_dir) / "summary.json").string(), dump_json(doc));

  summary.exit_code = failed > 0 ? 2 : 0;
  return summary;
}

}  // namespace repmetric
