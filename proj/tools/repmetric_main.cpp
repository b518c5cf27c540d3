// repmetric CLI: one verb per metric plus a config-driven batch runner.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repmetric/error.hpp"
#include "repmetric/io.hpp"
#include "repmetric/json_out.hpp"
#include "repmetric/runner.hpp"
#include "repmetric/store.hpp"

namespace fs = std::filesystem;
using namespace repmetric;

namespace {

constexpr const char* kVersion = "repmetric 0.1.0";

FileFormat infer_format(const std::string& path, const std::string& override_name) {
  if (!override_name.empty()) return parse_format(override_name);
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".npy") return FileFormat::npy;
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".rawf32" || ext == ".bin" || ext == ".raw") return FileFormat::rawf32;
  throw Error(errc::config_invalid,
              "cannot infer format of \"" + path + "\"; pass --input-format");
}

std::string stem_tag(const std::string& path) { return fs::path(path).stem().string(); }

// Shared state assembled by the subcommand callbacks, executed once.
struct CliState {
  uint64_t seed = 0;
  std::string out_dir = "reports";
  std::string report_format = "json";
  RunConfig config;
  std::vector<std::string> show;  // report stems to print on success
  bool configured = false;
};

void add_inputs(CliState& state, const std::vector<std::string>& paths,
                const std::vector<std::string>& tags, const std::string& format_override,
                const std::string& labels, const std::string& split = "test") {
  if (!tags.empty() && tags.size() != paths.size()) {
    throw Error(errc::config_invalid, "--tags must match --inputs in length");
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    EmbeddingInput input;
    input.path = paths[i];
    input.format = infer_format(paths[i], format_override);
    input.tag = tags.empty() ? stem_tag(paths[i]) : tags[i];
    if (!labels.empty()) input.labels_path = labels;
    input.split = split;
    state.config.embeddings.push_back(std::move(input));
  }
}

int execute(CliState& state) {
  state.config.seed = state.seed;
  state.config.out_dir = state.out_dir;
  state.config.format = parse_report_format(state.report_format);

  const RunSummary summary = run(state.config);
  for (const auto& outcome : summary.analyses) {
    if (outcome.ok) {
      std::cout << "[ok] " << outcome.name;
      for (const auto& output : outcome.outputs) std::cout << ' ' << output;
      std::cout << '\n';
    } else {
      std::cerr << "[failed] " << outcome.name << ": " << outcome.error << '\n';
    }
  }
  if (summary.exit_code == 0) {
    for (const auto& stem : state.show) {
      const fs::path path = fs::path(state.out_dir) / (stem + ".json");
      if (fs::exists(path)) std::cout << read_text_file(path.string());
    }
  }
  return summary.exit_code;
}

int run_ingest(const std::string& input, const std::string& format_override,
               const std::string& ids, const std::string& tag, bool csv_header, bool normalize,
               const std::string& out_file, const std::string& to_format, bool f32) {
  LoadOptions options;
  if (!ids.empty()) options.ids_path = ids;
  options.csv_header = csv_header;
  const FileFormat format = infer_format(input, format_override);
  EmbeddingSet set = load_embeddings(input, format, tag.empty() ? stem_tag(input) : tag, options);
  if (normalize) set = l2_normalize(set);

  double min_norm = set.matrix.row(0).norm();
  double max_norm = min_norm;
  for (Eigen::Index i = 1; i < set.matrix.rows(); ++i) {
    const double norm = set.matrix.row(i).norm();
    min_norm = std::min(min_norm, norm);
    max_norm = std::max(max_norm, norm);
  }

  ordered_json doc;
  doc["tag"] = set.model_tag;
  doc["path"] = input;
  doc["format"] = format_name(format);
  doc["n"] = set.matrix.rows();
  doc["d"] = set.matrix.cols();
  doc["normalized"] = set.normalized;
  doc["min_row_norm"] = min_norm;
  doc["max_row_norm"] = max_norm;
  std::cout << dump_json(doc);

  if (!out_file.empty()) {
    SaveOptions save_options;
    save_options.npy_f32 = f32;
    const FileFormat out_fmt =
        to_format.empty() ? infer_format(out_file, "") : parse_format(to_format);
    save_embeddings(set, out_file, out_fmt, save_options);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repmetric: metrics for comparing learned image representations"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CliState state;
  app.add_option("--seed", state.seed, "global seed for subsampling and solvers");
  app.add_option("--out", state.out_dir, "output directory for reports")
      ->capture_default_str();
  app.add_option("--format", state.report_format, "report format: json or csv")
      ->capture_default_str();

  // ---- ingest ----------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "validate, convert, or normalize an embedding file");
  struct {
    std::string input, input_format, ids, tag, out_file, to_format;
    bool header = false, normalize = false, f32 = false;
  } ing;
  ingest->add_option("--input", ing.input, "embedding file")->required();
  ingest->add_option("--input-format", ing.input_format, "npy, csv, or rawf32");
  ingest->add_option("--ids", ing.ids, "newline-delimited sample id file");
  ingest->add_option("--tag", ing.tag, "model tag (defaults to the file stem)");
  ingest->add_flag("--header", ing.header, "first CSV line is a header");
  ingest->add_flag("--normalize", ing.normalize, "L2-normalize rows before saving");
  ingest->add_option("--out-file", ing.out_file, "write the (converted) matrix here");
  ingest->add_option("--to-format", ing.to_format, "output format (inferred from extension)");
  ingest->add_flag("--f32", ing.f32, "write NPY as <f4 instead of <f8");

  // ---- shared per-metric option structs ---------------------------------
  struct {
    std::vector<std::string> inputs, tags;
    std::string input_format, labels;
    double t = 2.0;
    long long pair_budget = -1;
    long long exact_threshold = 5000;
    bool include_self_pairs = false, unconditional = false;
  } geo;
  auto* geometry = app.add_subcommand("geometry", "uniformity and tolerance on the hypersphere");
  geometry->add_option("--inputs", geo.inputs, "embedding files")->required();
  geometry->add_option("--tags", geo.tags, "model tags (default: file stems)");
  geometry->add_option("--input-format", geo.input_format, "npy, csv, or rawf32");
  geometry->add_option("--labels", geo.labels, "labels file (enables tolerance)");
  geometry->add_option("--t", geo.t, "uniformity scale")->capture_default_str();
  geometry->add_option("--pair-budget", geo.pair_budget, "Monte-Carlo pair budget");
  geometry->add_option("--exact-threshold", geo.exact_threshold,
                       "max N for exact enumeration")->capture_default_str();
  geometry->add_flag("--include-self-pairs", geo.include_self_pairs,
                     "use the literal iid expectation (includes x == y)");
  geometry->add_flag("--unconditional", geo.unconditional,
                     "average the labeled indicator over all pairs");

  struct {
    std::vector<std::string> inputs, tags;
    std::string input_format;
    long long subsample = -1;
  } cka_opts;
  auto* cka_cmd = app.add_subcommand("cka", "pairwise linear CKA between models");
  cka_cmd->add_option("--inputs", cka_opts.inputs, "two or more embedding files")->required();
  cka_cmd->add_option("--tags", cka_opts.tags, "model tags");
  cka_cmd->add_option("--input-format", cka_opts.input_format, "npy, csv, or rawf32");
  cka_cmd->add_option("--subsample", cka_opts.subsample, "shared subsample size");

  struct {
    std::string clean, augmented, input_format;
  } inv;
  auto* invariance = app.add_subcommand("invariance", "augmentation invariance via CKA");
  invariance->add_option("--clean", inv.clean, "clean embedding file")->required();
  invariance->add_option("--augmented", inv.augmented, "augmented embedding file")->required();
  invariance->add_option("--input-format", inv.input_format, "npy, csv, or rawf32");

  struct {
    std::vector<std::string> inputs, tags;
    std::string input_format, metric = "cosine";
    int k = 0;
    bool dump = false;
  } gr;
  auto* graph = app.add_subcommand("graph", "nearest-neighbor graph overlap between models");
  graph->add_option("--inputs", gr.inputs, "two or more embedding files")->required();
  graph->add_option("--tags", gr.tags, "model tags");
  graph->add_option("--input-format", gr.input_format, "npy, csv, or rawf32");
  graph->add_option("--k", gr.k, "neighbors per node")->required();
  graph->add_option("--metric", gr.metric, "cosine or euclidean")->capture_default_str();
  graph->add_flag("--dump-graphs", gr.dump, "also write per-model edge CSVs");

  struct {
    std::string train, train_labels, test, test_labels, input_format;
    std::string voting = "temperature_weighted", ks;
    int k = 200;
    double temperature = 0.07;
    bool per_class = false;
  } knn;
  auto* knn_cmd = app.add_subcommand("knn", "k-NN classification benchmark");
  knn_cmd->add_option("--train", knn.train, "train embeddings")->required();
  knn_cmd->add_option("--train-labels", knn.train_labels, "train labels")->required();
  knn_cmd->add_option("--test", knn.test, "test embeddings")->required();
  knn_cmd->add_option("--test-labels", knn.test_labels, "test labels")->required();
  knn_cmd->add_option("--input-format", knn.input_format, "npy, csv, or rawf32");
  knn_cmd->add_option("--k", knn.k, "neighbor count")->capture_default_str();
  knn_cmd->add_option("--ks", knn.ks, "comma-separated sweep, e.g. 5,10,15");
  knn_cmd->add_option("--voting", knn.voting, "uniform or temperature_weighted")
      ->capture_default_str();
  knn_cmd->add_option("--temperature", knn.temperature, "softmax temperature")
      ->capture_default_str();
  knn_cmd->add_flag("--per-class", knn.per_class, "report per-class accuracy");

  struct {
    std::string input, labels, input_format, mode = "auto";
    int k = 0, n_init = 10;
    long long batch = 16384;
  } km;
  auto* kmeans_cmd = app.add_subcommand("kmeans", "k-means clustering benchmark");
  kmeans_cmd->add_option("--input", km.input, "embedding file")->required();
  kmeans_cmd->add_option("--labels", km.labels, "labels file (enables accuracies)");
  kmeans_cmd->add_option("--input-format", km.input_format, "npy, csv, or rawf32");
  kmeans_cmd->add_option("--k", km.k, "cluster count")->required();
  kmeans_cmd->add_option("--n-init", km.n_init, "independent k-means++ runs")
      ->capture_default_str();
  kmeans_cmd->add_option("--mode", km.mode, "auto, lloyd, or minibatch")->capture_default_str();
  kmeans_cmd->add_option("--batch", km.batch, "mini-batch size")->capture_default_str();

  struct {
    std::string train, train_labels, test, test_labels, input_format;
    int epochs = 40, batch = 256;
    double lr = 0.01, momentum = 0.9, weight_decay = 1e-4, holdout = 0.0;
    bool no_standardize = false;
  } pr;
  auto* probe = app.add_subcommand("probe", "linear probe on frozen embeddings");
  probe->add_option("--train", pr.train, "train embeddings")->required();
  probe->add_option("--train-labels", pr.train_labels, "train labels")->required();
  probe->add_option("--test", pr.test, "test embeddings")->required();
  probe->add_option("--test-labels", pr.test_labels, "test labels (enables accuracy)");
  probe->add_option("--input-format", pr.input_format, "npy, csv, or rawf32");
  probe->add_option("--epochs", pr.epochs)->capture_default_str();
  probe->add_option("--batch", pr.batch)->capture_default_str();
  probe->add_option("--lr", pr.lr, "base learning rate per 256 samples")->capture_default_str();
  probe->add_option("--momentum", pr.momentum)->capture_default_str();
  probe->add_option("--weight-decay", pr.weight_decay)->capture_default_str();
  probe->add_option("--holdout", pr.holdout, "held-out fraction for best-epoch selection")
      ->capture_default_str();
  probe->add_flag("--no-standardize", pr.no_standardize, "skip feature standardization");

  struct {
    std::vector<std::string> predictions;
    std::string labels, reference;
  } ov;
  auto* overlap = app.add_subcommand("overlap", "prediction overlap partition and agreement");
  overlap->add_option("--predictions", ov.predictions, "prediction CSVs as tag=path")->required();
  overlap->add_option("--labels", ov.labels, "labels file")->required();
  overlap->add_option("--reference", ov.reference, "reference tag for the 4-way partition");

  struct {
    std::string config;
  } rn;
  auto* run_cmd = app.add_subcommand("run", "execute a JSON config of analyses");
  run_cmd->add_option("--config", rn.config, "config JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      return run_ingest(ing.input, ing.input_format, ing.ids, ing.tag, ing.header, ing.normalize,
                        ing.out_file, ing.to_format, ing.f32);
    }

    if (run_cmd->parsed()) {
      state.config = RunConfig::from_file(rn.config);
      if (app.count("--seed")) state.config.seed = state.seed;
      if (app.count("--out")) state.config.out_dir = state.out_dir;
      if (app.count("--format")) state.config.format = parse_report_format(state.report_format);
      const RunSummary summary = repmetric::run(state.config);
      for (const auto& outcome : summary.analyses) {
        if (outcome.ok) {
          std::cout << "[ok] " << outcome.name << '\n';
        } else {
          std::cerr << "[failed] " << outcome.name << ": " << outcome.error << '\n';
        }
      }
      return summary.exit_code;
    }

    if (geometry->parsed()) {
      add_inputs(state, geo.inputs, geo.tags, geo.input_format, geo.labels);
      AnalysisSpec spec;
      spec.type = spec.name = "geometry";
      spec.params["t"] = format_double(geo.t);
      if (geo.pair_budget > 0) spec.params["pair_budget"] = std::to_string(geo.pair_budget);
      spec.params["exact_threshold"] = std::to_string(geo.exact_threshold);
      if (geo.include_self_pairs) spec.params["include_self_pairs"] = "true";
      if (geo.unconditional) spec.params["unconditional"] = "true";
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("geometry");
      return execute(state);
    }

    if (cka_cmd->parsed()) {
      add_inputs(state, cka_opts.inputs, cka_opts.tags, cka_opts.input_format, "");
      AnalysisSpec spec;
      spec.type = spec.name = "cka";
      if (cka_opts.subsample > 0) spec.params["subsample"] = std::to_string(cka_opts.subsample);
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("cka");
      return execute(state);
    }

    if (invariance->parsed()) {
      add_inputs(state, {inv.clean, inv.augmented}, {"clean", "augmented"}, inv.input_format, "");
      AnalysisSpec spec;
      spec.type = spec.name = "invariance";
      spec.params["clean"] = "clean";
      spec.params["augmented"] = "augmented";
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("invariance");
      return execute(state);
    }

    if (graph->parsed()) {
      add_inputs(state, gr.inputs, gr.tags, gr.input_format, "");
      AnalysisSpec spec;
      spec.type = spec.name = "graph";
      spec.params["k"] = std::to_string(gr.k);
      spec.params["metric"] = gr.metric;
      if (gr.dump) spec.params["dump_graphs"] = "true";
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("graph");
      return execute(state);
    }

    if (knn_cmd->parsed()) {
      add_inputs(state, {knn.train}, {"model"}, knn.input_format, knn.train_labels, "train");
      add_inputs(state, {knn.test}, {"model"}, knn.input_format, knn.test_labels, "test");
      AnalysisSpec spec;
      spec.type = spec.name = "knn";
      spec.params["tag"] = "model";
      if (!knn.ks.empty()) {
        spec.params["ks"] = knn.ks;
      } else {
        spec.params["k"] = std::to_string(knn.k);
      }
      spec.params["voting"] = knn.voting;
      spec.params["temperature"] = format_double(knn.temperature);
      if (knn.per_class) spec.params["per_class"] = "true";
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("knn");
      return execute(state);
    }

    if (kmeans_cmd->parsed()) {
      add_inputs(state, {km.input}, {}, km.input_format, km.labels);
      AnalysisSpec spec;
      spec.type = spec.name = "kmeans";
      spec.params["tag"] = state.config.embeddings[0].tag;
      spec.params["k"] = std::to_string(km.k);
      spec.params["n_init"] = std::to_string(km.n_init);
      spec.params["mode"] = km.mode;
      spec.params["batch"] = std::to_string(km.batch);
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("kmeans");
      return execute(state);
    }

    if (probe->parsed()) {
      add_inputs(state, {pr.train}, {"model"}, pr.input_format, pr.train_labels, "train");
      add_inputs(state, {pr.test}, {"model"}, pr.input_format, pr.test_labels, "test");
      AnalysisSpec spec;
      spec.type = spec.name = "probe";
      spec.params["tag"] = "model";
      spec.params["epochs"] = std::to_string(pr.epochs);
      spec.params["batch"] = std::to_string(pr.batch);
      spec.params["lr"] = format_double(pr.lr);
      spec.params["momentum"] = format_double(pr.momentum);
      spec.params["weight_decay"] = format_double(pr.weight_decay);
      spec.params["holdout"] = format_double(pr.holdout);
      if (pr.no_standardize) spec.params["standardize"] = "false";
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("probe");
      return execute(state);
    }

    if (overlap->parsed()) {
      // No embedding inputs: the predictions come from CSV files.
      state.config.labels_path = ov.labels;
      AnalysisSpec spec;
      spec.type = spec.name = "overlap";
      std::string joined;
      for (const auto& entry : ov.predictions) {
        if (!joined.empty()) joined += ',';
        joined += entry;
      }
      spec.params["predictions"] = joined;
      if (!ov.reference.empty()) spec.params["reference"] = ov.reference;
      state.config.analyses.push_back(std::move(spec));
      state.show.push_back("overlap");
      return execute(state);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == errc::config_invalid) return 1;
    if (e.code() == errc::io_error) return 3;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
