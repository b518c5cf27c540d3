#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repmetric/io.hpp"
#include "repmetric/report.hpp"

namespace repmetric {

// Declarative batch run: embedding inputs, optional labels, a list of
// analyses. Parsed from a single JSON document; all referenced paths are
// validated before any computation starts.
struct EmbeddingInput {
  std::string tag;
  std::string path;
  FileFormat format = FileFormat::npy;
  std::optional<std::string> ids_path;
  std::optional<std::string> labels_path;
  std::string split = "test";  // "train" or "test"
};

struct AnalysisSpec {
  std::string type;  // geometry | cka | invariance | graph | knn | kmeans | probe | overlap
  std::string name;  // report stem; defaults to type (+ index when repeated)
  std::map<std::string, std::string> params;
  std::vector<std::string> tags;  // subset of inputs; empty = all
};

struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "reports";
  ReportFormat format = ReportFormat::json;
  std::vector<EmbeddingInput> embeddings;
  std::optional<std::string> labels_path;  // global labels, matched by id
  std::optional<int> num_classes;
  std::vector<AnalysisSpec> analyses;

  // Throws ConfigInvalid on parse/validation problems. Relative paths
  // resolve against the config file's directory.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text, const std::string& base_dir);
};

struct AnalysisOutcome {
  std::string name;
  bool ok = false;
  std::string error;  // empty when ok
  std::vector<std::string> outputs;
};

struct RunSummary {
  std::vector<AnalysisOutcome> analyses;
  // 0 = success, 2 = at least one analysis failed.
  int exit_code = 0;
};

// Loads inputs, executes the requested analyses (independent failures do
// not stop the run), writes one JSON report per analysis plus CSV matrices
// and a summary.json. Idempotent for fixed seeds.
RunSummary run(const RunConfig& config);

}  // namespace repmetric
