#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

enum class FileFormat { npy, csv, rawf32 };

FileFormat parse_format(std::string_view name);
const char* format_name(FileFormat format);

struct LoadOptions {
  std::optional<std::string> ids_path;  // newline-delimited sample ids
  bool csv_header = false;
};

// The single ingestion boundary: parses the file under the declared
// format, validates (finite values, N >= 1, D >= 1), attaches ids.
EmbeddingSet load_embeddings(const std::string& path, FileFormat format,
                             const std::string& model_tag, const LoadOptions& options = {});

struct SaveOptions {
  bool npy_f32 = false;  // default writes <f8
};

void save_embeddings(const EmbeddingSet& set, const std::string& path, FileFormat format,
                     const SaveOptions& options = {});

// Matrix-level primitives (shared by the loaders, the CLI, and fixtures).
//
// NPY v1.0: magic "\x93NUMPY", little-endian '<f4'/'<f8', C-order, 2-D.
Matrix load_npy(const std::string& path);
void save_npy(const std::string& path, const Matrix& matrix, bool as_f32 = false);

// CSV: comma-separated decimal floats, no header unless requested.
Matrix load_csv(const std::string& path, bool header = false);
void save_csv(const std::string& path, const Matrix& matrix);

// rawf32: little-endian row-major f32 next to a JSON sidecar {"n":N,"d":D}
// at <path>.json.
Matrix load_rawf32(const std::string& path);
void save_rawf32(const std::string& path, const Matrix& matrix);

std::vector<std::string> load_ids(const std::string& path);
void save_ids(const std::vector<std::string>& ids, const std::string& path);

// Labels arrive either as newline-delimited integers (ids default to
// "0".."N-1") or as two-column id,label CSV. num_classes == 0 infers.
LabelSet load_labels(const std::string& path, int num_classes = 0);
void save_labels(const LabelSet& labels, const std::string& path);

}  // namespace repmetric
