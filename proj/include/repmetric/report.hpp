#pragma once

#include <map>
#include <string>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

enum class ReportFormat { json, csv };

ReportFormat parse_report_format(const std::string& name);

// M x M score matrix over model tags plus metric metadata. The payload of
// every pairwise analysis (CKA, graph overlap, prediction agreement).
struct PairwiseReport {
  std::string metric_name;
  std::vector<std::string> model_tags;
  Matrix matrix;  // M x M
  std::map<std::string, std::string> params;
  std::string created_at;  // ISO-8601 UTC; excluded from determinism checks

  static PairwiseReport make(std::string metric_name, std::vector<std::string> model_tags,
                             Matrix matrix, std::map<std::string, std::string> params = {});
};

// Stable field order; floats carry 17 significant digits so 64-bit values
// round-trip exactly. A NaN/Inf cell is a serialization error.
std::string emit_json(const PairwiseReport& report);

// Matrix grid with a leading header row/column of model tags.
std::string emit_csv(const PairwiseReport& report);

void emit(const PairwiseReport& report, const std::string& path, ReportFormat format);

// %.17g with NaN/Inf rejection; shared by every serializer in the project.
std::string format_double(double value);

std::string json_escape(std::string_view text);
std::string utc_timestamp();

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace repmetric
