#include "repmetric/report.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "repmetric/error.hpp"
#include "repmetric/json_out.hpp"

namespace repmetric {

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  throw Error(errc::config_invalid, "unknown report format \"" + name + "\"");
}

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw Error(errc::non_finite_value, "refusing to serialize a non-finite value");
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string json_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 2);
  for (const char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buffer[8];
          std::snprintf(buffer, sizeof(buffer), "\\u%04x", c);
          out += buffer;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(errc::io_error, "cannot open \"" + path + "\"");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

PairwiseReport PairwiseReport::make(std::string metric_name, std::vector<std::string> model_tags,
                                    Matrix matrix, std::map<std::string, std::string> params) {
  if (matrix.rows() != matrix.cols() ||
      matrix.rows() != static_cast<Eigen::Index>(model_tags.size())) {
    throw Error(errc::dim_mismatch, "pairwise matrix must be MxM over the model tags");
  }
  PairwiseReport report;
  report.metric_name = std::move(metric_name);
  report.model_tags = std::move(model_tags);
  report.matrix = std::move(matrix);
  report.params = std::move(params);
  report.created_at = utc_timestamp();
  return report;
}

namespace {

void dump_value(const ordered_json& value, std::string& out, int depth) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(depth + 1) * 2, ' ');
  switch (value.type()) {
    case nlohmann::detail::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + "\"" + json_escape(key) + "\": ";
        dump_value(item, out, depth + 1);
      }
      out += "\n" + indent + "}";
      return;
    }
    case nlohmann::detail::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      // Scalar-only arrays stay on one line (matrix rows read naturally).
      bool scalars_only = true;
      for (const auto& item : value) {
        if (item.is_structured()) scalars_only = false;
      }
      if (scalars_only) {
        out += "[";
        bool first = true;
        for (const auto& item : value) {
          if (!first) out += ", ";
          first = false;
          dump_value(item, out, depth);
        }
        out += "]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        dump_value(item, out, depth + 1);
      }
      out += "\n" + indent + "]";
      return;
    }
    case nlohmann::detail::value_t::string:
      out += "\"" + json_escape(value.get_ref<const std::string&>()) + "\"";
      return;
    case nlohmann::detail::value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      return;
    case nlohmann::detail::value_t::number_integer:
      out += std::to_string(value.get<long long>());
      return;
    case nlohmann::detail::value_t::number_unsigned:
      out += std::to_string(value.get<unsigned long long>());
      return;
    case nlohmann::detail::value_t::number_float:
      out += format_double(value.get<double>());
      return;
    case nlohmann::detail::value_t::null:
      out += "null";
      return;
    default:
      throw Error(errc::io_error, "cannot serialize this JSON node type");
  }
}

}  // namespace

std::string dump_json(const ordered_json& value) {
  std::string out;
  dump_value(value, out, 0);
  out += "\n";
  return out;
}

std::string emit_json(const PairwiseReport& report) {
  ordered_json doc;
  doc["metric_name"] = report.metric_name;
  doc["model_tags"] = report.model_tags;
  ordered_json matrix = ordered_json::array();
  for (Eigen::Index i = 0; i < report.matrix.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < report.matrix.cols(); ++j) {
      row.push_back(report.matrix(i, j));
    }
    matrix.push_back(std::move(row));
  }
  doc["matrix"] = std::move(matrix);
  doc["params"] = ordered_json::object();
  for (const auto& [key, value] : report.params) {
    doc["params"][key] = value;
  }
  doc["created_at"] = report.created_at;
  return dump_json(doc);
}

std::string emit_csv(const PairwiseReport& report) {
  std::string out;
  for (const auto& tag : report.model_tags) {
    out += ",";
    out += tag;
  }
  out += "\n";
  for (Eigen::Index i = 0; i < report.matrix.rows(); ++i) {
    out += report.model_tags[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < report.matrix.cols(); ++j) {
      out += ",";
      out += format_double(report.matrix(i, j));
    }
    out += "\n";
  }
  return out;
}

void emit(const PairwiseReport& report, const std::string& path, ReportFormat format) {
  write_text_file(path, format == ReportFormat::json ? emit_json(report) : emit_csv(report));
}

}  // namespace repmetric
