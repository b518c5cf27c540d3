#include "repmetric/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "repmetric/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

namespace repmetric {

namespace {

constexpr char kNpyMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for reading");
  }
  return in;
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) {
    throw Error(errc::io_error, "cannot open \"" + path + "\" for writing");
  }
  return out;
}

// Pulls the value of a 'key': ... entry out of the NPY header dict.
std::string header_field(const std::string& header, const std::string& key) {
  const std::string quoted = "'" + key + "'";
  auto pos = header.find(quoted);
  if (pos == std::string::npos) {
    throw Error(errc::malformed_header, "NPY header is missing " + quoted);
  }
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string::npos) {
    throw Error(errc::malformed_header, "NPY header entry for " + quoted + " has no value");
  }
  ++pos;
  // Value ends at the next top-level comma or the closing brace.
  int depth = 0;
  std::size_t end = pos;
  for (; end < header.size(); ++end) {
    const char c = header[end];
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (depth == 0 && (c == ',' || c == '}')) break;
  }
  return trim(std::string_view(header).substr(pos, end - pos));
}

double parse_double_token(const std::string& token, long row, const std::string& path) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw Error(errc::bad_value, "cannot parse \"" + token + "\" in " + path, row);
  }
  return value;
}

}  // namespace

FileFormat parse_format(std::string_view name) {
  if (name == "npy") return FileFormat::npy;
  if (name == "csv") return FileFormat::csv;
  if (name == "rawf32") return FileFormat::rawf32;
  throw Error(errc::config_invalid, "unknown embedding format \"" + std::string(name) + "\"");
}

const char* format_name(FileFormat format) {
  switch (format) {
    case FileFormat::npy: return "npy";
    case FileFormat::csv: return "csv";
    case FileFormat::rawf32: return "rawf32";
  }
  return "?";
}

Matrix load_npy(const std::string& path) {
  auto in = open_input(path, std::ios::binary);

  char magic[6];
  unsigned char version[2];
  if (!in.read(magic, 6) || std::memcmp(magic, kNpyMagic, 6) != 0) {
    throw Error(errc::malformed_header, "\"" + path + "\" is not an NPY file (bad magic)");
  }
  if (!in.read(reinterpret_cast<char*>(version), 2)) {
    throw Error(errc::malformed_header, "truncated NPY version field in \"" + path + "\"");
  }
  if (version[0] != 1) {
    throw Error(errc::malformed_header, "unsupported NPY version " + std::to_string(version[0]) +
                                            "." + std::to_string(version[1]) +
                                            " (v1.0 only) in \"" + path + "\"");
  }
  unsigned char len_bytes[2];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 2)) {
    throw Error(errc::malformed_header, "truncated NPY header length in \"" + path + "\"");
  }
  const std::size_t header_len = static_cast<std::size_t>(len_bytes[0]) |
                                 (static_cast<std::size_t>(len_bytes[1]) << 8);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(errc::malformed_header, "truncated NPY header dict in \"" + path + "\"");
  }

  const std::string descr = header_field(header, "descr");
  std::size_t item_size = 0;
  if (descr == "'<f4'" || descr == "\"<f4\"") {
    item_size = 4;
  } else if (descr == "'<f8'" || descr == "\"<f8\"") {
    item_size = 8;
  } else {
    throw Error(errc::malformed_header,
                "unsupported dtype " + descr + " in \"" + path + "\" (little-endian f4/f8 only)");
  }

  const std::string order = header_field(header, "fortran_order");
  if (order != "False") {
    throw Error(errc::malformed_header, "fortran-order NPY arrays are not supported (\"" + path +
                                            "\" requires C order)");
  }

  std::string shape = header_field(header, "shape");
  if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')') {
    throw Error(errc::malformed_header, "malformed NPY shape " + shape + " in \"" + path + "\"");
  }
  shape = shape.substr(1, shape.size() - 2);
  std::vector<std::size_t> dims;
  std::stringstream dims_in(shape);
  std::string token;
  while (std::getline(dims_in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;  // trailing comma of 1-tuples
    std::size_t dim = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), dim);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw Error(errc::malformed_header, "bad NPY shape entry \"" + token + "\" in \"" + path + "\"");
    }
    dims.push_back(dim);
  }
  if (dims.size() != 2) {
    throw Error(errc::malformed_header, "expected a 2-D NPY array in \"" + path + "\", got " +
                                            std::to_string(dims.size()) + "-D");
  }
  if (dims[0] == 0 || dims[1] == 0) {
    throw Error(errc::zero_dimension, "NPY array in \"" + path + "\" has shape (" +
                                          std::to_string(dims[0]) + ", " + std::to_string(dims[1]) +
                                          ")");
  }

  const std::size_t count = dims[0] * dims[1];
  Matrix matrix(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
  if (item_size == 8) {
    if (!in.read(reinterpret_cast<char*>(matrix.data()),
                 static_cast<std::streamsize>(count * sizeof(double)))) {
      throw Error(errc::io_error, "truncated NPY payload in \"" + path + "\"");
    }
  } else {
    std::vector<float> buffer(count);
    if (!in.read(reinterpret_cast<char*>(buffer.data()),
                 static_cast<std::streamsize>(count * sizeof(float)))) {
      throw Error(errc::io_error, "truncated NPY payload in \"" + path + "\"");
    }
    for (std::size_t i = 0; i < count; ++i) {
      matrix.data()[i] = static_cast<double>(buffer[i]);
    }
  }
  return matrix;
}

void save_npy(const std::string& path, const Matrix& matrix, bool as_f32) {
  std::string dict = std::string("{'descr': '") + (as_f32 ? "<f4" : "<f8") +
                     "', 'fortran_order': False, 'shape': (" + std::to_string(matrix.rows()) +
                     ", " + std::to_string(matrix.cols()) + "), }";
  // Pad so the payload starts on a 64-byte boundary, newline-terminated.
  const std::size_t unpadded = 6 + 2 + 2 + dict.size() + 1;
  const std::size_t padding = (64 - unpadded % 64) % 64;
  dict.append(padding, ' ');
  dict.push_back('\n');

  auto out = open_output(path, std::ios::binary);
  out.write(kNpyMagic, 6);
  const unsigned char version[2] = {1, 0};
  out.write(reinterpret_cast<const char*>(version), 2);
  const std::size_t header_len = dict.size();
  const unsigned char len_bytes[2] = {static_cast<unsigned char>(header_len & 0xff),
                                      static_cast<unsigned char>((header_len >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(len_bytes), 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));

  if (as_f32) {
    std::vector<float> buffer(static_cast<std::size_t>(matrix.size()));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      buffer[i] = static_cast<float>(matrix.data()[i]);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  } else {
    out.write(reinterpret_cast<const char*>(matrix.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(matrix.size()) * sizeof(double)));
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

Matrix load_csv(const std::string& path, bool header) {
  auto in = open_input(path, std::ios::in);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_index = -1;
  bool skipped_header = !header;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    ++line_index;
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const double value = parse_double_token(trim(cell), line_index, path);
      if (!std::isfinite(value)) {
        throw Error(errc::non_finite_value, "non-finite value in \"" + path + "\"", line_index);
      }
      row.push_back(value);
    }
    if (row.empty()) {
      throw Error(errc::ragged_row, "empty row in \"" + path + "\"", line_index);
    }
    if (width < 0) {
      width = static_cast<Eigen::Index>(row.size());
    } else if (static_cast<Eigen::Index>(row.size()) != width) {
      throw Error(errc::ragged_row, "row has " + std::to_string(row.size()) + " columns, expected " +
                                        std::to_string(width) + " in \"" + path + "\"",
                  line_index);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw Error(errc::zero_dimension, "\"" + path + "\" contains no data rows");
  }

  Matrix matrix(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < width; ++j) {
      matrix(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return matrix;
}

void save_csv(const std::string& path, const Matrix& matrix) {
  auto out = open_output(path, std::ios::out);
  char buffer[64];
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", matrix(i, j));
      if (j) out << ',';
      out << buffer;
    }
    out << '\n';
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

Matrix load_rawf32(const std::string& path) {
  const std::string sidecar_path = path + ".json";
  nlohmann::json sidecar;
  try {
    auto sidecar_in = open_input(sidecar_path, std::ios::in);
    sidecar = nlohmann::json::parse(sidecar_in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::malformed_header, "bad rawf32 sidecar \"" + sidecar_path + "\": " + e.what());
  }
  if (!sidecar.contains("n") || !sidecar.contains("d") || !sidecar["n"].is_number_integer() ||
      !sidecar["d"].is_number_integer()) {
    throw Error(errc::malformed_header,
                "rawf32 sidecar \"" + sidecar_path + "\" must carry integer \"n\" and \"d\"");
  }
  const auto n = sidecar["n"].get<long long>();
  const auto d = sidecar["d"].get<long long>();
  if (n < 1 || d < 1) {
    throw Error(errc::zero_dimension, "rawf32 sidecar declares shape (" + std::to_string(n) + ", " +
                                          std::to_string(d) + ")");
  }

  auto in = open_input(path, std::ios::binary);
  const std::size_t count = static_cast<std::size_t>(n) * static_cast<std::size_t>(d);
  std::vector<float> buffer(count);
  if (!in.read(reinterpret_cast<char*>(buffer.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    throw Error(errc::io_error, "rawf32 payload in \"" + path + "\" is shorter than " +
                                    std::to_string(count) + " floats");
  }
  Matrix matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < count; ++i) matrix.data()[i] = static_cast<double>(buffer[i]);
  return matrix;
}

void save_rawf32(const std::string& path, const Matrix& matrix) {
  {
    auto out = open_output(path, std::ios::binary);
    std::vector<float> buffer(static_cast<std::size_t>(matrix.size()));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      buffer[i] = static_cast<float>(matrix.data()[i]);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!out) {
      throw Error(errc::io_error, "failed writing \"" + path + "\"");
    }
  }
  {
    auto out = open_output(path + ".json", std::ios::out);
    out << "{\"n\": " << matrix.rows() << ", \"d\": " << matrix.cols() << "}\n";
    if (!out) {
      throw Error(errc::io_error, "failed writing \"" + path + ".json\"");
    }
  }
}

std::vector<std::string> load_ids(const std::string& path) {
  auto in = open_input(path, std::ios::in);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;
    ids.push_back(line);
  }
  if (ids.empty()) {
    throw Error(errc::zero_dimension, "id file \"" + path + "\" is empty");
  }
  return ids;
}

void save_ids(const std::vector<std::string>& ids, const std::string& path) {
  auto out = open_output(path, std::ios::out);
  for (const auto& id : ids) out << id << '\n';
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

LabelSet load_labels(const std::string& path, int num_classes) {
  auto in = open_input(path, std::ios::in);
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::string line;
  long line_index = -1;
  bool two_column = false;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_index;
    if (line.empty() && in.peek() == EOF) break;
    if (first) {
      two_column = line.find(',') != std::string::npos;
      first = false;
    }
    std::string label_token;
    if (two_column) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw Error(errc::ragged_row, "expected id,label in \"" + path + "\"", line_index);
      }
      ids.push_back(trim(std::string_view(line).substr(0, comma)));
      label_token = trim(std::string_view(line).substr(comma + 1));
    } else {
      label_token = trim(line);
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(label_token.data(), label_token.data() + label_token.size(), value);
    if (ec != std::errc() || ptr != label_token.data() + label_token.size()) {
      throw Error(errc::bad_value, "cannot parse label \"" + label_token + "\" in \"" + path + "\"",
                  line_index);
    }
    labels.push_back(value);
  }
  if (labels.empty()) {
    throw Error(errc::zero_dimension, "label file \"" + path + "\" is empty");
  }
  if (!two_column) ids = default_ids(labels.size());
  return LabelSet::create(std::move(ids), std::move(labels), num_classes);
}

void save_labels(const LabelSet& labels, const std::string& path) {
  auto out = open_output(path, std::ios::out);
  for (std::size_t i = 0; i < labels.n(); ++i) {
    out << labels.sample_ids[i] << ',' << labels.labels[i] << '\n';
  }
  if (!out) {
    throw Error(errc::io_error, "failed writing \"" + path + "\"");
  }
}

EmbeddingSet load_embeddings(const std::string& path, FileFormat format,
                             const std::string& model_tag, const LoadOptions& options) {
  Matrix matrix;
  switch (format) {
    case FileFormat::npy: matrix = load_npy(path); break;
    case FileFormat::csv: matrix = load_csv(path, options.csv_header); break;
    case FileFormat::rawf32: matrix = load_rawf32(path); break;
  }
  std::vector<std::string> ids;
  if (options.ids_path) {
    ids = load_ids(*options.ids_path);
    if (static_cast<Eigen::Index>(ids.size()) != matrix.rows()) {
      throw Error(errc::label_mismatch, "id file \"" + *options.ids_path + "\" has " +
                                            std::to_string(ids.size()) + " ids for " +
                                            std::to_string(matrix.rows()) + " rows");
    }
  }
  return EmbeddingSet::create(model_tag, std::move(matrix), std::move(ids));
}

void save_embeddings(const EmbeddingSet& set, const std::string& path, FileFormat format,
                     const SaveOptions& options) {
  switch (format) {
    case FileFormat::npy: save_npy(path, set.matrix, options.npy_f32); break;
    case FileFormat::csv: save_csv(path, set.matrix); break;
    case FileFormat::rawf32: save_rawf32(path, set.matrix); break;
  }
}

}  // namespace repmetric
