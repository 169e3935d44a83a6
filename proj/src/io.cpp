#include "gel/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace gel {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string_view::npos) {
    lines.pop_back();
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_row(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    const std::string field(trim(line.substr(pos, end - pos)));
    if (field.empty()) return false;
    char* stop = nullptr;
    const double v = std::strtod(field.c_str(), &stop);
    if (stop != field.c_str() + field.size()) return false;
    out.push_back(v);
    if (end == line.size()) break;
    pos = end + 1;
  }
  return true;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GelError(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw GelError(ErrorCode::Io, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw GelError(ErrorCode::Io, "write failed for " + path);
}

Matrix parse_csv(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!parse_row(lines[i], row)) {
      if (i == 0) continue;  // header
      throw GelError(ErrorCode::Parse, "CSV line " + std::to_string(i + 1) + " is not numeric");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw GelError(ErrorCode::Parse, "CSV line " + std::to_string(i + 1) +
                                           " has a different number of columns");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw GelError(ErrorCode::Parse, "CSV has no data rows");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < out.rows(); ++r) {
    for (Index c = 0; c < out.cols(); ++c) out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return out;
}

Matrix read_csv(const std::string& path) { return parse_csv(read_file(path)); }

FeatureFormat infer_format(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".npy") return FeatureFormat::Npy;
  return FeatureFormat::Csv;
}

std::vector<Label> read_labels(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<Label> labels;
  for (auto line : split_lines(text)) labels.emplace_back(trim(line));
  return labels;
}

FeatureSet load_features(const std::string& path, std::optional<FeatureFormat> format,
                         const std::optional<std::string>& labels_path) {
  const FeatureFormat fmt = format.value_or(infer_format(path));
  Matrix features = fmt == FeatureFormat::Npy ? read_npy(path) : read_csv(path);
  std::optional<std::vector<Label>> labels;
  if (labels_path) {
    labels = read_labels(*labels_path);
    if (static_cast<Index>(labels->size()) != features.rows()) {
      throw GelError(ErrorCode::DimensionMismatch,
                     "labels file " + *labels_path + " has " + std::to_string(labels->size()) +
                         " entries for " + std::to_string(features.rows()) + " samples");
    }
  }
  return FeatureSet::from_matrix(std::move(features), std::move(labels));
}

LabelHierarchy parse_hierarchy(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw GelError(ErrorCode::Parse, std::string("hierarchy JSON: ") + e.what());
  }
  if (!doc.is_object()) throw GelError(ErrorCode::Parse, "hierarchy JSON must be an object");
  LabelHierarchy h;
  for (const auto& [label, nodes] : doc.items()) {
    if (!nodes.is_array()) {
      throw GelError(ErrorCode::Parse, "hierarchy entry for " + label + " is not an array");
    }
    auto& path = h.paths[label];
    for (const auto& node : nodes) {
      if (!node.is_string()) {
        throw GelError(ErrorCode::Parse, "hierarchy nodes must be strings");
      }
      path.push_back(node.get<std::string>());
    }
  }
  h.validate();
  return h;
}

LabelHierarchy load_hierarchy(const std::string& path) { return parse_hierarchy(read_file(path)); }

}  // namespace gel
