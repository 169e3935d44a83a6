#pragma once

#include "gel/moment_conditions.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gel {

// NPY version 1.0, C order, little-endian <f4 or <f8, two dimensions.
Matrix parse_npy(std::string_view bytes);
std::string encode_npy(const Matrix& matrix);
Matrix read_npy(const std::string& path);
void write_npy(const std::string& path, const Matrix& matrix);

/// Comma-separated, one sample per line; a first line that does not parse as
/// numbers is treated as a header.
Matrix parse_csv(std::string_view text);
Matrix read_csv(const std::string& path);

enum class FeatureFormat { Npy, Csv };
/// From the file extension; ".npy" is NPY, everything else CSV.
FeatureFormat infer_format(const std::string& path);

/// One label per line; blank trailing lines are ignored.
std::vector<Label> read_labels(const std::string& path);

FeatureSet load_features(const std::string& path, std::optional<FeatureFormat> format = std::nullopt,
                         const std::optional<std::string>& labels_path = std::nullopt);

/// JSON object: label id -> array of node names, root first, leaf last.
LabelHierarchy parse_hierarchy(std::string_view json_text);
LabelHierarchy load_hierarchy(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace gel
