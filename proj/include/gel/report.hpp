#pragma once

#include "gel/diagnostics.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace gel {

inline constexpr const char* kToolVersion = "0.1.0";

struct SampleWeight {
  SampleId id = 0;
  double weight = 0.0;
};

/// Result of one CLI run. Non-finite reals serialize as "+inf", "-inf" or "nan".
struct Report {
  std::string tool_version = kToolVersion;
  nlohmann::json config;  // effective configuration, defaults resolved
  std::string command;
  std::string status;
  std::string divergence;
  bool two_sample = false;
  // One-sample: the test. Two-sample: the data side.
  double divergence_nats = 0.0;
  double divergence_bits = 0.0;
  std::optional<double> model_divergence_nats;
  std::optional<double> model_divergence_bits;
  // 2^D; "model/data" for two-sample runs.
  std::string score;
  double wilks = 0.0;
  std::optional<std::string> hull;
  std::optional<double> hull_distance;
  Index iterations = 0;
  double final_grad_norm = 0.0;
  std::optional<Index> hessian_rank;
  std::optional<double> hotelling_t2;
  std::optional<std::vector<SampleWeight>> data_weights;
  std::optional<std::vector<SampleWeight>> model_weights;
  // alpha: model-side zero-weight count; beta: data-side zero-weight count.
  std::optional<Index> alpha;
  Index beta = 0;
  std::optional<ClassReport> class_report;
  std::optional<PrCurve> pr_curve;
  std::optional<std::vector<RankedSample>> ranking;
  nlohmann::json per_class = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
  double timing_seconds = 0.0;
};

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& json);

/// Pretty-printed JSON text, stable key order.
std::string serialize_report(const Report& report);

nlohmann::json real_to_json(double v);
double real_from_json(const nlohmann::json& j);

}  // namespace gel
