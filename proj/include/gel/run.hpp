#pragma once

// End-to-end test runs: load inputs, build moments, solve, report.

#include "gel/report.hpp"
#include "gel/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gel {

enum class Command { MeanTest, Kgel, Kgel2, HullCheck, ModeReport, LabelTest, Rank, Bench };
std::string command_name(Command command);
Command parse_command(const std::string& name);

/// Moment condition for mean-test.
enum class Condition { Mean, Fid, User };

struct RunConfig {
  Command command = Command::MeanTest;
  Condition condition = Condition::Mean;
  DivergenceKind divergence = DivergenceKind::ExponentialTilting;
  bool two_sample = false;
  bool paired = false;  // paired mean-embedding moments for one-sample kgel

  std::string data_path;
  std::optional<std::string> model_path;
  std::optional<std::string> witness_pool_path;  // defaults to the data file
  std::optional<std::string> labels_data;
  std::optional<std::string> labels_model;
  std::optional<std::string> labels_witness;
  std::optional<std::string> hierarchy_path;
  std::optional<std::string> corrupted_path;  // label-test: 0/1 per data sample

  std::string kernel = "exponential";  // exponential | product-delta | product-hierarchy
  Index witness_count = 64;
  std::uint64_t seed = 0;
  bool pca = false;
  std::optional<std::string> out_path;
  bool include_weights = true;
  SolverConfig solver;

  // mode-report
  std::optional<Index> present_count;
  std::vector<Label> dropped;  // oracle: classes absent from the model
  bool per_class = false;
  // rank
  Index bottom = 10;
  // bench
  Index bench_n = 10000;
  Index bench_dim = 32;
  Index bench_modes = 10;

  /// Throws GelError(InvalidArgument) for invalid combinations.
  void validate() const;
};

/// The effective configuration, every default resolved.
nlohmann::json config_to_json(const RunConfig& config);

Report run(const RunConfig& config);

/// One-line summary for standard output.
std::string summary_line(const Report& report);

}  // namespace gel
