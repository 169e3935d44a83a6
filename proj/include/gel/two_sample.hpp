#pragma once

// Two-sample GEL via the stacking change of variables: data rows become
// [m_i, +1], model rows [-m'_j, -1], and one-sample weights xi on the stack
// give pi = 2 xi (data) and psi = 2 xi (model).

#include "gel/moment_conditions.hpp"
#include "gel/solvers.hpp"

#include <string>
#include <vector>

namespace gel {

struct TwoSampleMoments {
  Matrix stacked;  // (n + m) x (p + 1)
  Index n = 0;     // data rows
  Index m = 0;     // model rows
  bool unequal_sizes = false;
};

struct TwoSampleSolution {
  SolveStatus status = SolveStatus::MaxIterations;
  DivergenceKind kind = DivergenceKind::ExponentialTilting;
  Vector pi;   // data-side weights
  Vector psi;  // model-side weights
  Vector dual;
  double divergence_data_nats = 0.0;
  double divergence_model_nats = 0.0;
  double divergence_data_bits = 0.0;
  double divergence_model_bits = 0.0;
  double score_model = 1.0;
  double score_data = 1.0;
  Index iterations = 0;
  double final_grad_norm = 0.0;
  std::optional<HullKind> hull;
  std::vector<std::string> warnings;

  bool converged() const { return status == SolveStatus::Converged; }
  /// "model/data" with three decimals, "+inf" for infinite scores.
  std::string score_string() const;
};

TwoSampleMoments stack_two_sample(const Matrix& data_moments, const Matrix& model_moments);

TwoSampleSolution solve_two_sample(const TwoSampleMoments& stacked, DivergenceKind divergence,
                                   const SolverConfig& config = {});

/// Kernel two-sample test: rows are [k(., t_w)]_w on each side.
TwoSampleSolution kgel2(const FeatureSet& data, const FeatureSet& model,
                        const WitnessSet& witnesses, const KernelSpec& kernel,
                        DivergenceKind divergence, const SolverConfig& config = {});

std::string format_score(double score);

}  // namespace gel
