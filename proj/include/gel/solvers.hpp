#pragma once

#include "gel/common.hpp"
#include "gel/hull.hpp"
#include "gel/moment_conditions.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gel {

/// The three Cressie-Read members supported. Valid weights: EL pi > 0,
/// ET pi >= 0, Euclidean unrestricted.
enum class DivergenceKind { EmpiricalLikelihood, ExponentialTilting, Euclidean };

std::string divergence_name(DivergenceKind kind);
DivergenceKind parse_divergence(const std::string& name);

// Each solver first divides every moment column by its largest absolute
// entry and iterates on that scaled problem, where the caps apply. The
// gradient tolerance and GelSolution::final_grad_norm use the original
// columns; a gradient below the round-off floor of its own evaluation
// (1e-14 times the norm of sum_i |c_i m_i|) also counts as converged.
// GelSolution::dual is reported for the original columns.
struct SolverConfig {
  double grad_tolerance = 1e-8;
  double param_cap = 1e8;  // abort when ||lambda|| exceeds this
  double grad_cap = 1e8;   // abort when ||grad|| exceeds this
  Index max_iterations = 200;
  double el_step = 1.0;
  double et_step = 0.5;  // halved further whenever it would raise the ET objective
  double hull_epsilon = 1e-7;
  Index hull_max_iterations = 50000;
  std::uint64_t rng_seed = 0;
  // Skip the triangle-algorithm precheck (the C/D caps still apply).
  bool skip_hull_check = false;

  void validate() const;
};

enum class SolveStatus { Converged, HullFail, DivergedInfinite, MaxIterations };
std::string status_name(SolveStatus status);

struct GelSolution {
  SolveStatus status = SolveStatus::MaxIterations;
  DivergenceKind kind = DivergenceKind::EmpiricalLikelihood;
  Vector weights;
  Vector dual;
  // EL: KL(P_n || P_pi). ET: KL(P_pi || P_n). Euclidean: the quadratic objective.
  double divergence_nats = 0.0;
  double divergence_bits = 0.0;
  double score = 1.0;  // 2^divergence_bits
  double wilks = 0.0;  // -2 sum log(n pi_i)
  Index iterations = 0;
  double final_grad_norm = 0.0;
  Index hessian_rank = 0;
  std::optional<double> hotelling_t2;  // Euclidean only
  std::optional<HullKind> hull;
  // EL dual objective after every accepted step, starting at lambda = 0.
  std::vector<double> dual_trace;
  std::vector<std::string> warnings;

  bool converged() const { return status == SolveStatus::Converged; }
};

GelSolution solve_el(const MomentMatrix& moments, const SolverConfig& config = {});
GelSolution solve_et(const MomentMatrix& moments, const SolverConfig& config = {});
GelSolution solve_euclidean(const MomentMatrix& moments, const SolverConfig& config = {});
GelSolution solve(DivergenceKind kind, const MomentMatrix& moments,
                  const SolverConfig& config = {});

/// log(z) for z >= 1/n, otherwise its second-order Taylor expansion at 1/n.
double modified_log(double z, Index n);
double modified_log_d1(double z, Index n);
double modified_log_d2(double z, Index n);

/// -2 sum log(n pi_i); +inf if any weight is zero or the solve did not converge.
double wilks_statistic(const GelSolution& solution);
double wilks_statistic(const Vector& weights);

namespace detail {

/// argmin ||w - prior||^2 subject to constraints * w = rhs, via the
/// minimum-norm correction. Throws SingularHessian when the system is
/// inconsistent.
Vector least_distance_weights(const Matrix& constraints, const Vector& rhs,
                              const Vector& prior);

/// Fills divergence_bits, score from divergence_nats, and marks infinities
/// for failed solves.
void finalize_scores(GelSolution& solution);

}  // namespace detail

}  // namespace gel
