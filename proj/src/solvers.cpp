#include "gel/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRidge = 1e-10;

// Solves (H + ridge) x = rhs for a symmetric positive semi-definite H.
Vector newton_direction(const Matrix& hessian, const Vector& rhs) {
  const Index p = hessian.rows();
  const double trace = hessian.trace();
  Matrix regularized = hessian;
  if (trace > 0.0) regularized.diagonal().array() += kRidge * trace / static_cast<double>(p);
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() == Eigen::Success) {
    Vector x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  Eigen::LDLT<Matrix> ldlt(regularized);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Vector x = ldlt.solve(rhs);
    if (x.allFinite() && (regularized * x - rhs).norm() <= 1e-6 * std::max(1.0, rhs.norm())) {
      return x;
    }
  }
  throw GelError(ErrorCode::SingularHessian, "dual Hessian is singular after regularization");
}

Index numerical_rank(const Matrix& hessian) {
  if (hessian.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
  const Vector ev = eig.eigenvalues().cwiseAbs();
  const double top = ev.maxCoeff();
  if (top <= 0.0) return 0;
  return static_cast<Index>((ev.array() > top * 1e-10).count());
}

void check_finite(const MomentMatrix& moments) {
  if (moments.rows.rows() < 1 || moments.rows.cols() < 1) {
    throw GelError(ErrorCode::EmptyInput, "empty moment matrix");
  }
  if (!moments.rows.allFinite()) {
    throw GelError(ErrorCode::NonFinite, "moment matrix has non-finite entries");
  }
}

// Per-column max |m_ij|. Dividing a column by a positive constant leaves the
// feasible weights, and so every solution pi, unchanged.
double log_mean_exp(const Vector& x) {
  const double top = x.maxCoeff();
  return top + std::log((x.array() - top).exp().mean());
}

// Norm of the dual gradient sum_i c_i m_i in the caller's units, and the
// floating-point floor below which that norm cannot be resolved.
struct GradientCheck {
  double norm;
  double floor;
  bool within(double tolerance) const { return norm <= std::max(tolerance, floor); }
};

GradientCheck check_gradient(const Matrix& m, const Vector& scale, const Vector& coeff,
                             const Vector& grad) {
  const Vector magnitude = m.cwiseAbs().transpose() * coeff.cwiseAbs();
  return {grad.cwiseProduct(scale).norm(), 1e-14 * magnitude.cwiseProduct(scale).norm()};
}

Vector column_scale(const Matrix& m) {
  Vector scale = m.cwiseAbs().colwise().maxCoeff().transpose();
  for (Index j = 0; j < scale.size(); ++j) {
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
  }
  return scale;
}

GelSolution start(DivergenceKind kind, const MomentMatrix& moments, const SolverConfig& config) {
  config.validate();
  check_finite(moments);
  GelSolution sol;
  sol.kind = kind;
  sol.dual = Vector::Zero(moments.p());
  if (moments.underdetermined) {
    sol.warnings.push_back("fewer than p + 1 samples; the dual Hessian is likely degenerate");
  }
  return sol;
}

// Runs the triangle-algorithm precheck; returns false (with status set) when
// the solve should stop before optimizing.
bool hull_precheck(GelSolution& sol, const Matrix& rows, const SolverConfig& config,
                   bool indeterminate_is_outside) {
  if (config.skip_hull_check) return true;
  HullOptions opts;
  opts.epsilon = config.hull_epsilon;
  opts.seed = config.rng_seed;
  opts.max_iterations = config.hull_max_iterations;
  const HullVerdict verdict = hull_membership(rows, Vector::Zero(rows.cols()), opts);
  sol.hull = verdict.kind;
  if (verdict.kind == HullKind::Outside ||
      (verdict.kind == HullKind::Indeterminate && indeterminate_is_outside)) {
    sol.status = SolveStatus::HullFail;
    sol.weights = Vector::Constant(rows.rows(), std::numeric_limits<double>::quiet_NaN());
    return false;
  }
  if (verdict.kind == HullKind::Indeterminate) {
    sol.warnings.push_back("hull check indeterminate; solving anyway");
  }
  return true;
}

double kl_uniform_to_weights(const Vector& w) {
  // -(1/n) sum log(n w_i)
  const double n = static_cast<double>(w.size());
  double acc = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) <= 0.0) return kInf;
    acc += std::log(n * w(i));
  }
  return -acc / n;
}

double kl_weights_to_uniform(const Vector& w) {
  // sum w_i log(n w_i), 0 log 0 = 0
  const double n = static_cast<double>(w.size());
  double acc = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) acc += w(i) * std::log(n * w(i));
  }
  return acc;
}

struct ElState {
  double objective = 0.0;
  Vector d1;  // derivative of the modified log at each 1 + lambda . m_i
  Vector grad;
  Matrix neg_hessian;
};

ElState el_evaluate(const Matrix& m, const Vector& lambda, bool with_hessian) {
  const Index n = m.rows();
  const Vector z = Vector::Ones(n) + m * lambda;
  Vector d1(n), d2(n);
  ElState s;
  for (Index i = 0; i < n; ++i) {
    s.objective += modified_log(z(i), n);
    d1(i) = modified_log_d1(z(i), n);
    d2(i) = -modified_log_d2(z(i), n);
  }
  s.grad = m.transpose() * d1;
  s.d1 = d1;
  if (with_hessian) {
    const Matrix scaled = m.array().colwise() * d2.array().sqrt();
    s.neg_hessian = scaled.transpose() * scaled;
  }
  return s;
}

}  // namespace

std::string divergence_name(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::EmpiricalLikelihood: return "el";
    case DivergenceKind::ExponentialTilting: return "et";
    case DivergenceKind::Euclidean: return "euclidean";
  }
  return "unknown";
}

DivergenceKind parse_divergence(const std::string& name) {
  if (name == "el") return DivergenceKind::EmpiricalLikelihood;
  if (name == "et") return DivergenceKind::ExponentialTilting;
  if (name == "euclidean") return DivergenceKind::Euclidean;
  throw GelError(ErrorCode::InvalidArgument, "unknown divergence: " + name);
}

std::string status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::HullFail: return "hull-fail";
    case SolveStatus::DivergedInfinite: return "diverged-infinite";
    case SolveStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(grad_tolerance) || !positive(param_cap) || !positive(grad_cap) ||
      !positive(hull_epsilon)) {
    throw GelError(ErrorCode::InvalidArgument, "solver tolerances and caps must be positive");
  }
  if (max_iterations < 1 || hull_max_iterations < 1) {
    throw GelError(ErrorCode::InvalidArgument, "iteration limits must be positive");
  }
  if (!(el_step > 0.0 && el_step <= 1.0) || !(et_step > 0.0 && et_step <= 1.0)) {
    throw GelError(ErrorCode::InvalidArgument, "Newton step sizes must lie in (0, 1]");
  }
}

double modified_log(double z, Index n) {
  const double nn = static_cast<double>(n);
  if (z >= 1.0 / nn) return std::log(z);
  return std::log(1.0 / nn) - 1.5 + 2.0 * nn * z - 0.5 * nn * nn * z * z;
}

double modified_log_d1(double z, Index n) {
  const double nn = static_cast<double>(n);
  if (z >= 1.0 / nn) return 1.0 / z;
  return 2.0 * nn - nn * nn * z;
}

double modified_log_d2(double z, Index n) {
  const double nn = static_cast<double>(n);
  if (z >= 1.0 / nn) return -1.0 / (z * z);
  return -nn * nn;
}

double wilks_statistic(const Vector& weights) {
  const double kl = kl_uniform_to_weights(weights);
  return std::isfinite(kl) ? 2.0 * static_cast<double>(weights.size()) * kl : kInf;
}

double wilks_statistic(const GelSolution& solution) {
  if (!solution.converged()) return kInf;
  return wilks_statistic(solution.weights);
}

namespace detail {

void finalize_scores(GelSolution& sol) {
  if (sol.status == SolveStatus::HullFail || sol.status == SolveStatus::DivergedInfinite) {
    sol.divergence_nats = kInf;
    sol.wilks = kInf;
  }
  sol.divergence_bits = sol.divergence_nats / std::log(2.0);
  sol.score = std::exp2(sol.divergence_bits);
}

Vector least_distance_weights(const Matrix& constraints, const Vector& rhs, const Vector& prior) {
  const Vector residual = constraints * prior - rhs;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(constraints);
  const Vector correction = cod.solve(residual);
  Vector w = prior - correction;
  const double scale = std::max(1.0, constraints.cwiseAbs().maxCoeff());
  if (!w.allFinite() || (constraints * w - rhs).norm() > 1e-6 * scale) {
    throw GelError(ErrorCode::SingularHessian,
                   "equality constraints are inconsistent; the centered Gram matrix is singular");
  }
  return w;
}

}  // namespace detail

GelSolution solve_el(const MomentMatrix& moments, const SolverConfig& config) {
  GelSolution sol = start(DivergenceKind::EmpiricalLikelihood, moments, config);
  const Vector scale = column_scale(moments.rows);
  const Matrix m = moments.rows * scale.cwiseInverse().asDiagonal();
  const Index n = m.rows();

  if (!hull_precheck(sol, m, config, /*indeterminate_is_outside=*/true)) {
    detail::finalize_scores(sol);
    return sol;
  }

  Vector lambda = Vector::Zero(m.cols());
  ElState state = el_evaluate(m, lambda, true);
  sol.dual_trace.push_back(state.objective);
  sol.status = SolveStatus::MaxIterations;

  for (Index iter = 0;; ++iter) {
    const GradientCheck check = check_gradient(m, scale, state.d1, state.grad);
    sol.final_grad_norm = check.norm;
    sol.iterations = iter;
    if (check.within(config.grad_tolerance)) {
      sol.status = SolveStatus::Converged;
      break;
    }
    if (iter >= config.max_iterations) break;

    const Vector direction = newton_direction(state.neg_hessian, state.grad);
    double step = config.el_step;
    Vector candidate = lambda + step * direction;
    ElState next = el_evaluate(m, candidate, false);
    // Backtrack until the concave dual does not decrease beyond round-off.
    const double floor = state.objective - 1e-14 * (1.0 + std::abs(state.objective));
    while (next.objective < floor && step > 1e-12) {
      step *= 0.5;
      candidate = lambda + step * direction;
      next = el_evaluate(m, candidate, false);
    }
    lambda = candidate;
    state = el_evaluate(m, lambda, true);
    sol.dual_trace.push_back(state.objective);

    if (lambda.norm() > config.param_cap || state.grad.norm() > config.grad_cap) {
      sol.status = SolveStatus::DivergedInfinite;
      sol.iterations = iter + 1;
      sol.final_grad_norm = state.grad.cwiseProduct(scale).norm();
      break;
    }
  }

  sol.dual = lambda.cwiseQuotient(scale);
  sol.hessian_rank = numerical_rank(state.neg_hessian);
  const Vector z = Vector::Ones(n) + m * lambda;
  sol.weights = (static_cast<double>(n) * z).cwiseInverse();

  if (sol.status == SolveStatus::DivergedInfinite) {
    detail::finalize_scores(sol);
    return sol;
  }
  if (sol.status == SolveStatus::Converged) {
    if ((sol.weights.array() <= 0.0).any()) {
      sol.status = SolveStatus::DivergedInfinite;
      detail::finalize_scores(sol);
      return sol;
    }
    sol.weights /= sol.weights.sum();
  }
  sol.divergence_nats = kl_uniform_to_weights(sol.weights);
  sol.wilks = wilks_statistic(sol.weights);
  detail::finalize_scores(sol);
  return sol;
}

GelSolution solve_et(const MomentMatrix& moments, const SolverConfig& config) {
  GelSolution sol = start(DivergenceKind::ExponentialTilting, moments, config);
  const Vector scale = column_scale(moments.rows);
  const Matrix m = moments.rows * scale.cwiseInverse().asDiagonal();
  const Index n = m.rows();

  if (!hull_precheck(sol, m, config, /*indeterminate_is_outside=*/false)) {
    detail::finalize_scores(sol);
    return sol;
  }

  Vector lambda = Vector::Zero(m.cols());
  Matrix hessian;
  Vector exponent;
  sol.status = SolveStatus::MaxIterations;

  for (Index iter = 0;; ++iter) {
    // f(lambda) = (1/n) sum exp(lambda . m_i); gradient and Hessian are
    // evaluated with the largest exponent factored out.
    exponent = m * lambda;
    const double shift = exponent.maxCoeff();
    const Vector w = (exponent.array() - shift).exp().matrix() / static_cast<double>(n);
    const Vector grad_scaled = m.transpose() * w;
    const Matrix scaled = m.array().colwise() * w.array().sqrt();
    hessian = scaled.transpose() * scaled;

    const GradientCheck check = check_gradient(m, scale, w, grad_scaled);
    sol.final_grad_norm = std::exp(shift) * check.norm;
    sol.iterations = iter;
    if (check.within(config.grad_tolerance * std::exp(-shift))) {
      sol.status = SolveStatus::Converged;
      break;
    }
    if (iter >= config.max_iterations) break;
    if (lambda.norm() > config.param_cap || std::exp(shift) * grad_scaled.norm() > config.grad_cap) {
      sol.status = SolveStatus::DivergedInfinite;
      break;
    }
    // Backtrack from the fixed step whenever it would raise the objective.
    const Vector direction = newton_direction(hessian, grad_scaled);
    const double current = log_mean_exp(exponent);
    double step = config.et_step;
    Vector candidate = lambda - step * direction;
    while (log_mean_exp(m * candidate) > current + 1e-14 * (1.0 + std::abs(current)) &&
           step > 1e-12) {
      step *= 0.5;
      candidate = lambda - step * direction;
    }
    lambda = candidate;
  }

  sol.dual = lambda.cwiseQuotient(scale);
  sol.hessian_rank = numerical_rank(hessian);
  if (sol.status == SolveStatus::DivergedInfinite) {
    sol.weights = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    detail::finalize_scores(sol);
    return sol;
  }

  exponent = m * lambda;
  Vector w = (exponent.array() - exponent.maxCoeff()).exp().matrix();
  w /= w.sum();
  for (Index i = 0; i < n; ++i) {
    if (w(i) <= kZeroWeight) w(i) = 0.0;
  }
  w /= w.sum();
  sol.weights = w;
  sol.divergence_nats = kl_weights_to_uniform(w);
  sol.wilks = wilks_statistic(w);
  detail::finalize_scores(sol);
  return sol;
}

GelSolution solve_euclidean(const MomentMatrix& moments, const SolverConfig& config) {
  GelSolution sol = start(DivergenceKind::Euclidean, moments, config);
  const Vector scale = column_scale(moments.rows);
  const Matrix m = moments.rows * scale.cwiseInverse().asDiagonal();
  const Index n = m.rows();
  const Index p = m.cols();

  Matrix constraints(p + 1, n);
  constraints.topRows(p) = m.transpose();
  constraints.row(p).setOnes();
  Vector rhs = Vector::Zero(p + 1);
  rhs(p) = 1.0;
  const Vector prior = Vector::Constant(n, 1.0 / static_cast<double>(n));

  sol.weights = detail::least_distance_weights(constraints, rhs, prior);
  sol.status = SolveStatus::Converged;
  const double objective = 0.5 * (sol.weights - prior).squaredNorm();
  sol.divergence_nats = objective;
  const double nn = static_cast<double>(n);
  sol.hotelling_t2 = objective * 2.0 * nn * (nn - 1.0);
  sol.final_grad_norm = (m.transpose() * sol.weights).norm();
  const Matrix centered = m.rowwise() - m.colwise().mean();
  sol.hessian_rank = numerical_rank(centered.transpose() * centered);
  sol.wilks = wilks_statistic(sol.weights);
  if ((sol.weights.array() <= 0.0).any()) sol.wilks = kInf;
  detail::finalize_scores(sol);
  return sol;
}

GelSolution solve(DivergenceKind kind, const MomentMatrix& moments, const SolverConfig& config) {
  switch (kind) {
    case DivergenceKind::EmpiricalLikelihood: return solve_el(moments, config);
    case DivergenceKind::ExponentialTilting: return solve_et(moments, config);
    case DivergenceKind::Euclidean: return solve_euclidean(moments, config);
  }
  throw GelError(ErrorCode::InvalidArgument, "unknown divergence kind");
}

}  // namespace gel
