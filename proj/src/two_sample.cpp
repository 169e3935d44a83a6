#include "gel/two_sample.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace gel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double side_divergence(DivergenceKind kind, const Vector& w) {
  const double n = static_cast<double>(w.size());
  switch (kind) {
    case DivergenceKind::EmpiricalLikelihood: {
      double acc = 0.0;
      for (Index i = 0; i < w.size(); ++i) {
        if (w(i) <= 0.0) return kInf;
        acc += std::log(n * w(i));
      }
      return -acc / n;
    }
    case DivergenceKind::ExponentialTilting: {
      double acc = 0.0;
      for (Index i = 0; i < w.size(); ++i) {
        if (w(i) > 0.0) acc += w(i) * std::log(n * w(i));
      }
      return acc;
    }
    case DivergenceKind::Euclidean:
      return 0.5 * (w.array() - 1.0 / n).square().sum();
  }
  return kInf;
}

void fill_scores(TwoSampleSolution& s) {
  if (s.status == SolveStatus::HullFail || s.status == SolveStatus::DivergedInfinite) {
    s.divergence_data_nats = kInf;
    s.divergence_model_nats = kInf;
  }
  s.divergence_data_bits = s.divergence_data_nats / std::log(2.0);
  s.divergence_model_bits = s.divergence_model_nats / std::log(2.0);
  s.score_data = std::exp2(s.divergence_data_bits);
  s.score_model = std::exp2(s.divergence_model_bits);
}

TwoSampleSolution solve_euclidean_two_sample(const TwoSampleMoments& st) {
  // Separate sum-to-one rows replace the stacked augmented coordinate; the
  // feasible set is the same.
  const Index total = st.n + st.m;
  const Index p = st.stacked.cols() - 1;
  Matrix constraints = Matrix::Zero(p + 2, total);
  constraints.topRows(p) = st.stacked.leftCols(p).transpose();
  constraints.row(p).head(st.n).setOnes();
  constraints.row(p + 1).tail(st.m).setOnes();
  Vector rhs = Vector::Zero(p + 2);
  rhs(p) = 1.0;
  rhs(p + 1) = 1.0;
  Vector prior(total);
  prior.head(st.n).setConstant(1.0 / static_cast<double>(st.n));
  prior.tail(st.m).setConstant(1.0 / static_cast<double>(st.m));

  const Vector w = detail::least_distance_weights(constraints, rhs, prior);
  TwoSampleSolution s;
  s.kind = DivergenceKind::Euclidean;
  s.status = SolveStatus::Converged;
  s.pi = w.head(st.n);
  s.psi = w.tail(st.m);
  s.final_grad_norm = (st.stacked.transpose() * w).norm();
  return s;
}

}  // namespace

std::string format_score(double score) {
  if (std::isinf(score)) return score > 0 ? "+inf" : "-inf";
  if (std::isnan(score)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", score);
  return buf;
}

std::string TwoSampleSolution::score_string() const {
  return format_score(score_model) + "/" + format_score(score_data);
}

TwoSampleMoments stack_two_sample(const Matrix& data_moments, const Matrix& model_moments) {
  if (data_moments.rows() < 1 || model_moments.rows() < 1) {
    throw GelError(ErrorCode::EmptyInput, "two-sample test needs non-empty samples");
  }
  if (data_moments.cols() != model_moments.cols()) {
    throw GelError(ErrorCode::DimensionMismatch, "data and model moment dimensions differ");
  }
  if (!data_moments.allFinite() || !model_moments.allFinite()) {
    throw GelError(ErrorCode::NonFinite, "two-sample moments have non-finite entries");
  }
  const Index n = data_moments.rows();
  const Index m = model_moments.rows();
  const Index p = data_moments.cols();
  TwoSampleMoments st;
  st.n = n;
  st.m = m;
  st.unequal_sizes = n != m;
  st.stacked.resize(n + m, p + 1);
  st.stacked.topLeftCorner(n, p) = data_moments;
  st.stacked.topRightCorner(n, 1).setOnes();
  st.stacked.bottomLeftCorner(m, p) = -model_moments;
  st.stacked.bottomRightCorner(m, 1).setConstant(-1.0);
  return st;
}

TwoSampleSolution solve_two_sample(const TwoSampleMoments& st, DivergenceKind divergence,
                                   const SolverConfig& config) {
  if (st.n < 1 || st.m < 1 || st.stacked.rows() != st.n + st.m) {
    throw GelError(ErrorCode::DimensionMismatch, "malformed stacked two-sample moments");
  }
  if (!st.stacked.allFinite()) {
    throw GelError(ErrorCode::NonFinite, "stacked moments have non-finite entries");
  }

  TwoSampleSolution out;
  if (divergence == DivergenceKind::Euclidean) {
    config.validate();
    out = solve_euclidean_two_sample(st);
  } else {
    const MomentMatrix stacked = wrap_user_moments(st.stacked);
    const GelSolution xi = solve(divergence, stacked, config);
    out.kind = divergence;
    out.status = xi.status;
    out.dual = xi.dual;
    out.iterations = xi.iterations;
    out.final_grad_norm = xi.final_grad_norm;
    out.hull = xi.hull;
    out.warnings = xi.warnings;
    out.pi = 2.0 * xi.weights.head(st.n);
    out.psi = 2.0 * xi.weights.tail(st.m);
    if (xi.status == SolveStatus::Converged || xi.status == SolveStatus::MaxIterations) {
      // The split is exact only up to the gradient tolerance.
      out.pi /= out.pi.sum();
      out.psi /= out.psi.sum();
    }
  }
  if (st.unequal_sizes) {
    out.warnings.push_back(
        "data and model sizes differ; per-side divergences carry O(1/n) bias and are not "
        "directly comparable");
  }
  if (out.status == SolveStatus::Converged || out.status == SolveStatus::MaxIterations) {
    out.divergence_data_nats = side_divergence(divergence, out.pi);
    out.divergence_model_nats = side_divergence(divergence, out.psi);
  }
  fill_scores(out);
  return out;
}

TwoSampleSolution kgel2(const FeatureSet& data, const FeatureSet& model,
                        const WitnessSet& witnesses, const KernelSpec& kernel,
                        DivergenceKind divergence, const SolverConfig& config) {
  const Matrix kx = kernel_embedding_rows(data, witnesses, kernel);
  const Matrix ky = kernel_embedding_rows(model, witnesses, kernel);
  return solve_two_sample(stack_two_sample(kx, ky), divergence, config);
}

}  // namespace gel
