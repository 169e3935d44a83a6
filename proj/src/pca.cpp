#include "gel/moment_conditions.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace gel {

Matrix PcaTransform::apply(const Matrix& features) const {
  if (features.cols() != input_dim()) {
    throw GelError(ErrorCode::DimensionMismatch, "PCA input dimension mismatch");
  }
  return (features.rowwise() - mean.transpose()) * components;
}

FeatureSet PcaTransform::apply(const FeatureSet& set) const {
  FeatureSet out = set;
  out.features = apply(set.features);
  return out;
}

PcaResult pca_preprocess(const std::vector<FeatureSet>& sets) {
  if (sets.empty()) throw GelError(ErrorCode::EmptyInput, "no feature sets for PCA");
  const Index d = sets.front().dim();
  Index total = 0;
  for (const auto& s : sets) {
    if (s.dim() != d) {
      throw GelError(ErrorCode::DimensionMismatch, "PCA inputs have different dimensions");
    }
    total += s.size();
  }
  if (total == 0) throw GelError(ErrorCode::EmptyInput, "PCA inputs are empty");

  Matrix stacked(total, d);
  Index row = 0;
  for (const auto& s : sets) {
    stacked.middleRows(row, s.size()) = s.features;
    row += s.size();
  }

  PcaTransform t;
  t.mean = stacked.colwise().mean().transpose();
  stacked.rowwise() -= t.mean.transpose();
  const Matrix scatter = stacked.transpose() * stacked;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter);
  // Eigenvalues come back ascending; flip to descending order.
  const Vector values = eig.eigenvalues().reverse();
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const Vector sv = values.cwiseMax(0.0).cwiseSqrt();

  const double cutoff = PcaTransform::kRelativeTolerance * (sv.size() ? sv(0) : 0.0);
  Index keep = 0;
  while (keep < sv.size() && sv(keep) > cutoff) ++keep;
  if (keep == 0) keep = 1;  // constant data: keep the leading axis

  t.components = vectors.leftCols(keep);
  t.singular_values = sv.head(keep);
  t.rank_deficient = keep < d;

  PcaResult result;
  result.transform = t;
  if (t.rank_deficient) {
    result.warnings.push_back("PCA: feature covariance is rank deficient; kept " +
                              std::to_string(keep) + " of " + std::to_string(d) +
                              " directions");
  }
  for (const auto& s : sets) result.sets.push_back(t.apply(s));
  return result;
}

}  // namespace gel
