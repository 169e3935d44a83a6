#pragma once

// Moment-condition construction: every solver consumes an n x p matrix whose
// row i is m(x_i; c), and the expectation of a row is zero under the null.

#include "gel/common.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gel {

using Label = std::string;
using SampleId = std::int64_t;

/// n x d feature matrix with optional labels and stable ids.
struct FeatureSet {
  Matrix features;
  std::optional<std::vector<Label>> labels;
  std::vector<SampleId> ids;

  /// Builds a set with ids 0..n-1 and validates it.
  static FeatureSet from_matrix(Matrix features,
                                std::optional<std::vector<Label>> labels = std::nullopt);

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  bool has_labels() const { return labels.has_value(); }

  /// Throws GelError if any invariant is violated.
  void validate() const;

  /// Rows selected by index, labels and ids carried along.
  FeatureSet subset(const std::vector<Index>& rows) const;
};

struct WitnessSet {
  Matrix points;
  std::optional<std::vector<Label>> labels;
  std::uint64_t source_seed = 0;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

/// Label id -> root-to-leaf node names.
struct LabelHierarchy {
  std::map<Label, std::vector<std::string>> paths;

  void validate() const;
  const std::vector<std::string>& path(const Label& label) const;
};

struct ExponentialKernel {
  Index dim_normalizer = 0;
};
struct DeltaLabelKernel {};
struct HierarchyPathKernel {
  std::shared_ptr<const LabelHierarchy> hierarchy;
};
using LabelKernel = std::variant<DeltaLabelKernel, HierarchyPathKernel>;
struct ProductKernel {
  ExponentialKernel image;
  LabelKernel label;
};

using KernelSpec =
    std::variant<ExponentialKernel, DeltaLabelKernel, HierarchyPathKernel, ProductKernel>;

bool kernel_uses_labels(const KernelSpec& kernel);
bool kernel_uses_features(const KernelSpec& kernel);
std::string kernel_name(const KernelSpec& kernel);

/// A single sample as seen by a kernel.
struct SampleRef {
  Eigen::Ref<const Vector> features;
  std::optional<std::string_view> label;
};

double eval_kernel(const KernelSpec& kernel, const SampleRef& a, const SampleRef& b);

/// Smith-Waterman local alignment with match 1, mismatch 0 and free gaps.
/// With those scores the alignment value is the longest common subsequence.
int hierarchy_path_score(const std::vector<std::string>& path_a,
                         const std::vector<std::string>& path_b);

enum class MomentKind {
  Mean,
  Fid,
  MeanEmbeddingPaired,
  MeanEmbeddingVsModelMean,
  KernelEmbedding,
  UserSupplied,
};
std::string moment_kind_name(MomentKind kind);

struct MomentMatrix {
  Matrix rows;
  MomentKind provenance = MomentKind::UserSupplied;
  std::optional<Vector> target_c;
  // Set when n < p + 1; the dual Hessian is then likely degenerate.
  bool underdetermined = false;

  Index n() const { return rows.rows(); }
  Index p() const { return rows.cols(); }
};

MomentMatrix build_mean_moments(const FeatureSet& test, const Vector& model_mean);

/// Mean and upper-triangular second moment: p = d + d(d+1)/2.
MomentMatrix build_fid_moments(const FeatureSet& test, const FeatureSet& model);

/// [phi, upper triangle of phi phi^T] for every row.
Matrix fid_augment(const Matrix& features);

enum class EmbeddingMode { Paired, VsModelMean };

MomentMatrix build_me_moments(const FeatureSet& test, const FeatureSet& model,
                              const WitnessSet& witnesses, const KernelSpec& kernel,
                              EmbeddingMode mode);

/// Row i is [k(x_i, t_w)]_w; used by the two-sample tests.
Matrix kernel_embedding_rows(const FeatureSet& samples, const WitnessSet& witnesses,
                             const KernelSpec& kernel);

/// Uniform sampling without replacement, a pure function of its arguments.
WitnessSet sample_witnesses(const FeatureSet& pool, Index count, std::uint64_t seed);

MomentMatrix wrap_user_moments(Matrix matrix);

/// Fitted centering + orthogonal rotation onto the retained principal axes.
struct PcaTransform {
  Vector mean;
  Matrix components;  // d x r, orthonormal columns
  Vector singular_values;
  bool rank_deficient = false;

  // Directions with singular value below this fraction of the largest are dropped.
  static constexpr double kRelativeTolerance = 1e-6;

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return components.cols(); }
  Matrix apply(const Matrix& features) const;
  FeatureSet apply(const FeatureSet& set) const;
};

struct PcaResult {
  std::vector<FeatureSet> sets;
  PcaTransform transform;
  std::vector<std::string> warnings;
};

PcaResult pca_preprocess(const std::vector<FeatureSet>& sets);

}  // namespace gel
