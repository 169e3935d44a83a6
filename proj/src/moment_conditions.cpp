#include "gel/moment_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace gel {

namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw GelError(code, message);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Maps each label to a dense code so label kernels become table lookups.
struct LabelCodes {
  std::vector<Label> names;
  std::vector<int> a_codes;
  std::vector<int> b_codes;
};

LabelCodes encode_labels(const std::vector<Label>& a, const std::vector<Label>& b) {
  LabelCodes codes;
  std::unordered_map<Label, int> index;
  auto code_of = [&](const Label& label) {
    auto [it, inserted] = index.emplace(label, static_cast<int>(codes.names.size()));
    if (inserted) codes.names.push_back(label);
    return it->second;
  };
  codes.a_codes.reserve(a.size());
  codes.b_codes.reserve(b.size());
  for (const auto& l : a) codes.a_codes.push_back(code_of(l));
  for (const auto& l : b) codes.b_codes.push_back(code_of(l));
  return codes;
}

Matrix label_factor(const LabelKernel& kernel, const std::vector<Label>& a,
                    const std::vector<Label>& b) {
  const LabelCodes codes = encode_labels(a, b);
  const auto k = static_cast<Index>(codes.names.size());
  Matrix table = Matrix::Zero(k, k);
  std::visit(overloaded{
                 [&](const DeltaLabelKernel&) { table.setIdentity(); },
                 [&](const HierarchyPathKernel& h) {
                   require(h.hierarchy != nullptr, ErrorCode::InvalidArgument,
                           "hierarchy kernel without a label hierarchy");
                   for (Index i = 0; i < k; ++i) {
                     const auto& pi = h.hierarchy->path(codes.names[i]);
                     for (Index j = i; j < k; ++j) {
                       const auto& pj = h.hierarchy->path(codes.names[j]);
                       table(i, j) = table(j, i) = hierarchy_path_score(pi, pj);
                     }
                   }
                 },
             },
             kernel);
  Matrix out(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      out(i, j) = table(codes.a_codes[i], codes.b_codes[j]);
    }
  }
  return out;
}

Matrix exponential_gram(const ExponentialKernel& kernel, const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorCode::DimensionMismatch,
          "kernel inputs have different feature dimensions");
  require(kernel.dim_normalizer == a.cols(), ErrorCode::InvalidArgument,
          "exponential kernel normalizer must equal the feature dimension");
  Matrix g = a * b.transpose();
  g /= static_cast<double>(kernel.dim_normalizer);
  return g.array().exp().matrix();
}

const std::vector<Label>& labels_or_throw(const std::optional<std::vector<Label>>& labels,
                                          const char* what) {
  require(labels.has_value(), ErrorCode::MissingLabels,
          std::string("label kernel requires labels on the ") + what);
  return *labels;
}

// K(i, w) = k(samples_i, witness_w).
Matrix gram(const KernelSpec& kernel, const Matrix& x,
            const std::optional<std::vector<Label>>& x_labels, const Matrix& t,
            const std::optional<std::vector<Label>>& t_labels) {
  return std::visit(
      overloaded{
          [&](const ExponentialKernel& k) { return exponential_gram(k, x, t); },
          [&](const DeltaLabelKernel& k) {
            return label_factor(LabelKernel{k}, labels_or_throw(x_labels, "samples"),
                                labels_or_throw(t_labels, "witnesses"));
          },
          [&](const HierarchyPathKernel& k) {
            return label_factor(LabelKernel{k}, labels_or_throw(x_labels, "samples"),
                                labels_or_throw(t_labels, "witnesses"));
          },
          [&](const ProductKernel& k) {
            Matrix image = exponential_gram(k.image, x, t);
            Matrix label = label_factor(k.label, labels_or_throw(x_labels, "samples"),
                                        labels_or_throw(t_labels, "witnesses"));
            return Matrix(image.cwiseProduct(label));
          },
      },
      kernel);
}

void check_witness_dims(const FeatureSet& set, const WitnessSet& witnesses,
                        const KernelSpec& kernel) {
  if (kernel_uses_features(kernel)) {
    require(set.dim() == witnesses.dim(), ErrorCode::DimensionMismatch,
            "witness dimension does not match the feature dimension");
  }
  require(witnesses.size() >= 1, ErrorCode::EmptyInput, "witness set is empty");
}

MomentMatrix finish(Matrix rows, MomentKind kind, std::optional<Vector> target) {
  require(rows.rows() >= 1 && rows.cols() >= 1, ErrorCode::EmptyInput, "empty moment matrix");
  require(rows.allFinite(), ErrorCode::NonFinite, "moment matrix has non-finite entries");
  MomentMatrix m;
  m.underdetermined = rows.rows() < rows.cols() + 1;
  m.rows = std::move(rows);
  m.provenance = kind;
  m.target_c = std::move(target);
  return m;
}

}  // namespace

FeatureSet FeatureSet::from_matrix(Matrix features, std::optional<std::vector<Label>> labels) {
  FeatureSet set;
  set.ids.resize(static_cast<std::size_t>(features.rows()));
  std::iota(set.ids.begin(), set.ids.end(), SampleId{0});
  set.features = std::move(features);
  set.labels = std::move(labels);
  set.validate();
  return set;
}

void FeatureSet::validate() const {
  require(features.rows() >= 1, ErrorCode::EmptyInput, "feature set has no samples");
  require(features.cols() >= 1, ErrorCode::EmptyInput, "feature set has zero dimension");
  require(features.allFinite(), ErrorCode::NonFinite, "feature set has non-finite entries");
  if (labels) {
    require(static_cast<Index>(labels->size()) == size(), ErrorCode::DimensionMismatch,
            "label count does not match the number of samples");
  }
  require(static_cast<Index>(ids.size()) == size(), ErrorCode::DimensionMismatch,
          "id count does not match the number of samples");
  std::set<SampleId> seen(ids.begin(), ids.end());
  require(seen.size() == ids.size(), ErrorCode::InvalidArgument, "sample ids are not unique");
}

FeatureSet FeatureSet::subset(const std::vector<Index>& rows) const {
  FeatureSet out;
  out.features.resize(static_cast<Index>(rows.size()), dim());
  if (labels) out.labels.emplace();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    require(i >= 0 && i < size(), ErrorCode::InvalidArgument, "subset index out of range");
    out.features.row(static_cast<Index>(r)) = features.row(i);
    out.ids.push_back(ids[static_cast<std::size_t>(i)]);
    if (labels) out.labels->push_back((*labels)[static_cast<std::size_t>(i)]);
  }
  return out;
}

void LabelHierarchy::validate() const {
  for (const auto& [label, nodes] : paths) {
    require(!nodes.empty(), ErrorCode::Parse, "empty hierarchy path for label " + label);
    require(nodes.back() == label, ErrorCode::Parse,
            "hierarchy path for " + label + " does not end at the label itself");
  }
}

const std::vector<std::string>& LabelHierarchy::path(const Label& label) const {
  auto it = paths.find(label);
  require(it != paths.end(), ErrorCode::MissingLabels, "label not in hierarchy: " + label);
  return it->second;
}

bool kernel_uses_labels(const KernelSpec& kernel) {
  return !std::holds_alternative<ExponentialKernel>(kernel);
}

bool kernel_uses_features(const KernelSpec& kernel) {
  return std::holds_alternative<ExponentialKernel>(kernel) ||
         std::holds_alternative<ProductKernel>(kernel);
}

std::string kernel_name(const KernelSpec& kernel) {
  return std::visit(overloaded{
                        [](const ExponentialKernel&) { return std::string("exponential"); },
                        [](const DeltaLabelKernel&) { return std::string("delta"); },
                        [](const HierarchyPathKernel&) { return std::string("hierarchy"); },
                        [](const ProductKernel& k) {
                          return std::holds_alternative<DeltaLabelKernel>(k.label)
                                     ? std::string("product-delta")
                                     : std::string("product-hierarchy");
                        },
                    },
                    kernel);
}

double eval_kernel(const KernelSpec& kernel, const SampleRef& a, const SampleRef& b) {
  auto labels_of = [](const SampleRef& s) -> std::optional<std::vector<Label>> {
    if (!s.label) return std::nullopt;
    return std::vector<Label>{Label(*s.label)};
  };
  if (kernel_uses_features(kernel)) {
    require(a.features.size() == b.features.size(), ErrorCode::DimensionMismatch,
            "kernel inputs have different feature dimensions");
  }
  const Matrix xa = a.features.transpose();
  const Matrix xb = b.features.transpose();
  return gram(kernel, xa, labels_of(a), xb, labels_of(b))(0, 0);
}

int hierarchy_path_score(const std::vector<std::string>& path_a,
                         const std::vector<std::string>& path_b) {
  // Local alignment DP; with zero mismatch and gap costs no cell ever drops
  // below zero, so the best local score is the bottom-right cell.
  const std::size_t n = path_a.size();
  const std::size_t m = path_b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  int best = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const int match = path_a[i - 1] == path_b[j - 1] ? 1 : 0;
      cur[j] = std::max({0, prev[j - 1] + match, prev[j], cur[j - 1]});
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

std::string moment_kind_name(MomentKind kind) {
  switch (kind) {
    case MomentKind::Mean: return "mean";
    case MomentKind::Fid: return "fid";
    case MomentKind::MeanEmbeddingPaired: return "me-paired";
    case MomentKind::MeanEmbeddingVsModelMean: return "me-vs-model-mean";
    case MomentKind::KernelEmbedding: return "kernel-embedding";
    case MomentKind::UserSupplied: return "user";
  }
  return "unknown";
}

MomentMatrix build_mean_moments(const FeatureSet& test, const Vector& model_mean) {
  require(test.size() >= 1, ErrorCode::EmptyInput, "test set is empty");
  require(model_mean.size() == test.dim(), ErrorCode::DimensionMismatch,
          "model mean dimension does not match the test features");
  Matrix rows = test.features.rowwise() - model_mean.transpose();
  return finish(std::move(rows), MomentKind::Mean, model_mean);
}

Matrix fid_augment(const Matrix& features) {
  const Index d = features.cols();
  const Index p = d + d * (d + 1) / 2;
  Matrix out(features.rows(), p);
  out.leftCols(d) = features;
  Index col = d;
  for (Index a = 0; a < d; ++a) {
    for (Index b = a; b < d; ++b) {
      out.col(col++) = features.col(a).cwiseProduct(features.col(b));
    }
  }
  return out;
}

MomentMatrix build_fid_moments(const FeatureSet& test, const FeatureSet& model) {
  require(test.size() >= 1 && model.size() >= 1, ErrorCode::EmptyInput,
          "FID moments need non-empty test and model sets");
  require(test.dim() == model.dim(), ErrorCode::DimensionMismatch,
          "test and model feature dimensions differ");
  const Vector c = fid_augment(model.features).colwise().mean().transpose();
  Matrix rows = fid_augment(test.features).rowwise() - c.transpose();
  return finish(std::move(rows), MomentKind::Fid, c);
}

Matrix kernel_embedding_rows(const FeatureSet& samples, const WitnessSet& witnesses,
                             const KernelSpec& kernel) {
  check_witness_dims(samples, witnesses, kernel);
  return gram(kernel, samples.features, samples.labels, witnesses.points, witnesses.labels);
}

MomentMatrix build_me_moments(const FeatureSet& test, const FeatureSet& model,
                              const WitnessSet& witnesses, const KernelSpec& kernel,
                              EmbeddingMode mode) {
  require(test.size() >= 1 && model.size() >= 1, ErrorCode::EmptyInput,
          "mean-embedding moments need non-empty test and model sets");
  if (kernel_uses_features(kernel)) {
    require(test.dim() == model.dim(), ErrorCode::DimensionMismatch,
            "test and model feature dimensions differ");
  }
  const Matrix kx = kernel_embedding_rows(test, witnesses, kernel);
  const Matrix ky = kernel_embedding_rows(model, witnesses, kernel);
  if (mode == EmbeddingMode::Paired) {
    require(test.size() == model.size(), ErrorCode::DimensionMismatch,
            "paired mean-embedding moments need equally sized sets");
    return finish(kx - ky, MomentKind::MeanEmbeddingPaired, std::nullopt);
  }
  const Vector c = ky.colwise().mean().transpose();
  Matrix rows = kx.rowwise() - c.transpose();
  return finish(std::move(rows), MomentKind::MeanEmbeddingVsModelMean, c);
}

WitnessSet sample_witnesses(const FeatureSet& pool, Index count, std::uint64_t seed) {
  require(count >= 1, ErrorCode::InvalidArgument, "witness count must be positive");
  require(count <= pool.size(), ErrorCode::InvalidArgument,
          "witness count exceeds the pool size");
  std::vector<Index> order(static_cast<std::size_t>(pool.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, pool.size() - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  WitnessSet w;
  w.source_seed = seed;
  w.points.resize(count, pool.dim());
  if (pool.labels) w.labels.emplace();
  for (Index i = 0; i < count; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    w.points.row(i) = pool.features.row(src);
    if (pool.labels) w.labels->push_back((*pool.labels)[static_cast<std::size_t>(src)]);
  }
  return w;
}

MomentMatrix wrap_user_moments(Matrix matrix) {
  return finish(std::move(matrix), MomentKind::UserSupplied, std::nullopt);
}

}  // namespace gel
