#include "gel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace gel {

ClassReport aggregate_class_weights(const Vector& weights, const std::vector<Label>& labels,
                                    std::optional<Index> rescale_present_count) {
  if (static_cast<Index>(labels.size()) != weights.size()) {
    throw GelError(ErrorCode::DimensionMismatch, "label and weight lengths differ");
  }
  ClassReport report;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    report.class_mass[labels[i]] += weights(static_cast<Index>(i));
  }
  const double factor = static_cast<double>(
      rescale_present_count.value_or(static_cast<Index>(report.class_mass.size())));
  for (const auto& [label, mass] : report.class_mass) report.rescaled[label] = mass * factor;
  return report;
}

void attach_oracle(ClassReport& report, const std::map<Label, double>& oracle) {
  std::set<Label> keys;
  for (const auto& kv : oracle) keys.insert(kv.first);
  for (const auto& kv : report.class_mass) keys.insert(kv.first);
  Vector p(static_cast<Index>(keys.size())), q(static_cast<Index>(keys.size()));
  Index i = 0;
  for (const auto& k : keys) {
    auto a = oracle.find(k);
    auto b = report.class_mass.find(k);
    p(i) = a == oracle.end() ? 0.0 : a->second;
    q(i) = b == report.class_mass.end() ? 0.0 : std::max(0.0, b->second);
    ++i;
  }
  report.oracle = oracle;
  report.hellinger_to_oracle = hellinger_distance(p, q);
}

double hellinger_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    throw GelError(ErrorCode::DimensionMismatch, "Hellinger inputs have different lengths");
  }
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw GelError(ErrorCode::InvalidArgument, "Hellinger inputs must be non-negative");
  }
  const double sp = p.sum();
  const double sq = q.sum();
  if (!(sp > 0.0) || !(sq > 0.0)) {
    throw GelError(ErrorCode::InvalidArgument, "Hellinger inputs must have positive mass");
  }
  const double affinity = ((p / sp).array() * (q / sq).array()).sqrt().sum();
  return std::sqrt(std::clamp(1.0 - affinity, 0.0, 1.0));
}

std::map<Label, double> oracle_mode_distribution(const ModeSpec& spec) {
  std::map<Label, double> out;
  for (const auto& c : spec.classes) out[c] = 0.0;
  if (!spec.groups.empty()) {
    double total = 0.0;
    for (const auto& g : spec.groups) {
      if (g.classes.empty() || g.proportion < 0.0) {
        throw GelError(ErrorCode::InvalidArgument, "mode groups need classes and a proportion");
      }
      for (const auto& c : g.classes) {
        out[c] += g.proportion / static_cast<double>(g.classes.size());
      }
      total += g.proportion;
    }
    if (!(total > 0.0)) throw GelError(ErrorCode::InvalidArgument, "all mode groups are empty");
    for (auto& kv : out) kv.second /= total;
    return out;
  }
  const std::set<Label> dropped(spec.dropped.begin(), spec.dropped.end());
  Index present = 0;
  for (const auto& c : spec.classes) present += dropped.count(c) ? 0 : 1;
  if (present == 0) throw GelError(ErrorCode::InvalidArgument, "every class is dropped");
  for (const auto& c : spec.classes) {
    out[c] = dropped.count(c) ? 0.0 : 1.0 / static_cast<double>(present);
  }
  return out;
}

std::vector<RankedSample> rank_samples(const Vector& weights, const std::vector<SampleId>& ids) {
  if (static_cast<Index>(ids.size()) != weights.size()) {
    throw GelError(ErrorCode::DimensionMismatch, "weight and id lengths differ");
  }
  std::vector<RankedSample> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({ids[i], weights(static_cast<Index>(i))});
  }
  std::sort(out.begin(), out.end(), [](const RankedSample& a, const RankedSample& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.id < b.id;
  });
  return out;
}

std::vector<RankedSample> bottom_k(const std::vector<RankedSample>& ranked, Index k) {
  if (k < 0 || k > static_cast<Index>(ranked.size())) {
    throw GelError(ErrorCode::InvalidArgument, "bottom-k larger than the number of samples");
  }
  return {ranked.begin(), ranked.begin() + k};
}

std::vector<RankedSample> zero_weight_samples(const std::vector<RankedSample>& ranked) {
  std::vector<RankedSample> out;
  for (const auto& r : ranked) {
    if (r.weight <= kZeroWeight) out.push_back(r);
  }
  return out;
}

Index count_zero_weights(const Vector& weights) {
  return static_cast<Index>((weights.array() <= kZeroWeight).count());
}

PrCurve pr_curve_from_weights(const Vector& weights, const std::vector<bool>& corrupted) {
  if (static_cast<Index>(corrupted.size()) != weights.size()) {
    throw GelError(ErrorCode::DimensionMismatch, "weight and flag lengths differ");
  }
  const auto positives = static_cast<Index>(std::count(corrupted.begin(), corrupted.end(), true));
  if (positives == 0 || positives == weights.size()) {
    throw GelError(ErrorCode::InvalidArgument,
                   "PR curve needs both corrupted and clean samples");
  }
  std::vector<Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return weights(a) < weights(b); });

  PrCurve curve;
  Index predicted = 0;
  Index hits = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = weights(order[k]);
    while (k < order.size() && weights(order[k]) == threshold) {
      ++predicted;
      hits += corrupted[static_cast<std::size_t>(order[k])] ? 1 : 0;
      ++k;
    }
    curve.points.push_back({threshold, static_cast<double>(hits) / static_cast<double>(predicted),
                            static_cast<double>(hits) / static_cast<double>(positives)});
  }

  double prev_recall = 0.0;
  double prev_precision = curve.points.front().precision;
  for (const auto& pt : curve.points) {
    curve.auc += (pt.recall - prev_recall) * 0.5 * (pt.precision + prev_precision);
    prev_recall = pt.recall;
    prev_precision = pt.precision;
  }
  return curve;
}

FeatureSet gen_gaussian_mixture(Index num_modes, double separation,
                                const std::vector<Index>& per_mode_counts, Index dim,
                                std::uint64_t seed) {
  if (num_modes < 1 || num_modes > dim) {
    throw GelError(ErrorCode::InvalidArgument, "mixture needs 1 <= modes <= dimension");
  }
  if (static_cast<Index>(per_mode_counts.size()) != num_modes) {
    throw GelError(ErrorCode::DimensionMismatch, "one count per mode is required");
  }
  Index total = 0;
  for (Index c : per_mode_counts) {
    if (c < 0) throw GelError(ErrorCode::InvalidArgument, "negative mode count");
    total += c;
  }
  if (total == 0) throw GelError(ErrorCode::EmptyInput, "mixture with no samples");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(total, dim);
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(total));
  Index row = 0;
  for (Index k = 0; k < num_modes; ++k) {
    for (Index i = 0; i < per_mode_counts[static_cast<std::size_t>(k)]; ++i, ++row) {
      for (Index j = 0; j < dim; ++j) {
        x(row, j) = separation * (1.0 + (j == k ? 1.0 : 0.0)) + noise(rng);
      }
      labels.push_back(std::to_string(k));
    }
  }
  return FeatureSet::from_matrix(std::move(x), std::move(labels));
}

std::pair<FeatureSet, std::vector<bool>> corrupt_labels(const FeatureSet& set, double fraction,
                                                        std::uint64_t seed) {
  if (!set.labels) throw GelError(ErrorCode::MissingLabels, "cannot corrupt missing labels");
  if (fraction < 0.0 || fraction > 1.0) {
    throw GelError(ErrorCode::InvalidArgument, "corruption fraction must be in [0, 1]");
  }
  std::vector<Label> classes = *set.labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw GelError(ErrorCode::InvalidArgument, "label corruption needs at least two classes");
  }

  const auto n = static_cast<std::size_t>(set.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto flipped = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  FeatureSet out = set;
  std::vector<bool> corrupted(n, false);
  std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 2);
  for (std::size_t k = 0; k < flipped; ++k) {
    const std::size_t i = order[k];
    const Label& old = (*set.labels)[i];
    std::size_t choice = pick(rng);
    // Skip over the original label so every flip changes the class.
    const auto old_pos =
        static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), old) - classes.begin());
    if (choice >= old_pos) ++choice;
    (*out.labels)[i] = classes[choice];
    corrupted[i] = true;
  }
  return {std::move(out), std::move(corrupted)};
}

}  // namespace gel
