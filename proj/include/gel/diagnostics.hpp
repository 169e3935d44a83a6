#pragma once

// Reports derived from per-sample GEL weights, and the synthetic fixtures
// used to validate them.

#include "gel/moment_conditions.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace gel {

struct ClassReport {
  std::map<Label, double> class_mass;
  // class_mass times the present-mode count (K when not supplied), so a
  // correctly weighted present mode displays 1.
  std::map<Label, double> rescaled;
  std::optional<std::map<Label, double>> oracle;
  std::optional<double> hellinger_to_oracle;
};

ClassReport aggregate_class_weights(const Vector& weights, const std::vector<Label>& labels,
                                    std::optional<Index> rescale_present_count = std::nullopt);

/// Sets report.oracle and the Hellinger distance between oracle and class mass.
/// Classes missing from either side count as zero mass.
void attach_oracle(ClassReport& report, const std::map<Label, double>& oracle);

/// sqrt(1 - sum sqrt(p_i q_i)) after renormalizing both inputs; in [0, 1].
double hellinger_distance(const Vector& p, const Vector& q);

struct ModeGroup {
  std::vector<Label> classes;
  double proportion = 0.0;
};

/// Either present/dropped flags (`dropped`) or explicit group proportions.
struct ModeSpec {
  std::vector<Label> classes;
  std::vector<Label> dropped;
  std::vector<ModeGroup> groups;
};

std::map<Label, double> oracle_mode_distribution(const ModeSpec& spec);

struct RankedSample {
  SampleId id;
  double weight;
};

/// Ascending by weight, ties by id.
std::vector<RankedSample> rank_samples(const Vector& weights, const std::vector<SampleId>& ids);
std::vector<RankedSample> bottom_k(const std::vector<RankedSample>& ranked, Index k);
/// Samples whose weight is at most kZeroWeight.
std::vector<RankedSample> zero_weight_samples(const std::vector<RankedSample>& ranked);
Index count_zero_weights(const Vector& weights);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

struct PrCurve {
  std::vector<PrPoint> points;  // increasing threshold
  double auc = 0.0;
};

/// Low weight predicts "corrupted". AUC is the trapezoid over recall, with
/// the curve extended flat from recall 0.
PrCurve pr_curve_from_weights(const Vector& weights, const std::vector<bool>& corrupted);

/// K unit-covariance Gaussian modes centred at s * e_k + s * 1 in R^d.
/// Labels are the decimal mode ids.
FeatureSet gen_gaussian_mixture(Index num_modes, double separation,
                                const std::vector<Index>& per_mode_counts, Index dim,
                                std::uint64_t seed);

/// Reassigns `fraction` of the labels (chosen by seed) to a different label
/// drawn uniformly from the other classes.
std::pair<FeatureSet, std::vector<bool>> corrupt_labels(const FeatureSet& set, double fraction,
                                                        std::uint64_t seed);

}  // namespace gel
