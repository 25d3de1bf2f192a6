// SPDX-License-Identifier: Apache-2.0
#ifndef WSGULLY_METRICS_HPP
#define WSGULLY_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsgully/types.hpp"

namespace wsgully {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// A metric that is std::nullopt when its ratio is 0/0.
using Metric = std::optional<double>;

struct MetricsReport {
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
  Metric npv;
};

/// Positive is the positive class. Throws AlignmentError on id mismatch, Error on empty input.
ConfusionMatrix confusion(const GroundTruthSet& predictions, const GroundTruthSet& truth);

/// Throws Error when the matrix is empty.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Harmonic mean; nullopt unless both inputs are defined and their sum is positive.
Metric f1_score(Metric precision, Metric recall);

/// Positive iff p_pos >= threshold. Throws ConfigError for thresholds outside (0, 1).
Label binarize(const ClassDistribution& p, double threshold = 0.5);
GroundTruthSet binarize_all(const PseudoLabelSet& labels, double threshold = 0.5);

/// Treats abstains as Positive, matching the tie rule used everywhere else.
GroundTruthSet votes_as_predictions(const std::vector<LocationId>& ids,
                                    const std::vector<Vote>& column);

/// {"npv":..,"recall":..,"precision":..,"f1":..,"accuracy":..,"tp":..,...}; undefined -> null.
std::string metrics_to_json(const MetricsReport& report, const ConfusionMatrix& cm);

/// Aligned text table: NPV, Recall, Precision, F1, Accuracy; undefined -> "n/a".
struct MetricsRow {
  std::string name;
  MetricsReport report;
};
std::string metrics_table(const std::vector<MetricsRow>& rows);

}  // namespace wsgully

#endif  // WSGULLY_METRICS_HPP
