// SPDX-License-Identifier: Apache-2.0
#include "wsgully/metrics.hpp"

#include <cstdio>

#include "wsgully/io.hpp"

namespace wsgully {
namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string json_metric(const Metric& m) { return m ? format_double(*m) : "null"; }

std::string cell(const Metric& m) {
  if (!m) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *m);
  return buf;
}

}  // namespace

ConfusionMatrix confusion(const GroundTruthSet& predictions, const GroundTruthSet& truth) {
  if (truth.size() == 0) throw Error("confusion matrix of an empty set");
  require_aligned(truth.location_ids, predictions.location_ids, "predictions vs ground truth");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred = predictions.labels[i] == Label::Positive;
    const bool real = truth.labels[i] == Label::Positive;
    if (pred && real) ++cm.tp;
    if (pred && !real) ++cm.fp;
    if (!pred && !real) ++cm.tn;
    if (!pred && real) ++cm.fn;
  }
  return cm;
}

Metric f1_score(Metric precision, Metric recall) {
  if (!precision || !recall || *precision + *recall <= 0.0) return std::nullopt;
  return 2.0 * *precision * *recall / (*precision + *recall);
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("metrics of an empty confusion matrix");
  MetricsReport r;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.recall = ratio(cm.tp, cm.tp + cm.fn);
  r.npv = ratio(cm.tn, cm.tn + cm.fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

Label binarize(const ClassDistribution& p, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1), got " + format_double(threshold));
  }
  return p.p_pos >= threshold ? Label::Positive : Label::Negative;
}

GroundTruthSet binarize_all(const PseudoLabelSet& labels, double threshold) {
  GroundTruthSet out;
  out.location_ids = labels.location_ids;
  out.labels.reserve(labels.size());
  for (const auto& d : labels.distributions) out.labels.push_back(binarize(d, threshold));
  return out;
}

GroundTruthSet votes_as_predictions(const std::vector<LocationId>& ids,
                                    const std::vector<Vote>& column) {
  GroundTruthSet out;
  out.location_ids = ids;
  out.labels.reserve(column.size());
  for (Vote v : column) out.labels.push_back(v == Vote::Negative ? Label::Negative : Label::Positive);
  return out;
}

std::string metrics_to_json(const MetricsReport& r, const ConfusionMatrix& cm) {
  std::string out = "{";
  out += "\"npv\":" + json_metric(r.npv);
  out += ",\"recall\":" + json_metric(r.recall);
  out += ",\"precision\":" + json_metric(r.precision);
  out += ",\"f1\":" + json_metric(r.f1);
  out += ",\"accuracy\":" + json_metric(r.accuracy);
  out += ",\"tp\":" + std::to_string(cm.tp);
  out += ",\"fp\":" + std::to_string(cm.fp);
  out += ",\"tn\":" + std::to_string(cm.tn);
  out += ",\"fn\":" + std::to_string(cm.fn);
  return out + "}\n";
}

std::string metrics_table(const std::vector<MetricsRow>& rows) {
  std::size_t name_width = 5;
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_width),
                "Model", "NPV", "Recall", "Precision", "F1", "Accuracy");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_width),
                  r.name.c_str(), cell(r.report.npv).c_str(), cell(r.report.recall).c_str(),
                  cell(r.report.precision).c_str(), cell(r.report.f1).c_str(),
                  cell(r.report.accuracy).c_str());
    out += buf;
  }
  return out;
}

}  // namespace wsgully
