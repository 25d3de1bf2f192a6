// SPDX-License-Identifier: Apache-2.0
#include "wsgully/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "wsgully/adam.hpp"
#include "wsgully/io.hpp"

namespace wsgully {

void CorrelationSet::validate(std::size_t num_lfs) const {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [j, d] : pairs) {
    if (j >= d) {
      throw ConfigError("correlation pair (" + std::to_string(j) + ", " + std::to_string(d) +
                        ") must satisfy j < d");
    }
    if (d >= num_lfs) {
      throw ConfigError("correlation pair (" + std::to_string(j) + ", " + std::to_string(d) +
                        ") out of range for " + std::to_string(num_lfs) + " labeling functions");
    }
    if (!seen.insert({j, d}).second) {
      throw ConfigError("duplicate correlation pair (" + std::to_string(j) + ", " +
                        std::to_string(d) + ")");
    }
  }
}

CorrelationComponents correlation_components(std::size_t num_lfs, const CorrelationSet& corr,
                                             std::size_t max_component_size) {
  corr.validate(num_lfs);
  std::vector<std::size_t> parent(num_lfs);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [j, d] : corr.pairs) {
    const auto a = find(j);
    const auto b = find(d);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  CorrelationComponents out;
  std::vector<std::size_t> slot(num_lfs, num_lfs);
  for (std::size_t j = 0; j < num_lfs; ++j) {
    const auto root = find(j);
    if (slot[root] == num_lfs) {
      slot[root] = out.members.size();
      out.members.emplace_back();
      out.pairs.emplace_back();
    }
    out.members[slot[root]].push_back(j);
  }
  for (std::size_t p = 0; p < corr.pairs.size(); ++p) {
    out.pairs[slot[find(corr.pairs[p].first)]].push_back(p);
  }
  for (const auto& m : out.members) {
    if (m.size() > max_component_size) {
      throw ConfigError("correlation component of " + std::to_string(m.size()) +
                        " labeling functions exceeds max_component_size = " +
                        std::to_string(max_component_size) + "; raise the limit to allow it");
    }
  }
  return out;
}

void LabelModelConfig::validate() const {
  if (epochs < 1) throw ConfigError("label_model.epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("label_model.learning_rate must be positive");
  if (max_component_size < 1) throw ConfigError("label_model.max_component_size must be >= 1");
}

TrainedLabelModel fit(const LabelMatrix& matrix, const LabelModelConfig& config) {
  config.validate();
  config.correlations.validate(matrix.cols());
  if (matrix.rows() == 0 || matrix.cols() == 0) throw Error("no signal to fit: empty label matrix");
  const bool any_vote = std::any_of(matrix.votes().begin(), matrix.votes().end(),
                                    [](Vote v) { return v != Vote::Abstain; });
  if (!any_vote) throw Error("no signal to fit: every vote is an abstain");

  auto w = FactorWeights<double>::initial(matrix.cols(), config.correlations.size());
  Adam<double> adam(w.size(), {config.learning_rate, config.beta1, config.beta2, config.epsilon});

  TrainedLabelModel model;
  model.lf_names = matrix.lf_names();
  model.correlations = config.correlations;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto step = nll_with_gradient(w, matrix, config.correlations, config.max_component_size);
    if (epoch == 0) model.initial_nll = step.value;
    adam.step(w.flat(), step.gradient);
  }
  model.final_nll = nll(w, matrix, config.correlations, config.max_component_size);
  model.weights = std::move(w);
  return model;
}

ClassDistribution predict_proba(const TrainedLabelModel& model, std::span<const Vote> votes) {
  return predict_proba(model.weights, votes);
}

PseudoLabelSet predict_all(const TrainedLabelModel& model, const LabelMatrix& matrix) {
  detail::check_columns(model.num_lfs(), matrix);
  PseudoLabelSet out;
  out.location_ids = matrix.location_ids();
  out.distributions.reserve(matrix.rows());
  for (std::size_t k = 0; k < matrix.rows(); ++k) {
    out.distributions.push_back(predict_proba(model.weights, matrix.row(k)));
  }
  return out;
}

GroundTruthSet majority_vote(const LabelMatrix& matrix) {
  GroundTruthSet out;
  out.location_ids = matrix.location_ids();
  out.labels.reserve(matrix.rows());
  for (std::size_t k = 0; k < matrix.rows(); ++k) {
    long balance = 0;
    for (Vote v : matrix.row(k)) {
      if (v == Vote::Positive) ++balance;
      if (v == Vote::Negative) --balance;
    }
    out.labels.push_back(balance >= 0 ? Label::Positive : Label::Negative);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

template <typename Derived>
std::string number_array(const Eigen::MatrixBase<Derived>& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v(i));
  }
  return out + "]";
}

}  // namespace

std::string label_model_to_json(const TrainedLabelModel& model) {
  const auto& w = model.weights;
  std::string out = "{\"lf_names\":";
  out += nlohmann::json(model.lf_names).dump();
  out += ",\"w_lab\":" + number_array(w.lab());
  out += ",\"w_acc\":" + number_array(w.acc());
  out += ",\"corr_pairs\":[";
  for (std::size_t c = 0; c < model.correlations.size(); ++c) {
    if (c) out += ',';
    out += "[" + std::to_string(model.correlations.pairs[c].first) + "," +
           std::to_string(model.correlations.pairs[c].second) + "]";
  }
  out += "],\"w_corr\":" + number_array(w.corr());
  out += ",\"final_nll\":" + format_double(model.final_nll) + "}\n";
  return out;
}

TrainedLabelModel label_model_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("label model checkpoint: ") + e.what());
  }
  try {
    TrainedLabelModel model;
    model.lf_names = doc.at("lf_names").get<std::vector<std::string>>();
    const auto lab = doc.at("w_lab").get<std::vector<double>>();
    const auto acc = doc.at("w_acc").get<std::vector<double>>();
    const auto pairs = doc.at("corr_pairs").get<std::vector<std::array<std::size_t, 2>>>();
    const auto corr = doc.at("w_corr").get<std::vector<double>>();
    model.final_nll = doc.at("final_nll").get<double>();

    const std::size_t m = model.lf_names.size();
    if (lab.size() != m || acc.size() != m || corr.size() != pairs.size()) {
      throw ParseError("label model checkpoint: weight dimensions do not match");
    }
    for (const auto& p : pairs) model.correlations.pairs.emplace_back(p[0], p[1]);
    model.correlations.validate(m);

    model.weights = FactorWeights<double>(m, pairs.size());
    for (std::size_t j = 0; j < m; ++j) {
      model.weights.flat()(model.weights.lab_index(j)) = lab[j];
      model.weights.flat()(model.weights.acc_index(j)) = acc[j];
    }
    for (std::size_t c = 0; c < corr.size(); ++c) {
      model.weights.flat()(model.weights.corr_index(c)) = corr[c];
    }
    if (!model.weights.flat().allFinite()) {
      throw ParseError("label model checkpoint: non-finite weight");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("label model checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("label model checkpoint: ") + e.what());
  }
}

void save_label_model(const TrainedLabelModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, label_model_to_json(model));
}

TrainedLabelModel load_label_model(const std::filesystem::path& path) {
  return label_model_from_json(read_text_file(path));
}

}  // namespace wsgully
