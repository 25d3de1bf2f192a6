// SPDX-License-Identifier: Apache-2.0
#include "wsgully/student.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "wsgully/adam.hpp"
#include "wsgully/io.hpp"

namespace wsgully {
namespace {

using FloatMatrixMap = Eigen::Map<const Eigen::MatrixXf>;

/// One column per location, viewing the store's float payload in place.
FloatMatrixMap feature_columns(const FeatureStore& store) {
  return {store.values().data(), static_cast<Eigen::Index>(store.row_length()),
          static_cast<Eigen::Index>(store.rows())};
}

Eigen::MatrixXd target_columns(const PseudoLabelSet& targets) {
  Eigen::MatrixXd t(2, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    t(0, static_cast<Eigen::Index>(k)) = targets.distributions[k].p_neg;
    t(1, static_cast<Eigen::Index>(k)) = targets.distributions[k].p_pos;
  }
  return t;
}

void check_student_inputs(const FeatureStore& features, const PseudoLabelSet& targets,
                          const MlpConfig& mlp) {
  require_aligned(features.location_ids(), targets.location_ids, "pseudo-labels vs features");
  if (mlp.layer_dims.front() != features.row_length()) {
    throw AlignmentError("MLP input dimension " + std::to_string(mlp.layer_dims.front()) +
                         " does not match N * D = " + std::to_string(features.row_length()));
  }
}

constexpr Eigen::Index kEvalChunk = 1024;

}  // namespace

void MlpConfig::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least two entries");
  if (layer_dims.back() != 2) throw ConfigError("last entry of layer_dims must be 2");
  for (auto d : layer_dims) {
    if (d == 0) throw ConfigError("layer_dims entries must be positive");
  }
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("student.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("student.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("student.learning_rate must be positive");
}

double noise_aware_loss(const ClassDistribution& pred, const ClassDistribution& target) {
  const double t[2] = {target.p_neg, target.p_pos};
  const double p[2] = {pred.p_neg, pred.p_pos};
  double kl = 0.0;
  for (int c = 0; c < 2; ++c) {
    if (t[c] <= 0.0) continue;
    if (p[c] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += t[c] * (std::log(t[c]) - std::log(p[c]));
  }
  return kl;
}

double mean_loss(const MlpParams<double>& params, const FeatureStore& features,
                 const PseudoLabelSet& targets) {
  require_aligned(features.location_ids(), targets.location_ids, "pseudo-labels vs features");
  if (targets.size() == 0) return 0.0;
  const auto x = feature_columns(features);
  const auto t = target_columns(targets);
  double total = 0.0;
  for (Eigen::Index start = 0; start < x.cols(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.cols() - start);
    const auto log_p = detail::log_softmax(logits(params, x.middleCols(start, n)));
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const double tc = t(c, start + j);
        if (tc > 0.0) total += tc * (std::log(tc) - log_p(c, j));
      }
    }
  }
  return total / static_cast<double>(targets.size());
}

StudentTrainingResult train_student(const FeatureStore& features, const PseudoLabelSet& targets,
                                    const MlpConfig& mlp, const TrainingConfig& training) {
  mlp.validate();
  training.validate();
  check_student_inputs(features, targets, mlp);
  if (features.rows() == 0) throw Error("cannot train the student on an empty set");

  StudentTrainingResult result{MlpParams<double>::initialize(mlp), {}};
  auto& params = result.params;
  Adam<double> adam(params.flat().size(), {training.learning_rate, training.beta1, training.beta2,
                                           training.epsilon});

  const auto x = feature_columns(features);
  const auto t = target_columns(targets);
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(mix_seed(training.seed, 0x73687566));

  Eigen::MatrixXd xb;
  Eigen::MatrixXd tb;
  result.epoch_loss.push_back(mean_loss(params, features, targets));
  for (int epoch = 0; epoch < training.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < n; start += training.batch_size) {
      const std::size_t b = std::min(training.batch_size, n - start);
      xb.resize(x.rows(), static_cast<Eigen::Index>(b));
      tb.resize(2, static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) {
        xb.col(static_cast<Eigen::Index>(i)) = x.col(order[start + i]).cast<double>();
        tb.col(static_cast<Eigen::Index>(i)) = t.col(order[start + i]);
      }
      const auto step = loss_gradient(params, xb, tb);
      adam.step(params.flat(), step.gradient);
    }
    result.epoch_loss.push_back(mean_loss(params, features, targets));
  }
  return result;
}

PseudoLabelSet predict_student(const MlpParams<double>& params, const FeatureStore& features) {
  const auto x = feature_columns(features);
  PseudoLabelSet out;
  out.location_ids = features.location_ids();
  out.distributions.reserve(features.rows());
  for (Eigen::Index start = 0; start < x.cols(); start += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.cols() - start);
    const auto log_p = detail::log_softmax(logits(params, x.middleCols(start, n)));
    for (Eigen::Index j = 0; j < n; ++j) {
      out.distributions.push_back({std::exp(log_p(0, j)), std::exp(log_p(1, j))});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

std::string student_to_json(const MlpParams<double>& params) {
  std::string out = "{\"layer_dims\":[";
  for (std::size_t i = 0; i < params.layer_dims().size(); ++i) {
    if (i) out += ',';
    out += std::to_string(params.layer_dims()[i]);
  }
  out += "],\"layers\":[";
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    if (l) out += ',';
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    out += "{\"rows\":" + std::to_string(w.rows()) + ",\"cols\":" + std::to_string(w.cols()) +
           ",\"weights\":[";
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (i) out += ',';
      out += format_double(w.data()[i]);
    }
    out += "],\"bias\":[";
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      if (i) out += ',';
      out += format_double(b(i));
    }
    out += "]}";
  }
  return out + "]}\n";
}

MlpParams<double> student_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    MlpConfig cfg{doc.at("layer_dims").get<std::vector<std::size_t>>(), 0};
    cfg.validate();
    MlpParams<double> params(cfg.layer_dims);
    const auto& layers = doc.at("layers");
    if (layers.size() != params.num_layers()) throw ParseError("layer count mismatch");
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
      const auto& layer = layers[l];
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const auto w = layer.at("weights").get<std::vector<double>>();
      const auto b = layer.at("bias").get<std::vector<double>>();
      if (rows != params.out_dim(l) || cols != params.in_dim(l) ||
          w.size() != static_cast<std::size_t>(rows * cols) ||
          b.size() != static_cast<std::size_t>(rows)) {
        throw ParseError("layer " + std::to_string(l) + " shape mismatch");
      }
      std::copy(w.begin(), w.end(), params.weights(l).data());
      std::copy(b.begin(), b.end(), params.bias(l).data());
    }
    if (!params.flat().allFinite()) throw ParseError("non-finite parameter");
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("student checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("student checkpoint: ") + e.what());
  } catch (const ParseError& e) {
    throw ParseError(std::string("student checkpoint: ") + e.what());
  }
}

void save_student(const MlpParams<double>& params, const std::filesystem::path& path) {
  write_file_atomic(path, student_to_json(params));
}

MlpParams<double> load_student(const std::filesystem::path& path) {
  return student_from_json(read_text_file(path));
}

void write_loss_log(const std::vector<double>& epoch_loss, const std::filesystem::path& path) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    out += std::to_string(e) + "," + format_double(epoch_loss[e]) + "\n";
  }
  write_file_atomic(path, out);
}

int patch_size_for_gsd(double gsd_cm, double ref_gsd_cm, int ref_patch_px) {
  if (!(gsd_cm > 0.0) || !(ref_gsd_cm > 0.0) || ref_patch_px <= 0) {
    throw ConfigError("patch_size_for_gsd requires positive inputs");
  }
  const double exact = static_cast<double>(ref_patch_px) * ref_gsd_cm / gsd_cm;
  return static_cast<int>(std::max(1L, std::lround(exact)));
}

}  // namespace wsgully
