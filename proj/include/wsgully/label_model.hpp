// SPDX-License-Identifier: Apache-2.0
//
// Generative label model over (votes, latent class):
//
//   p_w(lambda, y) = exp(w . phi(lambda, y)) / Z_w
//
// with one "labeled" factor 1{lambda_j != abstain} and one "accuracy" factor
// 1{lambda_j == y} per labeling function, plus one "correlation" factor
// 1{lambda_j == lambda_d} per user-supplied pair (j, d). Z_w is computed exactly
// by enumerating each connected component of the correlation graph, so fitting
// is plain gradient descent on the exact negative log marginal likelihood.
#ifndef WSGULLY_LABEL_MODEL_HPP
#define WSGULLY_LABEL_MODEL_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wsgully/types.hpp"

namespace wsgully {

/// Pairs (j, d), j < d, of labeling-function columns whose agreement is modeled.
struct CorrelationSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  /// Throws ConfigError on out-of-range, unordered or duplicate pairs.
  void validate(std::size_t num_lfs) const;
  bool operator==(const CorrelationSet&) const = default;
};

/// Flat parameter vector laid out as [lab_1..lab_m, acc_1..acc_m, corr_1..corr_|C|].
template <typename Scalar = double>
class FactorWeights {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  FactorWeights() = default;
  FactorWeights(std::size_t num_lfs, std::size_t num_corr)
      : num_lfs_(num_lfs), theta_(Vector::Zero(static_cast<Eigen::Index>(2 * num_lfs + num_corr))) {}

  /// Fit starting point: accuracy weights 1, everything else 0.
  static FactorWeights initial(std::size_t num_lfs, std::size_t num_corr) {
    FactorWeights w(num_lfs, num_corr);
    w.acc().setOnes();
    return w;
  }

  std::size_t num_lfs() const noexcept { return num_lfs_; }
  std::size_t num_corr() const noexcept {
    return static_cast<std::size_t>(theta_.size()) - 2 * num_lfs_;
  }
  Eigen::Index size() const noexcept { return theta_.size(); }

  auto lab() { return theta_.head(m()); }
  auto lab() const { return theta_.head(m()); }
  auto acc() { return theta_.segment(m(), m()); }
  auto acc() const { return theta_.segment(m(), m()); }
  auto corr() { return theta_.tail(theta_.size() - 2 * m()); }
  auto corr() const { return theta_.tail(theta_.size() - 2 * m()); }

  Vector& flat() noexcept { return theta_; }
  const Vector& flat() const noexcept { return theta_; }

  Eigen::Index lab_index(std::size_t j) const noexcept { return static_cast<Eigen::Index>(j); }
  Eigen::Index acc_index(std::size_t j) const noexcept { return m() + static_cast<Eigen::Index>(j); }
  Eigen::Index corr_index(std::size_t c) const noexcept {
    return 2 * m() + static_cast<Eigen::Index>(c);
  }

  template <typename Other>
  FactorWeights<Other> cast() const {
    FactorWeights<Other> out(num_lfs_, num_corr());
    out.flat() = theta_.template cast<Other>();
    return out;
  }

  bool operator==(const FactorWeights&) const = default;

 private:
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(num_lfs_); }

  std::size_t num_lfs_ = 0;
  Vector theta_;
};

/// Connected components of the correlation graph over labeling functions. Every
/// labeling function belongs to exactly one component (singletons included).
struct CorrelationComponents {
  std::vector<std::vector<std::size_t>> members;
  /// Indices into CorrelationSet::pairs, per component.
  std::vector<std::vector<std::size_t>> pairs;
};

inline constexpr std::size_t kDefaultMaxComponentSize = 12;

/// Throws ConfigError when a component exceeds `max_component_size` labeling functions.
CorrelationComponents correlation_components(std::size_t num_lfs, const CorrelationSet& corr,
                                             std::size_t max_component_size);

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(Scalar a, Scalar b) {
  const Scalar hi = a > b ? a : b;
  const Scalar lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

constexpr Vote kVoteStates[3] = {Vote::Abstain, Vote::Negative, Vote::Positive};
constexpr std::array<Label, 2> kClasses = {Label::Negative, Label::Positive};

}  // namespace detail

/// Factor vector phi(votes, y) of length 2m + |C|. Two abstains count as agreement.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> featurize(std::span<const Vote> votes, Label y,
                                                   const CorrelationSet& corr) {
  const std::size_t m = votes.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phi =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(2 * m + corr.size()));
  const Vote target = to_vote(y);
  for (std::size_t j = 0; j < m; ++j) {
    if (votes[j] != Vote::Abstain) phi(static_cast<Eigen::Index>(j)) = Scalar(1);
    if (votes[j] == target) phi(static_cast<Eigen::Index>(m + j)) = Scalar(1);
  }
  for (std::size_t c = 0; c < corr.size(); ++c) {
    const auto [j, d] = corr.pairs[c];
    if (votes[j] == votes[d]) phi(static_cast<Eigen::Index>(2 * m + c)) = Scalar(1);
  }
  return phi;
}

/// Reference partition function: enumerates all 2 * 3^m joint configurations.
/// Intended as a test oracle; throws Error for m > 8.
template <typename Scalar = double>
Scalar brute_force_partition(const FactorWeights<Scalar>& w, const CorrelationSet& corr) {
  const std::size_t m = w.num_lfs();
  if (m > 8) throw Error("brute_force_partition supports at most 8 labeling functions");
  std::size_t configs = 1;
  for (std::size_t j = 0; j < m; ++j) configs *= 3;
  std::vector<Vote> votes(m);
  Scalar z = 0;
  for (Label y : detail::kClasses) {
    for (std::size_t code = 0; code < configs; ++code) {
      std::size_t rest = code;
      for (std::size_t j = 0; j < m; ++j) {
        votes[j] = detail::kVoteStates[rest % 3];
        rest /= 3;
      }
      z += std::exp(w.flat().dot(featurize<Scalar>(votes, y, corr)));
    }
  }
  return z;
}

/// log Z_w together with the model expectation E_{p_w}[phi].
template <typename Scalar>
struct ModelMoments {
  Scalar log_partition;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> expected_factors;
};

template <typename Scalar = double>
ModelMoments<Scalar> model_moments(const FactorWeights<Scalar>& w, const CorrelationSet& corr,
                                   std::size_t max_component_size = kDefaultMaxComponentSize) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto comps = correlation_components(w.num_lfs(), corr, max_component_size);

  std::array<Scalar, 2> log_joint{Scalar(0), Scalar(0)};
  std::array<Vector, 2> conditional{Vector::Zero(w.size()), Vector::Zero(w.size())};

  std::vector<Scalar> scores;
  std::vector<Vote> local;
  for (std::size_t c = 0; c < comps.members.size(); ++c) {
    const auto& members = comps.members[c];
    const auto& pair_ids = comps.pairs[c];
    const std::size_t s = members.size();
    std::size_t configs = 1;
    for (std::size_t i = 0; i < s; ++i) configs *= 3;
    scores.resize(configs);
    local.resize(s);

    // Position of each member inside `local`, for pair lookup.
    auto local_of = [&](std::size_t lf) {
      for (std::size_t i = 0; i < s; ++i) {
        if (members[i] == lf) return i;
      }
      return s;
    };
    std::vector<std::pair<std::size_t, std::size_t>> local_pairs;
    for (std::size_t p : pair_ids) {
      local_pairs.emplace_back(local_of(corr.pairs[p].first), local_of(corr.pairs[p].second));
    }

    for (std::size_t yi = 0; yi < 2; ++yi) {
      const Vote target = to_vote(detail::kClasses[yi]);
      auto decode = [&](std::size_t code) {
        for (std::size_t i = 0; i < s; ++i) {
          local[i] = detail::kVoteStates[code % 3];
          code /= 3;
        }
      };

      Scalar max_score = -std::numeric_limits<Scalar>::infinity();
      for (std::size_t code = 0; code < configs; ++code) {
        decode(code);
        Scalar score = 0;
        for (std::size_t i = 0; i < s; ++i) {
          if (local[i] != Vote::Abstain) score += w.flat()(w.lab_index(members[i]));
          if (local[i] == target) score += w.flat()(w.acc_index(members[i]));
        }
        for (std::size_t p = 0; p < local_pairs.size(); ++p) {
          if (local[local_pairs[p].first] == local[local_pairs[p].second]) {
            score += w.flat()(w.corr_index(pair_ids[p]));
          }
        }
        scores[code] = score;
        if (score > max_score) max_score = score;
      }

      Scalar total = 0;
      for (std::size_t code = 0; code < configs; ++code) total += std::exp(scores[code] - max_score);
      log_joint[yi] += max_score + std::log(total);

      Vector& cond = conditional[yi];
      for (std::size_t code = 0; code < configs; ++code) {
        const Scalar p = std::exp(scores[code] - max_score) / total;
        decode(code);
        for (std::size_t i = 0; i < s; ++i) {
          if (local[i] != Vote::Abstain) cond(w.lab_index(members[i])) += p;
          if (local[i] == target) cond(w.acc_index(members[i])) += p;
        }
        for (std::size_t q = 0; q < local_pairs.size(); ++q) {
          if (local[local_pairs[q].first] == local[local_pairs[q].second]) {
            cond(w.corr_index(pair_ids[q])) += p;
          }
        }
      }
    }
  }

  ModelMoments<Scalar> out;
  out.log_partition = detail::log_sum_exp(log_joint[0], log_joint[1]);
  out.expected_factors = std::exp(log_joint[0] - out.log_partition) * conditional[0] +
                         std::exp(log_joint[1] - out.log_partition) * conditional[1];
  return out;
}

template <typename Scalar = double>
Scalar log_partition_function(const FactorWeights<Scalar>& w, const CorrelationSet& corr,
                              std::size_t max_component_size = kDefaultMaxComponentSize) {
  return model_moments(w, corr, max_component_size).log_partition;
}

/// Exact Z_w via component factorization.
template <typename Scalar = double>
Scalar partition_function(const FactorWeights<Scalar>& w, const CorrelationSet& corr,
                          std::size_t max_component_size = kDefaultMaxComponentSize) {
  return std::exp(log_partition_function(w, corr, max_component_size));
}

namespace detail {

/// Sum of accuracy weights of the LFs voting Positive minus those voting Negative.
/// This is score(y = Positive) - score(y = Negative); Lab and Corr factors cancel.
template <typename Derived>
typename Derived::Scalar vote_margin(const Eigen::MatrixBase<Derived>& acc,
                                     std::span<const Vote> votes) {
  typename Derived::Scalar margin = 0;
  for (std::size_t j = 0; j < votes.size(); ++j) {
    const auto a = acc(static_cast<Eigen::Index>(j));
    if (votes[j] == Vote::Positive) {
      margin += a;
    } else if (votes[j] == Vote::Negative) {
      margin += -a;
    }
  }
  return margin;
}

template <typename Scalar>
Scalar row_common_score(const FactorWeights<Scalar>& w, std::span<const Vote> votes,
                        const CorrelationSet& corr) {
  Scalar s = 0;
  for (std::size_t j = 0; j < votes.size(); ++j) {
    if (votes[j] != Vote::Abstain) s += w.flat()(w.lab_index(j));
  }
  for (std::size_t c = 0; c < corr.size(); ++c) {
    if (votes[corr.pairs[c].first] == votes[corr.pairs[c].second]) s += w.flat()(w.corr_index(c));
  }
  return s;
}

template <typename Scalar>
Scalar row_acc_score(const FactorWeights<Scalar>& w, std::span<const Vote> votes, Vote target) {
  Scalar s = 0;
  for (std::size_t j = 0; j < votes.size(); ++j) {
    if (votes[j] == target) s += w.flat()(w.acc_index(j));
  }
  return s;
}

inline void check_columns(std::size_t expected, const LabelMatrix& matrix) {
  if (matrix.cols() != expected) {
    throw AlignmentError("label matrix has " + std::to_string(matrix.cols()) +
                         " columns, model expects " + std::to_string(expected));
  }
}

}  // namespace detail

/// Negative log marginal likelihood: -sum_k log sum_y exp(w . phi(row_k, y)) + K log Z_w.
template <typename Scalar = double>
Scalar nll(const FactorWeights<Scalar>& w, const LabelMatrix& matrix, const CorrelationSet& corr,
           std::size_t max_component_size = kDefaultMaxComponentSize) {
  detail::check_columns(w.num_lfs(), matrix);
  const Scalar log_z = log_partition_function(w, corr, max_component_size);
  Scalar total = 0;
  for (std::size_t k = 0; k < matrix.rows(); ++k) {
    const auto row = matrix.row(k);
    const Scalar common = detail::row_common_score(w, row, corr);
    const Scalar pos = detail::row_acc_score(w, row, Vote::Positive);
    const Scalar neg = detail::row_acc_score(w, row, Vote::Negative);
    total += log_z - (common + detail::log_sum_exp(pos, neg));
  }
  return total;
}

template <typename Scalar>
struct NllWithGradient {
  Scalar value;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

/// NLL and its gradient K * E_model[phi] - sum_k E_{y | row_k}[phi(row_k, y)] in one pass.
template <typename Scalar = double>
NllWithGradient<Scalar> nll_with_gradient(const FactorWeights<Scalar>& w, const LabelMatrix& matrix,
                                          const CorrelationSet& corr,
                                          std::size_t max_component_size = kDefaultMaxComponentSize) {
  detail::check_columns(w.num_lfs(), matrix);
  const auto moments = model_moments(w, corr, max_component_size);
  const auto rows = static_cast<Scalar>(matrix.rows());

  NllWithGradient<Scalar> out{Scalar(0), rows * moments.expected_factors};
  for (std::size_t k = 0; k < matrix.rows(); ++k) {
    const auto row = matrix.row(k);
    const Scalar common = detail::row_common_score(w, row, corr);
    const Scalar pos = detail::row_acc_score(w, row, Vote::Positive);
    const Scalar neg = detail::row_acc_score(w, row, Vote::Negative);
    const Scalar lse = detail::log_sum_exp(pos, neg);
    out.value += moments.log_partition - (common + lse);

    const Scalar p_pos = std::exp(pos - lse);
    const Scalar p_neg = std::exp(neg - lse);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == Vote::Abstain) continue;
      out.gradient(w.lab_index(j)) -= Scalar(1);
      out.gradient(w.acc_index(j)) -= row[j] == Vote::Positive ? p_pos : p_neg;
    }
    for (std::size_t c = 0; c < corr.size(); ++c) {
      if (row[corr.pairs[c].first] == row[corr.pairs[c].second]) {
        out.gradient(w.corr_index(c)) -= Scalar(1);
      }
    }
  }
  return out;
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nll_gradient(
    const FactorWeights<Scalar>& w, const LabelMatrix& matrix, const CorrelationSet& corr,
    std::size_t max_component_size = kDefaultMaxComponentSize) {
  return nll_with_gradient(w, matrix, corr, max_component_size).gradient;
}

/// Posterior p(y | votes) = logistic(margin). Only accuracy weights enter.
template <typename Scalar = double>
ClassDistribution predict_proba(const FactorWeights<Scalar>& w, std::span<const Vote> votes) {
  if (votes.size() != w.num_lfs()) {
    throw AlignmentError("vote row has " + std::to_string(votes.size()) + " entries, model expects " +
                         std::to_string(w.num_lfs()));
  }
  const double margin = static_cast<double>(detail::vote_margin(w.acc(), votes));
  return {1.0 / (1.0 + std::exp(margin)), 1.0 / (1.0 + std::exp(-margin))};
}

// ---------------------------------------------------------------------------
// Fitting and inference (double precision)

struct LabelModelConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  CorrelationSet correlations;
  std::size_t max_component_size = kDefaultMaxComponentSize;

  /// Throws ConfigError on epochs < 1 or non-positive learning rate.
  void validate() const;
};

struct TrainedLabelModel {
  std::vector<std::string> lf_names;
  FactorWeights<double> weights;
  CorrelationSet correlations;
  double final_nll = 0.0;
  /// NLL at the initialization (not serialized).
  double initial_nll = 0.0;

  std::size_t num_lfs() const noexcept { return lf_names.size(); }
};

/// Full-batch Adam on the exact NLL. Deterministic given (matrix, config).
TrainedLabelModel fit(const LabelMatrix& matrix, const LabelModelConfig& config);

ClassDistribution predict_proba(const TrainedLabelModel& model, std::span<const Vote> votes);
PseudoLabelSet predict_all(const TrainedLabelModel& model, const LabelMatrix& matrix);

/// Plain majority over non-abstaining votes; ties and all-abstain rows go Positive.
GroundTruthSet majority_vote(const LabelMatrix& matrix);

std::string label_model_to_json(const TrainedLabelModel& model);
TrainedLabelModel label_model_from_json(const std::string& text);
void save_label_model(const TrainedLabelModel& model, const std::filesystem::path& path);
TrainedLabelModel load_label_model(const std::filesystem::path& path);

}  // namespace wsgully

#endif  // WSGULLY_LABEL_MODEL_HPP
