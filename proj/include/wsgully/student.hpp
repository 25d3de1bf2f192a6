// SPDX-License-Identifier: Apache-2.0
//
// Student classifier: an MLP over the concatenated per-image features of a location,
// trained against probabilistic pseudo-labels with the KL divergence
//
//   KL(t || p) = sum_c t_c (ln t_c - ln p_c),   0 ln 0 := 0
//
// which differs from the expected cross-entropy only by the target entropy.
#ifndef WSGULLY_STUDENT_HPP
#define WSGULLY_STUDENT_HPP

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

#include "wsgully/rng.hpp"
#include "wsgully/types.hpp"

namespace wsgully {

struct MlpConfig {
  /// Input dimension first (N * D), 2 last. Hidden layers use the rectifier.
  std::vector<std::size_t> layer_dims;
  std::uint64_t seed = 0;

  /// The single linear layer [input_dim, 2].
  static MlpConfig linear(std::size_t input_dim, std::uint64_t seed = 0) {
    return {{input_dim, 2}, seed};
  }
  void validate() const;
};

struct TrainingConfig {
  int epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// All layer weights and biases in one flat vector; layer l occupies
/// [W_l (out x in, row-major) | b_l (out)].
template <typename Scalar = double>
class MlpParams {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  MlpParams() = default;
  explicit MlpParams(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
    Eigen::Index total = 0;
    offsets_.clear();
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(total);
      total += static_cast<Eigen::Index>(dims_[l + 1] * (dims_[l] + 1));
    }
    flat_ = Vector::Zero(total);
  }

  /// Glorot-uniform weights, zero biases.
  static MlpParams initialize(const MlpConfig& config) {
    config.validate();
    MlpParams p(config.layer_dims);
    Rng rng(mix_seed(config.seed, 0x6d6c70));
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(p.in_dim(l) + p.out_dim(l)));
      auto w = p.weights(l);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = static_cast<Scalar>(bound * (2.0 * rng.uniform() - 1.0));
        }
      }
    }
    return p;
  }

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t num_layers() const noexcept { return dims_.empty() ? 0 : dims_.size() - 1; }
  Eigen::Index in_dim(std::size_t l) const noexcept { return static_cast<Eigen::Index>(dims_[l]); }
  Eigen::Index out_dim(std::size_t l) const noexcept {
    return static_cast<Eigen::Index>(dims_[l + 1]);
  }

  Eigen::Map<RowMajorMatrix> weights(std::size_t l) {
    return {flat_.data() + offsets_[l], out_dim(l), in_dim(l)};
  }
  Eigen::Map<const RowMajorMatrix> weights(std::size_t l) const {
    return {flat_.data() + offsets_[l], out_dim(l), in_dim(l)};
  }
  Eigen::Map<Vector> bias(std::size_t l) {
    return {flat_.data() + offsets_[l] + out_dim(l) * in_dim(l), out_dim(l)};
  }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    return {flat_.data() + offsets_[l] + out_dim(l) * in_dim(l), out_dim(l)};
  }

  Vector& flat() noexcept { return flat_; }
  const Vector& flat() const noexcept { return flat_; }

  bool operator==(const MlpParams& o) const { return dims_ == o.dims_ && flat_ == o.flat_; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<Eigen::Index> offsets_;
  Vector flat_;
};

namespace detail {

/// Column-wise log-softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = logits;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const Scalar mx = out.col(j).maxCoeff();
    out.col(j).array() -= mx;
    const Scalar lse = std::log(out.col(j).array().exp().sum());
    out.col(j).array() -= lse;
  }
  return out;
}

template <typename Scalar>
void check_input_rows(const MlpParams<Scalar>& params, Eigen::Index rows) {
  if (params.num_layers() == 0 || rows != params.in_dim(0)) {
    throw AlignmentError("feature length " + std::to_string(rows) + " does not match MLP input " +
                         std::to_string(params.num_layers() ? params.in_dim(0) : 0));
  }
}

}  // namespace detail

/// Output logits for a batch of inputs (one column per example).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> logits(const MlpParams<Scalar>& params,
                                                             const Eigen::MatrixBase<Derived>& x) {
  detail::check_input_rows(params, x.rows());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a = x.template cast<Scalar>();
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z = params.weights(l) * a;
    z.colwise() += params.bias(l);
    if (l + 1 < params.num_layers()) z = z.cwiseMax(Scalar(0));
    a = std::move(z);
  }
  return a;
}

template <typename Scalar, typename Derived>
ClassDistribution forward(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& features) {
  const auto log_p = detail::log_softmax(logits(params, features));
  return {static_cast<double>(std::exp(log_p(0, 0))), static_cast<double>(std::exp(log_p(1, 0)))};
}

template <typename Scalar>
ClassDistribution forward(const MlpParams<Scalar>& params, std::span<const float> features) {
  Eigen::Map<const Eigen::VectorXf> x(features.data(), static_cast<Eigen::Index>(features.size()));
  return forward(params, x);
}

/// Full KL(target || pred). Returns +infinity when pred assigns zero mass to a class the
/// target supports.
double noise_aware_loss(const ClassDistribution& pred, const ClassDistribution& target);

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

/// Mean KL over the batch and its gradient by backpropagation. `x` holds one example per
/// column, `targets` is 2 x batch with rows (p_neg, p_pos).
template <typename Scalar, typename XDerived, typename TDerived>
LossAndGradient<Scalar> loss_gradient(const MlpParams<Scalar>& params,
                                      const Eigen::MatrixBase<XDerived>& x,
                                      const Eigen::MatrixBase<TDerived>& targets) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  detail::check_input_rows(params, x.rows());
  const Eigen::Index batch = x.cols();
  if (batch == 0) throw Error("loss_gradient on an empty batch");
  if (targets.rows() != 2 || targets.cols() != batch) throw Error("target shape mismatch");

  const std::size_t layers = params.num_layers();
  std::vector<Matrix> acts;  // inputs to each layer
  acts.reserve(layers + 1);
  acts.push_back(x.template cast<Scalar>());
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = params.weights(l) * acts.back();
    z.colwise() += params.bias(l);
    if (l + 1 < layers) z = z.cwiseMax(Scalar(0));
    acts.push_back(std::move(z));
  }

  const Matrix t = targets.template cast<Scalar>();
  const Matrix log_p = detail::log_softmax(acts.back());
  Scalar loss = 0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      if (t(c, j) > Scalar(0)) loss += t(c, j) * (std::log(t(c, j)) - log_p(c, j));
    }
  }

  LossAndGradient<Scalar> out{loss / static_cast<Scalar>(batch),
                              Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(params.flat().size())};
  MlpParams<Scalar> grad(params.layer_dims());
  Matrix delta = (log_p.array().exp().matrix() - t) / static_cast<Scalar>(batch);
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights(l) = delta * acts[l].transpose();
    grad.bias(l) = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = params.weights(l).transpose() * delta;
      delta = ((acts[l].array() > Scalar(0)).template cast<Scalar>() * back.array()).matrix();
    }
  }
  out.gradient = std::move(grad.flat());
  return out;
}

// ---------------------------------------------------------------------------
// Training (double precision)

struct StudentTrainingResult {
  MlpParams<double> params;
  /// Mean KL over the training set; entry 0 is before the first update.
  std::vector<double> epoch_loss;
};

/// Adam with a seeded per-epoch shuffle. Throws AlignmentError when ids or dims disagree.
StudentTrainingResult train_student(const FeatureStore& features, const PseudoLabelSet& targets,
                                    const MlpConfig& mlp, const TrainingConfig& training);

/// Mean KL of `params` over the whole set.
double mean_loss(const MlpParams<double>& params, const FeatureStore& features,
                 const PseudoLabelSet& targets);

PseudoLabelSet predict_student(const MlpParams<double>& params, const FeatureStore& features);

std::string student_to_json(const MlpParams<double>& params);
MlpParams<double> student_from_json(const std::string& text);
void save_student(const MlpParams<double>& params, const std::filesystem::path& path);
MlpParams<double> load_student(const std::filesystem::path& path);
/// CSV `epoch,mean_loss`.
void write_loss_log(const std::vector<double>& epoch_loss, const std::filesystem::path& path);

/// Patch edge (pixels) that covers the same ground footprint as `ref_patch_px` at
/// `ref_gsd_cm`. Rounded half away from zero, clamped to >= 1.
int patch_size_for_gsd(double gsd_cm, double ref_gsd_cm, int ref_patch_px);

}  // namespace wsgully

#endif  // WSGULLY_STUDENT_HPP
