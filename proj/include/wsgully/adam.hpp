// SPDX-License-Identifier: Apache-2.0
#ifndef WSGULLY_ADAM_HPP
#define WSGULLY_ADAM_HPP

#include <cmath>

#include <Eigen/Dense>

namespace wsgully {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
template <typename Scalar>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Adam(Eigen::Index size, AdamOptions options)
      : options_(options), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  template <typename Derived, typename GradDerived>
  void step(Eigen::MatrixBase<Derived>& params, const Eigen::MatrixBase<GradDerived>& grad) {
    ++t_;
    const auto b1 = static_cast<Scalar>(options_.beta1);
    const auto b2 = static_cast<Scalar>(options_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    const auto lr = static_cast<Scalar>(options_.learning_rate);
    const auto eps = static_cast<Scalar>(options_.epsilon);
    params -= (lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps)).matrix();
  }

  long steps() const noexcept { return t_; }

 private:
  AdamOptions options_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace wsgully

#endif  // WSGULLY_ADAM_HPP
