#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>

#include "legrad/target.hpp"

namespace legrad {

/// Multivariate Gaussian log density log N(x | m, Sigma). The default
/// construction places n inputs on a uniform grid in [0, 10] and builds the
/// squared-exponential covariance Sigma_ij = exp(-0.5 (t_i - t_j)^2) +
/// 0.1 delta_ij with mean vector of all 2s; the smallest eigenvalue is then
/// roughly 0.1. Probes from a pivot cost O(1) after an O(n^2) state build.
class CorrelatedGaussianTarget final : public TargetModel {
 public:
  explicit CorrelatedGaussianTarget(int n)
      : CorrelatedGaussianTarget(Eigen::VectorXd::Constant(n, 2.0), kernel_covariance(n)) {}

  CorrelatedGaussianTarget(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const int n = static_cast<int>(mean_.size());
    if (covariance_.rows() != n || covariance_.cols() != n) {
      throw std::invalid_argument("correlated gaussian: covariance shape mismatch");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("correlated gaussian: covariance not positive definite");
    }
    precision_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
    log_det_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    norm_const_ = -0.5 * (n * std::log(2.0 * M_PI) + log_det_);
  }

  int dimension() const override { return static_cast<int>(mean_.size()); }

  double evaluate(const Assignment& x) const override {
    const Eigen::Map<const Eigen::VectorXd> xv(x.values.data(), dimension());
    const Eigen::VectorXd r = xv - mean_;
    return norm_const_ - 0.5 * r.dot(precision_ * r);
  }

  bool has_coordinate_update() const override { return true; }

  std::unique_ptr<EvalState> prepare(const Assignment& pivot) const override {
    auto state = std::make_unique<State>();
    const Eigen::Map<const Eigen::VectorXd> xv(pivot.values.data(), dimension());
    state->residual_precision = precision_ * (xv - mean_);
    state->quad = (xv - mean_).dot(state->residual_precision);
    return state;
  }

  double coordinate_update(const EvalState& state, const Assignment& pivot, int i,
                           double value) const override {
    const auto& s = static_cast<const State&>(state);
    const double d = value - pivot[static_cast<std::size_t>(i)];
    const double quad = s.quad + d * (2.0 * s.residual_precision[i] + d * precision_(i, i));
    return norm_const_ - 0.5 * quad;
  }

  bool has_gradient() const override { return true; }

  Eigen::VectorXd gradient(const Assignment& x) const override {
    const Eigen::Map<const Eigen::VectorXd> xv(x.values.data(), dimension());
    return -(precision_ * (xv - mean_));
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  double log_det() const { return log_det_; }

  static Eigen::MatrixXd kernel_covariance(int n) {
    Eigen::VectorXd grid(n);
    for (int i = 0; i < n; ++i) {
      grid[i] = n > 1 ? 10.0 * i / (n - 1) : 0.0;
    }
    Eigen::MatrixXd sigma(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double d = grid[i] - grid[j];
        sigma(i, j) = std::exp(-0.5 * d * d) + (i == j ? 0.1 : 0.0);
      }
    }
    return sigma;
  }

 private:
  struct State final : EvalState {
    Eigen::VectorXd residual_precision;  // P (x - m)
    double quad = 0.0;                   // (x - m)' P (x - m)
  };

  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
  double norm_const_ = 0.0;
};

}  // namespace legrad
