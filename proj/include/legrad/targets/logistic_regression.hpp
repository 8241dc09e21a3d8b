#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>

#include "legrad/common.hpp"
#include "legrad/target.hpp"

namespace legrad {

/// Bayesian logistic regression log joint over the weights:
/// sum_m log sigmoid(y_m z_m . w) + log N(w | 0, prior_variance I),
/// with labels in {-1, +1} and the bias column part of the design matrix.
/// The stable -log(1 + exp(-a)) form keeps every evaluation finite.
/// Probes from a pivot reuse the cached activation vector, so a
/// single-coordinate change costs O(m) instead of O(m n).
class LogisticRegressionTarget final : public TargetModel {
 public:
  LogisticRegressionTarget(Eigen::MatrixXd design, Eigen::VectorXd labels,
                           double prior_variance)
      : design_(std::move(design)), labels_(std::move(labels)), prior_variance_(prior_variance) {
    if (labels_.size() != design_.rows()) {
      throw std::invalid_argument("logistic regression: label count mismatch");
    }
    for (Eigen::Index m = 0; m < labels_.size(); ++m) {
      if (labels_[m] != 1.0 && labels_[m] != -1.0) {
        throw std::invalid_argument("logistic regression: labels must be -1 or +1");
      }
    }
    if (!(prior_variance_ > 0.0)) {
      throw std::invalid_argument("logistic regression: prior variance must be > 0");
    }
    prior_norm_ = -0.5 * design_.cols() * std::log(2.0 * M_PI * prior_variance_);
  }

  /// Appends a bias column of ones to raw features.
  static LogisticRegressionTarget with_bias(const Eigen::MatrixXd& features,
                                            Eigen::VectorXd labels, double prior_variance) {
    Eigen::MatrixXd design(features.rows(), features.cols() + 1);
    design.leftCols(features.cols()) = features;
    design.col(features.cols()).setOnes();
    return LogisticRegressionTarget(std::move(design), std::move(labels), prior_variance);
  }

  int dimension() const override { return static_cast<int>(design_.cols()); }
  int example_count() const { return static_cast<int>(design_.rows()); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double prior_variance() const { return prior_variance_; }

  double evaluate(const Assignment& w) const override {
    const Eigen::Map<const Eigen::VectorXd> wv(w.values.data(), dimension());
    const Eigen::VectorXd t = design_ * wv;
    return likelihood(t) + prior(wv.squaredNorm());
  }

  bool has_coordinate_update() const override { return true; }

  std::unique_ptr<EvalState> prepare(const Assignment& pivot) const override {
    auto state = std::make_unique<State>();
    const Eigen::Map<const Eigen::VectorXd> wv(pivot.values.data(), dimension());
    state->activations = design_ * wv;
    state->weight_norm2 = wv.squaredNorm();
    return state;
  }

  double coordinate_update(const EvalState& state, const Assignment& pivot, int i,
                           double value) const override {
    const auto& s = static_cast<const State&>(state);
    const double old = pivot[static_cast<std::size_t>(i)];
    const double d = value - old;
    double lik = 0.0;
    for (Eigen::Index m = 0; m < labels_.size(); ++m) {
      lik += log_sigmoid(labels_[m] * (s.activations[m] + d * design_(m, i)));
    }
    return lik + prior(s.weight_norm2 + value * value - old * old);
  }

  bool has_gradient() const override { return true; }

  Eigen::VectorXd gradient(const Assignment& w) const override {
    const Eigen::Map<const Eigen::VectorXd> wv(w.values.data(), dimension());
    const Eigen::VectorXd t = design_ * wv;
    Eigen::VectorXd resid(labels_.size());
    for (Eigen::Index m = 0; m < labels_.size(); ++m) {
      resid[m] = labels_[m] * (1.0 - sigmoid(labels_[m] * t[m]));
    }
    return design_.transpose() * resid - wv / prior_variance_;
  }

 private:
  struct State final : EvalState {
    Eigen::VectorXd activations;  // design * w at the pivot
    double weight_norm2 = 0.0;
  };

  double likelihood(const Eigen::VectorXd& t) const {
    double lik = 0.0;
    for (Eigen::Index m = 0; m < labels_.size(); ++m) {
      lik += log_sigmoid(labels_[m] * t[m]);
    }
    return lik;
  }

  double prior(double norm2) const {
    return prior_norm_ - 0.5 * norm2 / prior_variance_;
  }

  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  double prior_variance_ = 1.0;
  double prior_norm_ = 0.0;
};

/// Two-class Gaussian blobs with a bias column: class c has features drawn
/// from N(c * offset, I) on each coordinate, labels in {-1, +1}.
inline LogisticRegressionTarget make_synthetic_logreg(int features, int examples,
                                                      double prior_variance,
                                                      std::uint64_t seed,
                                                      double offset = 1.0) {
  RandomStream rng(seed);
  Eigen::MatrixXd x(examples, features);
  Eigen::VectorXd y(examples);
  for (int m = 0; m < examples; ++m) {
    const double label = (m % 2 == 0) ? 1.0 : -1.0;
    y[m] = label;
    for (int j = 0; j < features; ++j) {
      x(m, j) = label * offset + rng.normal();
    }
  }
  return LogisticRegressionTarget::with_bias(x, std::move(y), prior_variance);
}

}  // namespace legrad
