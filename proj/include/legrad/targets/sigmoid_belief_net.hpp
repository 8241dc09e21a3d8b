#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>

#include "legrad/common.hpp"
#include "legrad/target.hpp"

namespace legrad {

/// One-layer sigmoid belief network likelihood: given binary observations
/// y_i in {0,1}^D and hidden vector x in {0,1}^K, each pixel d is Bernoulli
/// with success probability sigmoid(w_d . [x; 1]). The prior over x is
/// uniform. W is D x (K+1) with the bias in the last column.
class SigmoidBeliefNetTarget {
 public:
  SigmoidBeliefNetTarget(Eigen::MatrixXd w, Eigen::MatrixXd data)
      : w_(std::move(w)), data_(std::move(data)) {
    if (w_.cols() < 2) throw std::invalid_argument("sbn: W needs at least one hidden column");
    if (data_.cols() != w_.rows()) {
      throw std::invalid_argument("sbn: data width must match W rows");
    }
    if (((data_.array() != 0.0) && (data_.array() != 1.0)).any()) {
      throw std::invalid_argument("sbn: data entries must be binary");
    }
  }

  int visible() const { return static_cast<int>(w_.rows()); }
  int hidden() const { return static_cast<int>(w_.cols()) - 1; }
  int data_count() const { return static_cast<int>(data_.rows()); }
  const Eigen::MatrixXd& weights() const { return w_; }
  const Eigen::MatrixXd& data() const { return data_; }

  void set_weights(const Eigen::MatrixXd& w) {
    if (w.rows() != w_.rows() || w.cols() != w_.cols()) {
      throw std::invalid_argument("sbn: weight shape change");
    }
    w_ = w;
  }

  /// Per-pixel activations w_d . [x; 1] for hidden vector x.
  Eigen::VectorXd activations(const Assignment& x) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x.values.data(), hidden());
    return w_.leftCols(hidden()) * xv + w_.col(hidden());
  }

  /// log p(y_i | x) = sum_d [y log sigma + (1-y) log(1-sigma)], computed in
  /// the saturating-safe form -log(1 + exp(-ytilde a)).
  double log_likelihood(int i, const Assignment& x) const {
    return log_likelihood_at(i, activations(x));
  }

  double log_likelihood_at(int i, const Eigen::VectorXd& activations_vec) const {
    double total = 0.0;
    for (int d = 0; d < visible(); ++d) {
      const double ytilde = data_(i, d) != 0.0 ? 1.0 : -1.0;
      total -= log1p_exp(-ytilde * activations_vec[d]);
    }
    return total;
  }

  /// d log p(y_i | x) / d W: row d is (y_d - sigma(a_d)) [x; 1].
  Eigen::MatrixXd w_gradient(int i, const Assignment& x) const {
    const Eigen::VectorXd a = activations(x);
    Eigen::VectorXd resid(visible());
    for (int d = 0; d < visible(); ++d) resid[d] = data_(i, d) - sigmoid(a[d]);
    Eigen::VectorXd xb(hidden() + 1);
    for (int k = 0; k < hidden(); ++k) xb[k] = x[static_cast<std::size_t>(k)];
    xb[hidden()] = 1.0;
    return resid * xb.transpose();
  }

 private:
  Eigen::MatrixXd w_;     // D x (K+1)
  Eigen::MatrixXd data_;  // N x D, binary
};

/// Per-datum view of the belief-net likelihood as a target over the hidden
/// vector. Probes from a pivot reuse the cached activation vector: flipping
/// one hidden unit shifts every activation by one column of W.
class SbnDatumTarget final : public TargetModel {
 public:
  SbnDatumTarget(const SigmoidBeliefNetTarget& sbn, int datum) : sbn_(sbn), datum_(datum) {}

  int dimension() const override { return sbn_.hidden(); }

  double evaluate(const Assignment& x) const override {
    return sbn_.log_likelihood(datum_, x);
  }

  bool has_coordinate_update() const override { return true; }

  std::unique_ptr<EvalState> prepare(const Assignment& pivot) const override {
    auto state = std::make_unique<State>();
    state->activations = sbn_.activations(pivot);
    return state;
  }

  double coordinate_update(const EvalState& state, const Assignment& pivot, int k,
                           double value) const override {
    const auto& s = static_cast<const State&>(state);
    const double d = value - pivot[static_cast<std::size_t>(k)];
    if (d == 0.0) return sbn_.log_likelihood_at(datum_, s.activations);
    const Eigen::VectorXd a = s.activations + d * sbn_.weights().col(k);
    return sbn_.log_likelihood_at(datum_, a);
  }

 private:
  struct State final : EvalState {
    Eigen::VectorXd activations;
  };

  const SigmoidBeliefNetTarget& sbn_;
  int datum_;
};

/// Noisy-prototype binary patterns: `prototypes` random binary templates,
/// each datum copies one with independent bit flips.
inline Eigen::MatrixXd synthetic_binary_patterns(int count, int dims, int prototypes,
                                                 double flip_prob, std::uint64_t seed) {
  RandomStream rng(seed);
  Eigen::MatrixXd protos(prototypes, dims);
  for (int p = 0; p < prototypes; ++p) {
    for (int d = 0; d < dims; ++d) protos(p, d) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  Eigen::MatrixXd data(count, dims);
  for (int i = 0; i < count; ++i) {
    const int p = i % prototypes;
    for (int d = 0; d < dims; ++d) {
      const bool flip = rng.uniform() < flip_prob;
      data(i, d) = flip ? 1.0 - protos(p, d) : protos(p, d);
    }
  }
  return data;
}

}  // namespace legrad
