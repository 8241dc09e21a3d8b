#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "legrad/common.hpp"

namespace legrad {

/// A full configuration of the n latent coordinates. Continuous coordinates
/// hold reals; discrete coordinates hold a state index stored as a double.
struct Assignment {
  std::vector<double> values;

  Assignment() = default;
  explicit Assignment(std::size_t n) : values(n, 0.0) {}
  explicit Assignment(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  int state(std::size_t i) const { return static_cast<int>(values[i]); }

  bool operator==(const Assignment& other) const = default;
};

/// Gaussian N(mu, ell^2) with the scale parametrized directly as the
/// standard deviation ell. Tunable parameters: (mu, ell).
struct GaussianLocationScale {
  double mu = 0.0;
  double ell = 1.0;
};

/// Conditional categorical factor. One row of state probabilities per
/// configuration of the (discrete) parents; a parentless factor has a single
/// row. The tunable parameters are the logits, so the stored distribution is
/// softmax(row) and scores have mean zero under the factor itself.
struct Categorical {
  Eigen::MatrixXd logits;  // rows: parent configurations, cols: states
};

/// Bernoulli whose success probability is sigmoid(weights . [input; 1]).
/// The input is the data vector the factor conditions on, fixed at
/// construction; the weight vector (bias last) is tunable and may be shared
/// across factors through the model's parameter layout.
struct RecognitionBernoulli {
  Eigen::VectorXd weights;  // length D + 1
  Eigen::VectorXd input;    // length D
};

using FactorKind = std::variant<GaussianLocationScale, Categorical, RecognitionBernoulli>;

/// Builds a parentless categorical factor from a probability vector.
inline Categorical categorical_from_weights(const Eigen::VectorXd& weights) {
  if (weights.size() < 1) throw ModelError("categorical: needs at least one state");
  const double total = weights.sum();
  if (std::abs(total - 1.0) > 1e-12 || (weights.array() < 0.0).any()) {
    throw ModelError("categorical: weights must be nonnegative and sum to 1");
  }
  Categorical c;
  c.logits = weights.array().log().matrix().transpose();  // 1 x K
  return c;
}

/// Builds a conditional categorical factor from a CPT whose rows are the
/// per-parent-configuration simplex vectors.
inline Categorical categorical_from_table(const Eigen::MatrixXd& table) {
  if (table.rows() < 1 || table.cols() < 1) throw ModelError("categorical: empty table");
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    if (std::abs(table.row(r).sum() - 1.0) > 1e-12 || (table.row(r).array() < 0.0).any()) {
      throw ModelError("categorical: CPT row " + std::to_string(r) +
                       " must be a probability vector");
    }
  }
  Categorical c;
  c.logits = table.array().log().matrix();
  return c;
}

/// Plain Bernoulli(p) as a recognition factor with empty input, so its one
/// tunable parameter is the natural parameter a with p = sigmoid(a).
inline RecognitionBernoulli bernoulli_factor(double p) {
  p = clamp_prob(p);
  RecognitionBernoulli b;
  b.weights = Eigen::VectorXd::Constant(1, std::log(p / (1.0 - p)));
  b.input = Eigen::VectorXd(0);
  return b;
}

/// One conditional factor of the variational distribution: the distribution
/// family plus its tunable parameters. Conditioning on parents is expressed
/// through a parent-configuration row index computed by the model
/// (parentless factors always use row 0).
class Factor {
 public:
  explicit Factor(GaussianLocationScale g) : kind_(g) { validate(); }
  explicit Factor(Categorical c) : kind_(std::move(c)) { validate(); }
  explicit Factor(RecognitionBernoulli b) : kind_(std::move(b)) {
    validate();
    refresh_activation();
  }

  const FactorKind& kind() const { return kind_; }

  bool is_discrete() const {
    return !std::holds_alternative<GaussianLocationScale>(kind_);
  }

  /// Number of states of a discrete factor (2 for Bernoulli).
  int num_states() const {
    if (const auto* c = std::get_if<Categorical>(&kind_)) {
      return static_cast<int>(c->logits.cols());
    }
    if (std::holds_alternative<RecognitionBernoulli>(kind_)) return 2;
    throw UnsupportedFamilyError("num_states: continuous factor");
  }

  /// Number of parent configurations this factor's table distinguishes.
  int num_parent_configs() const {
    if (const auto* c = std::get_if<Categorical>(&kind_)) {
      return static_cast<int>(c->logits.rows());
    }
    return 1;
  }

  int param_count() const {
    if (std::holds_alternative<GaussianLocationScale>(kind_)) return 2;
    if (const auto* c = std::get_if<Categorical>(&kind_)) {
      return static_cast<int>(c->logits.size());
    }
    return static_cast<int>(std::get<RecognitionBernoulli>(kind_).weights.size());
  }

  void get_params(std::span<double> out) const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      out[0] = g->mu;
      out[1] = g->ell;
    } else if (const auto* c = std::get_if<Categorical>(&kind_)) {
      // row-major: row r, state k -> r * K + k
      const int states = static_cast<int>(c->logits.cols());
      for (int r = 0; r < c->logits.rows(); ++r)
        for (int k = 0; k < states; ++k) out[r * states + k] = c->logits(r, k);
    } else {
      const auto& b = std::get<RecognitionBernoulli>(kind_);
      for (int j = 0; j < b.weights.size(); ++j) out[j] = b.weights[j];
    }
  }

  void set_params(std::span<const double> in) {
    if (auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      g->mu = in[0];
      g->ell = in[1];
    } else if (auto* c = std::get_if<Categorical>(&kind_)) {
      const int states = static_cast<int>(c->logits.cols());
      for (int r = 0; r < c->logits.rows(); ++r)
        for (int k = 0; k < states; ++k) c->logits(r, k) = in[r * states + k];
    } else {
      auto& b = std::get<RecognitionBernoulli>(kind_);
      for (int j = 0; j < b.weights.size(); ++j) b.weights[j] = in[j];
      refresh_activation();
    }
  }

  double sample(int parent_config, RandomStream& rng) const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      return g->mu + g->ell * rng.normal();
    }
    if (std::holds_alternative<RecognitionBernoulli>(kind_)) {
      return rng.uniform() < success_prob() ? 1.0 : 0.0;
    }
    const Eigen::VectorXd w = row_weights(parent_config);
    const double u = rng.uniform();
    double cum = 0.0;
    for (int k = 0; k < w.size(); ++k) {
      cum += w[k];
      if (u < cum) return static_cast<double>(k);
    }
    return static_cast<double>(w.size() - 1);
  }

  double log_density(int parent_config, double value) const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      const double z = (value - g->mu) / g->ell;
      return -0.5 * z * z - std::log(g->ell) - 0.5 * std::log(2.0 * M_PI);
    }
    if (std::holds_alternative<RecognitionBernoulli>(kind_)) {
      const double p = success_prob();
      return value != 0.0 ? std::log(p) : std::log1p(-p);
    }
    const auto& c = std::get<Categorical>(kind_);
    const int k = static_cast<int>(value);
    return c.logits(parent_config, k) - log_sum_exp_row(parent_config);
  }

  /// Per-state probabilities of a discrete factor given its parent row.
  Eigen::VectorXd state_weights(int parent_config) const {
    if (std::holds_alternative<RecognitionBernoulli>(kind_)) {
      const double p = success_prob();
      Eigen::VectorXd w(2);
      w << 1.0 - p, p;
      return w;
    }
    if (std::holds_alternative<Categorical>(kind_)) {
      return row_weights(parent_config);
    }
    throw UnsupportedFamilyError("state_weights: continuous factor");
  }

  /// d log q(value | parent_config) / d params, written into `out`
  /// (param_count entries, same order as get_params).
  void score(int parent_config, double value, std::span<double> out) const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      const double d = value - g->mu;
      out[0] = d / (g->ell * g->ell);
      out[1] = (d * d - g->ell * g->ell) / (g->ell * g->ell * g->ell);
      return;
    }
    if (const auto* b = std::get_if<RecognitionBernoulli>(&kind_)) {
      const double resid = value - success_prob();
      const int d = static_cast<int>(b->input.size());
      for (int j = 0; j < d; ++j) out[j] = resid * b->input[j];
      out[d] = resid;  // bias
      return;
    }
    const auto& c = std::get<Categorical>(kind_);
    const int states = static_cast<int>(c.logits.cols());
    for (int j = 0; j < static_cast<int>(out.size()); ++j) out[j] = 0.0;
    const Eigen::VectorXd w = row_weights(parent_config);
    const int x = static_cast<int>(value);
    for (int k = 0; k < states; ++k) {
      out[parent_config * states + k] = (k == x ? 1.0 : 0.0) - w[k];
    }
  }

  /// Closed-form entropy; parentless factors only (parent_config 0).
  double entropy() const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      return 0.5 * std::log(2.0 * M_PI * M_E * g->ell * g->ell);
    }
    if (std::holds_alternative<RecognitionBernoulli>(kind_)) {
      const double p = success_prob();
      return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
    }
    const Eigen::VectorXd w = row_weights(0);
    double h = 0.0;
    for (int k = 0; k < w.size(); ++k) {
      if (w[k] > 0.0) h -= w[k] * std::log(w[k]);
    }
    return h;
  }

  /// d entropy / d params for parentless factors.
  void entropy_gradient(std::span<double> out) const {
    if (std::holds_alternative<GaussianLocationScale>(kind_)) {
      out[0] = 0.0;
      out[1] = 1.0 / std::get<GaussianLocationScale>(kind_).ell;
      return;
    }
    if (const auto* b = std::get_if<RecognitionBernoulli>(&kind_)) {
      const double p = success_prob();
      const double dh = p * (1.0 - p) * std::log((1.0 - p) / p);
      const int d = static_cast<int>(b->input.size());
      for (int j = 0; j < d; ++j) out[j] = dh * b->input[j];
      out[d] = dh;
      return;
    }
    const Eigen::VectorXd w = row_weights(0);
    const double h = entropy();
    for (int k = 0; k < w.size(); ++k) {
      out[k] = w[k] > 0.0 ? -w[k] * (std::log(w[k]) + h) : 0.0;
    }
  }

  /// Success probability of a Bernoulli factor, clamped to (0, 1).
  double success_prob() const {
    return clamp_prob(sigmoid(activation_));
  }

 private:
  void validate() const {
    if (const auto* g = std::get_if<GaussianLocationScale>(&kind_)) {
      if (!(g->ell > 0.0) || !std::isfinite(g->ell) || !std::isfinite(g->mu)) {
        throw ModelError("gaussian factor: requires finite mu and ell > 0");
      }
    } else if (const auto* b = std::get_if<RecognitionBernoulli>(&kind_)) {
      if (b->weights.size() != b->input.size() + 1) {
        throw ModelError("recognition factor: weights must have length input + 1");
      }
      if (!b->weights.allFinite() || !b->input.allFinite()) {
        throw ModelError("recognition factor: non-finite weights or input");
      }
    }
  }

  void refresh_activation() {
    const auto& b = std::get<RecognitionBernoulli>(kind_);
    const int d = static_cast<int>(b.input.size());
    activation_ = b.weights[d];
    for (int j = 0; j < d; ++j) activation_ += b.weights[j] * b.input[j];
  }

  double log_sum_exp_row(int r) const {
    const auto& c = std::get<Categorical>(kind_);
    const double m = c.logits.row(r).maxCoeff();
    if (!std::isfinite(m)) return m;  // all states impossible
    double s = 0.0;
    for (int k = 0; k < c.logits.cols(); ++k) s += std::exp(c.logits(r, k) - m);
    return m + std::log(s);
  }

  Eigen::VectorXd row_weights(int r) const {
    const auto& c = std::get<Categorical>(kind_);
    const double m = c.logits.row(r).maxCoeff();
    Eigen::VectorXd w(c.logits.cols());
    if (!std::isfinite(m)) throw DegenerateConditionalError("categorical: all-zero row");
    for (int k = 0; k < c.logits.cols(); ++k) w[k] = std::exp(c.logits(r, k) - m);
    w /= w.sum();
    return w;
  }

  FactorKind kind_;
  double activation_ = 0.0;  // cached weights . [input; 1] for Bernoullis
};

}  // namespace legrad
