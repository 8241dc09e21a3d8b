#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/quadrature.hpp"
#include "legrad/target.hpp"
#include "legrad/targets/correlated_gaussian.hpp"
#include "legrad/variational.hpp"

namespace legrad {

/// One stochastic gradient estimate. The gradient vector is aligned with the
/// model's flat parameter layout; f_evaluations counts target evaluations
/// consumed by the call (an analytic-gradient call counts as one). pivot is
/// the assignment the estimate was formed at (for multi-sample estimators,
/// the last sample drawn).
struct GradientEstimate {
  Eigen::VectorXd gradient;
  long f_evaluations = 0;
  Assignment pivot;
};

enum class EstimatorKind { LeGrad, LdGrad, ReGrad };

inline const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::LeGrad: return "legrad";
    case EstimatorKind::LdGrad: return "ldgrad";
    case EstimatorKind::ReGrad: return "regrad";
  }
  return "?";
}

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::LeGrad;
  int sample_count = 1;       // LdGrad / ReGrad; LeGrad ignores it
  int quadrature_points = 5;  // LeGrad, continuous factors
  bool allow_incremental = true;
  int workers = 1;
};

/// Local expectation gradient at a given pivot: for each factor i, the exact
/// expectation over x_i of f(x_rest, x_i) score_i(x_i) under the conditional
/// q(x_i | mb_i) -- a weighted sum over the states of a discrete factor, a
/// Gauss-Hermite sum for a Gaussian one. The pivot's f value is computed once
/// and reused, by all factors and as the pivot-state term of each discrete sum.
///
/// Factors without children use the centered form
/// E[(f - f_pivot) score]: the score has exactly zero mean under the
/// factor's own conditional, so a constant f yields an exact floating-point
/// zero. Factors with children keep the plain integrand, because the blanket
/// conditional differs from the scored conditional there.
inline GradientEstimate legrad_at_pivot(const VariationalModel& model,
                                        const TargetModel& target,
                                        const QuadratureRule& rule,
                                        const Assignment& pivot,
                                        bool allow_incremental = true, int workers = 1) {
  if (target.dimension() != model.size()) {
    throw std::invalid_argument("legrad: target dimension does not match model size");
  }
  TargetProber prober(target, pivot, allow_incremental);
  const double f_pivot = prober.evaluate_pivot();

  const int n = model.size();
  std::vector<Eigen::VectorXd> contrib(static_cast<std::size_t>(n));
  parallel_for(n, workers, [&](int i) {
    const Factor& factor = model.factor(i);
    Eigen::VectorXd local = Eigen::VectorXd::Zero(factor.param_count());
    std::vector<double> score(static_cast<std::size_t>(factor.param_count()));
    if (factor.is_discrete()) {
      const Eigen::VectorXd weights = model.conditional_weights(i, pivot);
      const int pivot_state = pivot.state(static_cast<std::size_t>(i));
      const bool centered = model.children(i).empty();
      Assignment at = pivot;
      for (int k = 0; k < weights.size(); ++k) {
        const double fk =
            (k == pivot_state) ? f_pivot : prober.probe(i, static_cast<double>(k));
        at[static_cast<std::size_t>(i)] = static_cast<double>(k);
        model.score(i, at, score);
        const double coeff = centered ? weights[k] * (fk - f_pivot) : weights[k] * fk;
        for (std::size_t j = 0; j < score.size(); ++j) local[static_cast<int>(j)] += coeff * score[j];
      }
    } else {
      const auto& g = std::get<GaussianLocationScale>(factor.kind());
      for (int k = 0; k < rule.size(); ++k) {
        const double z = rule.nodes[k];
        const double fk = prober.probe(i, g.mu + g.ell * z);
        const double coeff = rule.weights[k] * (fk - f_pivot);
        local[0] += coeff * (z / g.ell);
        local[1] += coeff * ((z * z - 1.0) / g.ell);
      }
    }
    contrib[static_cast<std::size_t>(i)] = std::move(local);
  });

  GradientEstimate estimate;
  estimate.gradient = Eigen::VectorXd::Zero(model.parameter_count());
  for (int i = 0; i < n; ++i) {
    const auto& slots = model.param_slots(i);
    for (std::size_t j = 0; j < slots.size(); ++j) {
      estimate.gradient[slots[j]] += contrib[static_cast<std::size_t>(i)][static_cast<int>(j)];
    }
  }
  estimate.f_evaluations = prober.evaluations();
  estimate.pivot = pivot;
  return estimate;
}

inline GradientEstimate legrad(const VariationalModel& model, const TargetModel& target,
                               const QuadratureRule& rule, RandomStream& rng,
                               bool allow_incremental = true, int workers = 1) {
  return legrad_at_pivot(model, target, rule, model.ancestral_sample(rng),
                         allow_incremental, workers);
}

/// Log-derivative (score function) estimate: (1/S) sum_s f(x_s) score(x_s)
/// over independent draws from q. No control variates.
inline GradientEstimate ldgrad(const VariationalModel& model, const TargetModel& target,
                               int samples, RandomStream& rng) {
  if (samples < 1) throw std::invalid_argument("ldgrad: sample count must be >= 1");
  if (target.dimension() != model.size()) {
    throw std::invalid_argument("ldgrad: target dimension does not match model size");
  }
  GradientEstimate estimate;
  estimate.gradient = Eigen::VectorXd::Zero(model.parameter_count());
  for (int s = 0; s < samples; ++s) {
    const Assignment x = model.ancestral_sample(rng);
    const double f = target.evaluate(x);
    ++estimate.f_evaluations;
    model.accumulate_score(x, f, estimate.gradient);
    if (s == samples - 1) estimate.pivot = x;
  }
  estimate.gradient /= static_cast<double>(samples);
  return estimate;
}

/// Reparameterization estimate for location-scale Gaussian models:
/// (1/S) sum_s grad_{(mu,ell)} f(mu + ell o z_s) with d/dmu_i = df/dx_i and
/// d/dell_i = df/dx_i z_i. Uses the target's analytic gradient when present,
/// otherwise central differences with step 1e-5 max(1, |x_i|).
inline GradientEstimate regrad(const VariationalModel& model, const TargetModel& target,
                               int samples, RandomStream& rng) {
  if (samples < 1) throw std::invalid_argument("regrad: sample count must be >= 1");
  if (target.dimension() != model.size()) {
    throw std::invalid_argument("regrad: target dimension does not match model size");
  }
  const int n = model.size();
  for (int i = 0; i < n; ++i) {
    if (!std::holds_alternative<GaussianLocationScale>(model.factor(i).kind())) {
      throw UnsupportedFamilyError("regrad: factor " + std::to_string(i) +
                                   " is not a location-scale Gaussian");
    }
  }
  GradientEstimate estimate;
  estimate.gradient = Eigen::VectorXd::Zero(model.parameter_count());
  Eigen::VectorXd z(n);
  Assignment x(static_cast<std::size_t>(n));
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) {
      const auto& g = std::get<GaussianLocationScale>(model.factor(i).kind());
      z[i] = rng.normal();
      x[static_cast<std::size_t>(i)] = g.mu + g.ell * z[i];
    }
    Eigen::VectorXd dx;
    if (target.has_gradient()) {
      dx = target.gradient(x);
      ++estimate.f_evaluations;
    } else {
      dx.resize(n);
      Assignment probe = x;
      for (int i = 0; i < n; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        const double h = 1e-5 * std::max(1.0, std::abs(xi));
        probe[static_cast<std::size_t>(i)] = xi + h;
        const double fp = target.evaluate(probe);
        probe[static_cast<std::size_t>(i)] = xi - h;
        const double fm = target.evaluate(probe);
        probe[static_cast<std::size_t>(i)] = xi;
        dx[i] = (fp - fm) / (2.0 * h);
        estimate.f_evaluations += 2;
      }
    }
    for (int i = 0; i < n; ++i) {
      const auto& slots = model.param_slots(i);
      estimate.gradient[slots[0]] += dx[i];
      estimate.gradient[slots[1]] += dx[i] * z[i];
    }
    if (s == samples - 1) estimate.pivot = x;
  }
  estimate.gradient /= static_cast<double>(samples);
  return estimate;
}

/// Exact gradient of E_q[f] for oracle-eligible cases: full enumeration for
/// all-discrete models with at most 2^16 joint states, or the closed form
/// for a factorized Gaussian model against a Gaussian target
/// (d/dmu = -P (mu - m), d/dell_i = -P_ii ell_i). Test plumbing.
inline Eigen::VectorXd true_gradient_oracle(const VariationalModel& model,
                                            const TargetModel& target) {
  const int n = model.size();
  bool all_gaussian = true;
  bool all_discrete = true;
  for (int i = 0; i < n; ++i) {
    if (model.factor(i).is_discrete()) {
      all_gaussian = false;
    } else {
      all_discrete = false;
    }
  }

  if (all_gaussian) {
    const auto* gauss = dynamic_cast<const CorrelatedGaussianTarget*>(&target);
    if (gauss == nullptr) {
      throw std::invalid_argument(
          "true_gradient_oracle: Gaussian route needs a Gaussian target");
    }
    Eigen::VectorXd mu(n);
    Eigen::VectorXd ell(n);
    for (int i = 0; i < n; ++i) {
      const auto& g = std::get<GaussianLocationScale>(model.factor(i).kind());
      mu[i] = g.mu;
      ell[i] = g.ell;
    }
    const Eigen::MatrixXd& p = gauss->precision();
    const Eigen::VectorXd dmu = -(p * (mu - gauss->mean()));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameter_count());
    for (int i = 0; i < n; ++i) {
      const auto& slots = model.param_slots(i);
      grad[slots[0]] += dmu[i];
      grad[slots[1]] += -p(i, i) * ell[i];
    }
    return grad;
  }

  if (!all_discrete) {
    throw std::invalid_argument("true_gradient_oracle: mixed models are not supported");
  }
  long long states = 1;
  for (int i = 0; i < n; ++i) {
    states *= model.factor(i).num_states();
    if (states > 65536) {
      throw std::invalid_argument("true_gradient_oracle: state space too large");
    }
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameter_count());
  Assignment x(static_cast<std::size_t>(n));
  for (long long code = 0; code < states; ++code) {
    long long rest = code;
    for (int i = 0; i < n; ++i) {
      const int k = model.factor(i).num_states();
      x[static_cast<std::size_t>(i)] = static_cast<double>(rest % k);
      rest /= k;
    }
    const double q = std::exp(model.log_density(x));
    model.accumulate_score(x, q * target.evaluate(x), grad);
  }
  return grad;
}

/// Estimator bound to its configuration, with the quadrature rule built once.
class Estimator {
 public:
  explicit Estimator(EstimatorConfig config)
      : config_(config), rule_(gauss_hermite(config.quadrature_points)) {
    if (config_.sample_count < 1) {
      throw std::invalid_argument("estimator: sample count must be >= 1");
    }
  }

  const EstimatorConfig& config() const { return config_; }
  const QuadratureRule& rule() const { return rule_; }
  const char* name() const { return estimator_name(config_.kind); }

  GradientEstimate operator()(const VariationalModel& model, const TargetModel& target,
                              RandomStream& rng) const {
    switch (config_.kind) {
      case EstimatorKind::LeGrad:
        return legrad(model, target, rule_, rng, config_.allow_incremental, config_.workers);
      case EstimatorKind::LdGrad:
        return ldgrad(model, target, config_.sample_count, rng);
      case EstimatorKind::ReGrad:
        return regrad(model, target, config_.sample_count, rng);
    }
    throw std::logic_error("unreachable");
  }

 private:
  EstimatorConfig config_;
  QuadratureRule rule_;
};

}  // namespace legrad
