#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/targets/sigmoid_belief_net.hpp"
#include "legrad/variational.hpp"

namespace legrad {

/// Recognition model for the sigmoid belief net: the variational Bernoulli
/// probability of hidden unit k for observation y is sigmoid(v_k . [y; 1]),
/// with the weight matrix V (K x (D+1), bias last) shared across data.
struct RecognitionNetwork {
  Eigen::MatrixXd v;

  int hidden() const { return static_cast<int>(v.rows()); }
  int visible() const { return static_cast<int>(v.cols()) - 1; }

  /// Per-unit success probabilities for one observation, clamped to (0, 1).
  Eigen::VectorXd probs(const Eigen::VectorXd& y) const {
    Eigen::VectorXd p = v.leftCols(visible()) * y + v.col(visible());
    for (int k = 0; k < p.size(); ++k) p[k] = clamp_prob(sigmoid(p[k]));
    return p;
  }

  /// Exact entropy of the factorized Bernoulli posterior for one observation.
  double entropy(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd p = probs(y);
    double h = 0.0;
    for (int k = 0; k < p.size(); ++k) {
      h += -p[k] * std::log(p[k]) - (1.0 - p[k]) * std::log1p(-p[k]);
    }
    return h;
  }

  Eigen::VectorXd sample(const Eigen::VectorXd& y, RandomStream& rng) const {
    const Eigen::VectorXd p = probs(y);
    Eigen::VectorXd x(p.size());
    for (int k = 0; k < p.size(); ++k) x[k] = rng.uniform() < p[k] ? 1.0 : 0.0;
    return x;
  }
};

/// The variational distribution over one datum's hidden vector as a model of
/// K recognition Bernoulli factors conditioned on y; parameters are laid out
/// row-major so the flat gradient reshapes to V's K x (D+1) block.
inline VariationalModel recognition_model(const RecognitionNetwork& recog,
                                          const Eigen::VectorXd& y) {
  std::vector<Factor> factors;
  factors.reserve(static_cast<std::size_t>(recog.hidden()));
  for (int k = 0; k < recog.hidden(); ++k) {
    RecognitionBernoulli b;
    b.weights = recog.v.row(k).transpose();
    b.input = y;
    factors.emplace_back(std::move(b));
  }
  return factorized_model(std::move(factors));
}

/// Per-datum bound: single-sample estimate of E_q[log p(y_i | x)] plus the
/// exact Bernoulli entropy (the uniform prior's constant is not included).
inline double per_datum_bound(const SigmoidBeliefNetTarget& sbn,
                              const RecognitionNetwork& recog, int i, RandomStream& rng) {
  const Eigen::VectorXd y = sbn.data().row(i).transpose();
  const Eigen::VectorXd xs = recog.sample(y, rng);
  Assignment x(std::vector<double>(xs.data(), xs.data() + xs.size()));
  return sbn.log_likelihood(i, x) + recog.entropy(y);
}

/// Closed-form local expectation gradient of one datum's bound over all v_k:
/// sigma_k (1 - sigma_k) [ sum_d log((1 + e^{-yt_d a_d(x_k=0)}) /
/// (1 + e^{-yt_d a_d(x_k=1)})) + log((1 - sigma_k)/sigma_k) ] [y; 1],
/// with activations updated incrementally between the two states of x_k.
inline Eigen::MatrixXd recognition_gradient_datum(const SigmoidBeliefNetTarget& sbn,
                                                  const RecognitionNetwork& recog, int i,
                                                  const Assignment& pivot) {
  const int hidden = sbn.hidden();
  const int visible = sbn.visible();
  const Eigen::VectorXd y = sbn.data().row(i).transpose();
  const Eigen::VectorXd sigma = recog.probs(y);
  const Eigen::VectorXd a = sbn.activations(pivot);

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(hidden, visible + 1);
  for (int k = 0; k < hidden; ++k) {
    Eigen::VectorXd a0 = a;
    if (pivot[static_cast<std::size_t>(k)] != 0.0) a0 -= sbn.weights().col(k);
    double log_ratio_sum = 0.0;
    for (int d = 0; d < visible; ++d) {
      const double ytilde = sbn.data()(i, d) != 0.0 ? 1.0 : -1.0;
      const double a1 = a0[d] + sbn.weights()(d, k);
      log_ratio_sum += log1p_exp(-ytilde * a0[d]) - log1p_exp(-ytilde * a1);
    }
    const double bracket = log_ratio_sum + std::log((1.0 - sigma[k]) / sigma[k]);
    const double coeff = sigma[k] * (1.0 - sigma[k]) * bracket;
    grad.row(k).head(visible) = coeff * y.transpose();
    grad(k, visible) = coeff;
  }
  return grad;
}

/// Sum of the per-datum closed-form gradients over all data, one pivot per
/// datum. Per-datum terms are independent; they are reduced in datum order
/// so the result does not depend on the worker count.
inline Eigen::MatrixXd recognition_gradient(const SigmoidBeliefNetTarget& sbn,
                                            const RecognitionNetwork& recog,
                                            const std::vector<Assignment>& pivots,
                                            int workers = 1) {
  const int n = sbn.data_count();
  if (static_cast<int>(pivots.size()) != n) {
    throw std::invalid_argument("recognition_gradient: one pivot per datum required");
  }
  std::vector<Eigen::MatrixXd> parts(static_cast<std::size_t>(n));
  parallel_for(n, workers, [&](int i) {
    parts[static_cast<std::size_t>(i)] =
        recognition_gradient_datum(sbn, recog, i, pivots[static_cast<std::size_t>(i)]);
  });
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(sbn.hidden(), sbn.visible() + 1);
  for (int i = 0; i < n; ++i) grad += parts[static_cast<std::size_t>(i)];
  return grad;
}

/// Per-pixel Bernoulli means for datum i: sigma(W [xhat; 1]) with xhat the
/// mean hidden activation sigma(V [y_i; 1]).
inline Eigen::VectorXd reconstruct(const SigmoidBeliefNetTarget& sbn,
                                   const RecognitionNetwork& recog, int i) {
  const Eigen::VectorXd y = sbn.data().row(i).transpose();
  const Eigen::VectorXd xhat = recog.probs(y);
  Eigen::VectorXd a = sbn.weights().leftCols(sbn.hidden()) * xhat + sbn.weights().col(sbn.hidden());
  for (int d = 0; d < a.size(); ++d) a[d] = sigmoid(a[d]);
  return a;
}

/// Mean absolute deviation between the data and their reconstructions.
inline double reconstruction_error(const SigmoidBeliefNetTarget& sbn,
                                   const RecognitionNetwork& recog) {
  double total = 0.0;
  for (int i = 0; i < sbn.data_count(); ++i) {
    const Eigen::VectorXd r = reconstruct(sbn, recog, i);
    for (int d = 0; d < sbn.visible(); ++d) total += std::abs(r[d] - sbn.data()(i, d));
  }
  return total / (sbn.data_count() * sbn.visible());
}

struct SbnTrainConfig {
  int hidden = 20;
  int iterations = 600;
  double step_size = 0.05;  // shared by W and V unless step_w overrides
  double step_w = -1.0;     // < 0: use step_size
  std::uint64_t seed = 1;
  int trace_every = 1;
  int workers = 1;
  bool record_timing = false;
};

struct SbnTraceRow {
  int iteration = 0;
  double elapsed_seconds = 0.0;
  double bound = 0.0;  // sum of per-datum bounds, uniform prior included
  long f_evaluations = 0;
  double gradient_v00 = 0.0;
  double recon_error = 0.0;
};

struct SbnTrainResult {
  Eigen::MatrixXd w;
  Eigen::MatrixXd v;
  std::vector<SbnTraceRow> trace;
  long total_f_evaluations = 0;
};

/// Alternating training loop: per iteration, one hidden sample per datum
/// updates W, then the same pivots drive the closed-form local expectation
/// step on V. Gradients are averaged over data. The reported bound includes
/// the uniform prior's -K log 2 per datum so values are comparable across K.
inline SbnTrainResult train_sbn(const Eigen::MatrixXd& data, const SbnTrainConfig& cfg) {
  const int n = static_cast<int>(data.rows());
  const int visible = static_cast<int>(data.cols());
  const int hidden = cfg.hidden;
  if (n < 1 || visible < 1 || hidden < 1) {
    throw std::invalid_argument("train_sbn: empty data or hidden layer");
  }

  RandomStream init_rng = RandomStream(cfg.seed).fork(0);
  Eigen::MatrixXd w(visible, hidden + 1);
  for (int d = 0; d < visible; ++d)
    for (int k = 0; k <= hidden; ++k) w(d, k) = 0.1 * init_rng.normal();
  RecognitionNetwork recog;
  recog.v.resize(hidden, visible + 1);
  for (int k = 0; k < hidden; ++k)
    for (int d = 0; d <= visible; ++d) recog.v(k, d) = 0.1 * init_rng.normal();

  SigmoidBeliefNetTarget sbn(std::move(w), data);
  const double step_v = cfg.step_size;
  const double step_w = cfg.step_w < 0.0 ? cfg.step_size : cfg.step_w;
  const double prior_constant = -hidden * std::log(2.0);

  SbnTrainResult result;
  const RandomStream base(cfg.seed);
  const auto start = std::chrono::steady_clock::now();

  std::vector<Assignment> pivots(static_cast<std::size_t>(n));
  std::vector<double> bounds(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> w_parts(static_cast<std::size_t>(n));

  for (int t = 1; t <= cfg.iterations; ++t) {
    const RandomStream iter_stream = base.fork(static_cast<std::uint64_t>(t));
    parallel_for(n, cfg.workers, [&](int i) {
      RandomStream rng = iter_stream.fork(static_cast<std::uint64_t>(i) + 1);
      const Eigen::VectorXd y = sbn.data().row(i).transpose();
      const Eigen::VectorXd xs = recog.sample(y, rng);
      Assignment x(std::vector<double>(xs.data(), xs.data() + xs.size()));
      bounds[static_cast<std::size_t>(i)] =
          sbn.log_likelihood(i, x) + recog.entropy(y) + prior_constant;
      w_parts[static_cast<std::size_t>(i)] = sbn.w_gradient(i, x);
      pivots[static_cast<std::size_t>(i)] = std::move(x);
    });

    double bound = 0.0;
    Eigen::MatrixXd w_grad = Eigen::MatrixXd::Zero(visible, hidden + 1);
    for (int i = 0; i < n; ++i) {
      bound += bounds[static_cast<std::size_t>(i)];
      w_grad += w_parts[static_cast<std::size_t>(i)];
    }
    w_grad /= n;
    sbn.set_weights(sbn.weights() + step_w * w_grad);

    const Eigen::MatrixXd v_grad = recognition_gradient(sbn, recog, pivots, cfg.workers) / n;
    if (!v_grad.allFinite() || !w_grad.allFinite()) {
      throw DivergenceError("train_sbn: non-finite gradient at iteration " + std::to_string(t));
    }
    recog.v += step_v * v_grad;

    result.total_f_evaluations += static_cast<long>(n) * (hidden + 1);
    if (t % cfg.trace_every == 0) {
      SbnTraceRow row;
      row.iteration = t;
      if (cfg.record_timing) {
        row.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      row.bound = bound;
      row.f_evaluations = result.total_f_evaluations;
      row.gradient_v00 = v_grad(0, 0);
      row.recon_error = reconstruction_error(sbn, recog);
      result.trace.push_back(row);
    }
  }
  result.w = sbn.weights();
  result.v = recog.v;
  return result;
}

}  // namespace legrad
