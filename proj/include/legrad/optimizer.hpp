#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/diagnostics.hpp"
#include "legrad/estimators.hpp"
#include "legrad/target.hpp"
#include "legrad/variational.hpp"

namespace legrad {

enum class StepSchedule { Constant, RobbinsMonro };

/// How the bound splits between the sampled integrand and closed forms:
/// either f(x) plus the model's analytic entropy, or f(x) - log q(x) with
/// the entropy folded into the sampled part.
enum class BoundSplit { EntropyClosedForm, EntropyInF };

struct OptimizerConfig {
  double step_size = 0.01;  // eta_0
  StepSchedule schedule = StepSchedule::Constant;
  double tau = 1000.0;  // robbins-monro: eta_t = eta_0 / (1 + t / tau)
  int iterations = 1000;
  std::uint64_t seed = 1;
  int trace_every = 1;
  std::vector<int> tracked_params = {0};
  int variance_window = 10;
  double scale_floor = 1e-6;  // ell projection after Gaussian scale updates
  bool record_timing = false;
};

/// One diagnostics row. f_evaluations is the cumulative count of target
/// evaluations consumed so far (estimator probes plus bound samples).
/// elapsed_seconds stays 0 unless timing was requested, so trace files are
/// byte-identical across reruns and worker counts.
struct TraceRecord {
  int iteration = 0;
  double elapsed_seconds = 0.0;
  double bound = 0.0;
  long f_evaluations = 0;
  std::vector<double> tracked_gradients;
  std::vector<std::optional<double>> tracked_variances;
};

struct RunResult {
  Eigen::VectorXd final_parameters;
  std::vector<TraceRecord> trace;
  long total_f_evaluations = 0;
};

/// Single-sample bound value at one ancestral draw: f(x) plus the exact
/// entropy under the closed-form split, f(x) - log q(x) otherwise.
inline double stochastic_bound(const VariationalModel& model, const TargetModel& target,
                               RandomStream& rng, BoundSplit split = BoundSplit::EntropyClosedForm) {
  const Assignment x = model.ancestral_sample(rng);
  if (split == BoundSplit::EntropyClosedForm) {
    return target.evaluate(x) + model.entropy();
  }
  return target.evaluate(x) - model.log_density(x);
}

/// Stochastic ascent: draw pivot, estimate gradient, step, project scales.
/// Under the closed-form split the estimator sees the raw target and the
/// entropy gradient is added analytically; otherwise the estimator sees
/// f - log q. Aborts with the iteration and parameter index on a non-finite
/// gradient.
inline RunResult run(VariationalModel& model, const TargetModel& target,
                     const Estimator& estimator, const OptimizerConfig& cfg,
                     BoundSplit split = BoundSplit::EntropyClosedForm) {
  if (cfg.iterations < 1) throw std::invalid_argument("optimizer: iterations must be >= 1");
  if (cfg.step_size < 0.0) throw std::invalid_argument("optimizer: step size must be >= 0");
  if (cfg.trace_every < 1) throw std::invalid_argument("optimizer: trace_every must be >= 1");

  const BoundTarget bound_target(target, model);
  const TargetModel& estimator_target =
      (split == BoundSplit::EntropyInF) ? static_cast<const TargetModel&>(bound_target) : target;

  RandomStream rng(cfg.seed);
  VarianceTracker tracker(cfg.tracked_params, cfg.variance_window);
  const std::vector<int> scale_slots = model.scale_param_slots();

  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 1; t <= cfg.iterations; ++t) {
    const GradientEstimate estimate = estimator(model, estimator_target, rng);
    result.total_f_evaluations += estimate.f_evaluations;

    Eigen::VectorXd gradient = estimate.gradient;
    if (split == BoundSplit::EntropyClosedForm) gradient += model.entropy_gradient();
    for (int j = 0; j < gradient.size(); ++j) {
      if (!std::isfinite(gradient[j])) {
        throw DivergenceError("optimizer: non-finite gradient at iteration " +
                              std::to_string(t) + ", parameter " + std::to_string(j));
      }
    }

    const double eta = cfg.schedule == StepSchedule::Constant
                           ? cfg.step_size
                           : cfg.step_size / (1.0 + (t - 1) / cfg.tau);
    Eigen::VectorXd params = model.parameters();
    params += eta * gradient;
    for (int slot : scale_slots) {
      if (params[slot] < cfg.scale_floor) params[slot] = cfg.scale_floor;
    }
    model.set_parameters(params);

    std::vector<std::optional<double>> tracked_variances;
    tracked_variances.reserve(cfg.tracked_params.size());
    for (int p : cfg.tracked_params) {
      tracked_variances.push_back(tracker.push_and_variance(p, gradient[p]));
    }

    if (t % cfg.trace_every == 0) {
      TraceRecord row;
      row.iteration = t;
      if (cfg.record_timing) {
        row.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      row.bound = stochastic_bound(model, target, rng, split);
      ++result.total_f_evaluations;
      row.f_evaluations = result.total_f_evaluations;
      for (int p : cfg.tracked_params) row.tracked_gradients.push_back(gradient[p]);
      row.tracked_variances = std::move(tracked_variances);
      result.trace.push_back(std::move(row));
    }
  }
  result.final_parameters = model.parameters();
  return result;
}

}  // namespace legrad
