#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>

#include "legrad/common.hpp"
#include "legrad/factors.hpp"
#include "legrad/variational.hpp"

namespace legrad {

/// The f(x) whose expectation under q is being optimized. Implementations
/// are immutable during an estimator call; coordinate_update takes an
/// explicit per-pivot state so concurrent probes on one pivot are
/// independent.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int dimension() const = 0;
  virtual double evaluate(const Assignment& x) const = 0;

  /// Cached evaluation state for cheap single-coordinate re-evaluation from
  /// a pivot. Probes never mutate it.
  struct EvalState {
    virtual ~EvalState() = default;
  };

  virtual bool has_coordinate_update() const { return false; }
  virtual std::unique_ptr<EvalState> prepare(const Assignment& /*pivot*/) const {
    return nullptr;
  }
  /// f at the pivot with coordinate i replaced by value.
  virtual double coordinate_update(const EvalState& /*state*/, const Assignment& /*pivot*/,
                                   int /*i*/, double /*value*/) const {
    throw std::logic_error("target does not provide coordinate_update");
  }

  /// Analytic df/dx, if available (used by the reparameterization estimator).
  virtual bool has_gradient() const { return false; }
  virtual Eigen::VectorXd gradient(const Assignment& /*x*/) const {
    throw std::logic_error("target does not provide an analytic gradient");
  }
};

/// Wraps an arbitrary callable as a target; used by tests and oracles.
class FunctionTarget final : public TargetModel {
 public:
  FunctionTarget(int dimension, std::function<double(const Assignment&)> fn)
      : dimension_(dimension), fn_(std::move(fn)) {}

  int dimension() const override { return dimension_; }
  double evaluate(const Assignment& x) const override { return fn_(x); }

 private:
  int dimension_;
  std::function<double(const Assignment&)> fn_;
};

/// f(x) - log q(x): the bound integrand with the entropy folded into the
/// target. Single-coordinate probes update the log-density part through the
/// model's local delta, so they stay cheap even when f itself has no
/// incremental path.
class BoundTarget final : public TargetModel {
 public:
  BoundTarget(const TargetModel& f, const VariationalModel& q) : f_(f), q_(q) {}

  int dimension() const override { return f_.dimension(); }

  double evaluate(const Assignment& x) const override {
    return f_.evaluate(x) - q_.log_density(x);
  }

  bool has_coordinate_update() const override { return true; }

  std::unique_ptr<EvalState> prepare(const Assignment& pivot) const override {
    auto state = std::make_unique<State>();
    if (f_.has_coordinate_update()) state->f_state = f_.prepare(pivot);
    state->log_q_pivot = q_.log_density(pivot);
    return state;
  }

  double coordinate_update(const EvalState& state, const Assignment& pivot, int i,
                           double value) const override {
    const auto& s = static_cast<const State&>(state);
    double f_value;
    if (s.f_state) {
      f_value = f_.coordinate_update(*s.f_state, pivot, i, value);
    } else {
      Assignment probe = pivot;
      probe[static_cast<std::size_t>(i)] = value;
      f_value = f_.evaluate(probe);
    }
    return f_value - (s.log_q_pivot + q_.log_density_delta(pivot, i, value));
  }

 private:
  struct State final : EvalState {
    std::unique_ptr<EvalState> f_state;
    double log_q_pivot = 0.0;
  };

  const TargetModel& f_;
  const VariationalModel& q_;
};

/// Per-pivot probe helper: owns the target's eval state, falls back to full
/// evaluation when no incremental path is available (or it is disabled), and
/// counts every f evaluation. Safe for concurrent probe() calls.
class TargetProber {
 public:
  TargetProber(const TargetModel& target, const Assignment& pivot, bool allow_incremental)
      : target_(target),
        pivot_(pivot),
        incremental_(allow_incremental && target.has_coordinate_update()) {
    if (incremental_) state_ = target.prepare(pivot);
  }

  double evaluate_pivot() {
    count_.fetch_add(1, std::memory_order_relaxed);
    return target_.evaluate(pivot_);
  }

  double probe(int i, double value) const {
    count_.fetch_add(1, std::memory_order_relaxed);
    if (incremental_) {
      return target_.coordinate_update(*state_, pivot_, i, value);
    }
    Assignment probe = pivot_;
    probe[static_cast<std::size_t>(i)] = value;
    return target_.evaluate(probe);
  }

  long evaluations() const { return count_.load(std::memory_order_relaxed); }

 private:
  const TargetModel& target_;
  const Assignment& pivot_;
  bool incremental_;
  std::unique_ptr<TargetModel::EvalState> state_;
  mutable std::atomic<long> count_{0};
};

}  // namespace legrad
