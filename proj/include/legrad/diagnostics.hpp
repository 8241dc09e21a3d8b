#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/estimators.hpp"

namespace legrad {

/// Running-window sample variance of per-iteration gradient values for a set
/// of tracked parameter indices. Variance is undefined (missing) until the
/// window fills.
class VarianceTracker {
 public:
  explicit VarianceTracker(std::vector<int> tracked, int window = 10) : window_(window) {
    if (window_ < 2) throw std::invalid_argument("variance tracker: window must be >= 2");
    for (int index : tracked) {
      slots_.push_back(Slot{index, std::vector<double>(static_cast<std::size_t>(window_)), 0});
    }
  }

  int window() const { return window_; }

  std::optional<double> push_and_variance(int param_index, double value) {
    Slot& slot = find(param_index);
    slot.buffer[static_cast<std::size_t>(slot.count % window_)] = value;
    ++slot.count;
    return variance_of(slot);
  }

  std::optional<double> variance(int param_index) const {
    return variance_of(const_cast<VarianceTracker*>(this)->find(param_index));
  }

 private:
  struct Slot {
    int index;
    std::vector<double> buffer;
    long count;
  };

  Slot& find(int param_index) {
    for (Slot& slot : slots_) {
      if (slot.index == param_index) return slot;
    }
    throw std::invalid_argument("variance tracker: unregistered parameter index " +
                                std::to_string(param_index));
  }

  std::optional<double> variance_of(const Slot& slot) const {
    if (slot.count < window_) return std::nullopt;
    double mean = 0.0;
    for (double v : slot.buffer) mean += v;
    mean /= window_;
    double ss = 0.0;
    for (double v : slot.buffer) ss += (v - mean) * (v - mean);
    return ss / (window_ - 1);  // unbiased
  }

  int window_;
  std::vector<Slot> slots_;
};

/// Fixed-parameter variance comparison across estimators: holds the model
/// where it is, draws `calls` independent estimates per estimator, and
/// reports per-coordinate sample means and variances. Each estimator gets a
/// stream derived from its own configuration, and each call a sub-stream, so
/// the table does not depend on the order estimators run or on the worker
/// count.
struct VarianceStudy {
  std::vector<std::string> estimator_names;
  std::vector<Eigen::VectorXd> means;      // per estimator
  std::vector<Eigen::VectorXd> variances;  // per estimator
};

inline VarianceStudy fixed_point_variance_study(const VariationalModel& model,
                                                const TargetModel& target,
                                                std::span<const Estimator> estimators,
                                                int calls, std::uint64_t seed,
                                                int workers = 1) {
  if (calls < 2) throw std::invalid_argument("variance study: calls must be >= 2");
  VarianceStudy study;
  const int params = model.parameter_count();
  for (const Estimator& estimator : estimators) {
    const auto& cfg = estimator.config();
    const RandomStream stream = RandomStream(seed)
                                    .fork(static_cast<std::uint64_t>(cfg.kind))
                                    .fork(static_cast<std::uint64_t>(cfg.sample_count))
                                    .fork(static_cast<std::uint64_t>(cfg.quadrature_points));
    Eigen::MatrixXd estimates(calls, params);
    parallel_for(calls, workers, [&](int c) {
      RandomStream rng = stream.fork(static_cast<std::uint64_t>(c) + 1);
      estimates.row(c) = estimator(model, target, rng).gradient.transpose();
    });
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(params);
    for (int c = 0; c < calls; ++c) mean += estimates.row(c).transpose();
    mean /= calls;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(params);
    for (int c = 0; c < calls; ++c) {
      const Eigen::VectorXd d = estimates.row(c).transpose() - mean;
      var += d.cwiseProduct(d);
    }
    var /= (calls - 1);
    study.estimator_names.emplace_back(estimator.name());
    study.means.push_back(std::move(mean));
    study.variances.push_back(std::move(var));
  }
  return study;
}

}  // namespace legrad
