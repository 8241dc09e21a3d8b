#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/factors.hpp"

namespace legrad {

/// Markov blanket of a node in the variational DAG: parents, children and
/// co-parents. Empty for fully factorized models.
struct MarkovBlanket {
  int node = 0;
  std::vector<int> blanket_nodes;  // sorted, excludes node
  std::vector<int> child_indices;  // sorted
};

/// DAG-structured factorized variational distribution q_v(x) =
/// prod_i q_{v_i}(x_i | pa_i). Factors are listed in topological order
/// (every parent index precedes its children). Continuous factors must be
/// fully factorized: a Gaussian conditional with children would turn the
/// local expectation into a non-Gaussian integral. Discrete factors may have
/// arbitrary DAG structure.
///
/// The tunable scalars live in a flat parameter vector. By default factor
/// parameters occupy consecutive slots; an explicit layout may alias slots
/// across factors (used to share recognition weights across data points).
/// Reads are safe to call concurrently; parameter updates are single-writer.
class VariationalModel {
 public:
  VariationalModel(std::vector<Factor> factors,
                   std::vector<std::vector<int>> parents,
                   std::optional<std::vector<std::vector<int>>> layout = std::nullopt)
      : factors_(std::move(factors)), parents_(std::move(parents)) {
    const int n = static_cast<int>(factors_.size());
    if (static_cast<int>(parents_.size()) != n) {
      throw ModelError("model: parents list size must match factor count");
    }
    children_.assign(n, {});
    for (int i = 0; i < n; ++i) {
      int expected_rows = 1;
      for (int p : parents_[i]) {
        if (p < 0 || p >= i) {
          throw ModelError("model: parent " + std::to_string(p) + " of factor " +
                           std::to_string(i) + " must precede it");
        }
        if (!factors_[p].is_discrete()) {
          throw ModelError("model: continuous factor " + std::to_string(p) +
                           " cannot have children");
        }
        expected_rows *= factors_[p].num_states();
        children_[p].push_back(i);
      }
      if (!parents_[i].empty() && !std::holds_alternative<Categorical>(factors_[i].kind())) {
        throw ModelError("model: only categorical factors may have parents");
      }
      if (factors_[i].num_parent_configs() != expected_rows) {
        throw ModelError("model: factor " + std::to_string(i) + " CPT has " +
                         std::to_string(factors_[i].num_parent_configs()) +
                         " rows, expected " + std::to_string(expected_rows));
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!factors_[i].is_discrete() && !children_[i].empty()) {
        throw ModelError("model: continuous factor " + std::to_string(i) +
                         " cannot have children");
      }
    }

    if (layout) {
      param_map_ = std::move(*layout);
      if (static_cast<int>(param_map_.size()) != n) {
        throw ModelError("model: layout size must match factor count");
      }
      int max_slot = -1;
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(param_map_[i].size()) != factors_[i].param_count()) {
          throw ModelError("model: layout of factor " + std::to_string(i) +
                           " must cover its parameters");
        }
        for (int s : param_map_[i]) {
          if (s < 0) throw ModelError("model: negative parameter slot");
          max_slot = std::max(max_slot, s);
        }
      }
      param_count_ = max_slot + 1;
      std::vector<char> hit(static_cast<std::size_t>(param_count_), 0);
      for (const auto& m : param_map_)
        for (int s : m) hit[static_cast<std::size_t>(s)] = 1;
      if (std::find(hit.begin(), hit.end(), 0) != hit.end()) {
        throw ModelError("model: layout must map onto every parameter slot");
      }
      // Aliased slots read from their first occurrence; push that value back
      // so all copies agree from the start.
      set_parameters(parameters());
    } else {
      param_map_.resize(static_cast<std::size_t>(n));
      int next = 0;
      for (int i = 0; i < n; ++i) {
        param_map_[i].resize(static_cast<std::size_t>(factors_[i].param_count()));
        for (int& s : param_map_[i]) s = next++;
      }
      param_count_ = next;
    }

    fully_factorized_ = true;
    for (int i = 0; i < n; ++i) {
      if (!parents_[i].empty()) fully_factorized_ = false;
    }
  }

  int size() const { return static_cast<int>(factors_.size()); }
  int parameter_count() const { return param_count_; }
  const Factor& factor(int i) const { return factors_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& parents(int i) const { return parents_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& children(int i) const { return children_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& param_slots(int i) const { return param_map_[static_cast<std::size_t>(i)]; }
  bool fully_factorized() const { return fully_factorized_; }

  Eigen::VectorXd parameters() const {
    Eigen::VectorXd flat(param_count_);
    std::vector<double> buf;
    for (int i = size() - 1; i >= 0; --i) {
      buf.resize(static_cast<std::size_t>(factors_[i].param_count()));
      factors_[i].get_params(buf);
      for (std::size_t j = 0; j < buf.size(); ++j) flat[param_map_[i][j]] = buf[j];
    }
    return flat;
  }

  void set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count_) {
      throw ModelError("set_parameters: expected " + std::to_string(param_count_) +
                       " values, got " + std::to_string(flat.size()));
    }
    std::vector<double> buf;
    for (int i = 0; i < size(); ++i) {
      buf.resize(static_cast<std::size_t>(factors_[i].param_count()));
      for (std::size_t j = 0; j < buf.size(); ++j) buf[j] = flat[param_map_[i][j]];
      factors_[static_cast<std::size_t>(i)].set_params(buf);
    }
  }

  /// Flat slots holding Gaussian scale parameters, for the optimizer's
  /// positivity projection.
  std::vector<int> scale_param_slots() const {
    std::vector<int> slots;
    for (int i = 0; i < size(); ++i) {
      if (std::holds_alternative<GaussianLocationScale>(factors_[i].kind())) {
        slots.push_back(param_map_[i][1]);
      }
    }
    return slots;
  }

  /// Mixed-radix row index into factor i's CPT given its parents' states.
  int parent_config(int i, const Assignment& x) const {
    int r = 0;
    for (int p : parents_[static_cast<std::size_t>(i)]) {
      r = r * factors_[static_cast<std::size_t>(p)].num_states() + x.state(static_cast<std::size_t>(p));
    }
    return r;
  }

  /// Draws a full assignment from q_v by ancestral sampling. Identical seed
  /// and model give an identical assignment.
  Assignment ancestral_sample(RandomStream& rng) const {
    Assignment x(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i) {
      x[static_cast<std::size_t>(i)] = factors_[static_cast<std::size_t>(i)].sample(parent_config(i, x), rng);
    }
    return x;
  }

  /// Sum of per-factor conditional log densities.
  double log_density(const Assignment& x) const {
    check_assignment(x);
    double total = 0.0;
    for (int i = 0; i < size(); ++i) {
      total += factors_[static_cast<std::size_t>(i)].log_density(parent_config(i, x), x[static_cast<std::size_t>(i)]);
    }
    if (!std::isfinite(total)) {
      throw InvalidAssignmentError("log_density: non-finite result");
    }
    return total;
  }

  /// Change in log q when coordinate i is set to new_value, touching only
  /// factor i's own term and its children's terms.
  double log_density_delta(const Assignment& x, int i, double new_value) const {
    const int r = parent_config(i, x);
    const auto& fi = factors_[static_cast<std::size_t>(i)];
    double delta = fi.log_density(r, new_value) - fi.log_density(r, x[static_cast<std::size_t>(i)]);
    if (!children_[static_cast<std::size_t>(i)].empty()) {
      Assignment probe = x;
      probe[static_cast<std::size_t>(i)] = new_value;
      for (int c : children_[static_cast<std::size_t>(i)]) {
        const auto& fc = factors_[static_cast<std::size_t>(c)];
        delta += fc.log_density(parent_config(c, probe), x[static_cast<std::size_t>(c)]) -
                 fc.log_density(parent_config(c, x), x[static_cast<std::size_t>(c)]);
      }
    }
    return delta;
  }

  /// Sum of per-factor closed-form entropies; fully factorized models only.
  /// For models with parent links, fold -log q into the target instead.
  double entropy() const {
    require_factorized("entropy");
    double h = 0.0;
    for (int i = 0; i < size(); ++i) h += factors_[static_cast<std::size_t>(i)].entropy();
    return h;
  }

  /// d entropy / d flat parameters; fully factorized models only.
  Eigen::VectorXd entropy_gradient() const {
    require_factorized("entropy_gradient");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count_);
    std::vector<double> buf;
    for (int i = 0; i < size(); ++i) {
      buf.assign(static_cast<std::size_t>(factors_[i].param_count()), 0.0);
      factors_[static_cast<std::size_t>(i)].entropy_gradient(buf);
      for (std::size_t j = 0; j < buf.size(); ++j) grad[param_map_[i][j]] += buf[j];
    }
    return grad;
  }

  MarkovBlanket markov_blanket(int i) const {
    MarkovBlanket mb;
    mb.node = i;
    std::set<int> nodes(parents_[static_cast<std::size_t>(i)].begin(), parents_[static_cast<std::size_t>(i)].end());
    for (int c : children_[static_cast<std::size_t>(i)]) {
      nodes.insert(c);
      for (int p : parents_[static_cast<std::size_t>(c)]) {
        if (p != i) nodes.insert(p);  // co-parents
      }
    }
    mb.blanket_nodes.assign(nodes.begin(), nodes.end());
    mb.child_indices = children_[static_cast<std::size_t>(i)];
    return mb;
  }

  /// Conditional distribution q(x_i | mb_i) of a discrete node given the
  /// rest of the assignment: proportional to q(x_i | pa_i) times the
  /// children's conditionals. With no children this is exactly the factor's
  /// own state weights.
  Eigen::VectorXd conditional_weights(int i, const Assignment& x_rest) const {
    const auto& fi = factors_[static_cast<std::size_t>(i)];
    if (!fi.is_discrete()) {
      throw UnsupportedFamilyError("conditional_weights: factor " + std::to_string(i) +
                                   " is continuous");
    }
    const int r = parent_config(i, x_rest);
    if (children_[static_cast<std::size_t>(i)].empty()) {
      return fi.state_weights(r);
    }
    const int states = fi.num_states();
    Eigen::VectorXd logw(states);
    Assignment probe = x_rest;
    for (int k = 0; k < states; ++k) {
      probe[static_cast<std::size_t>(i)] = static_cast<double>(k);
      double lw = fi.log_density(r, static_cast<double>(k));
      for (int c : children_[static_cast<std::size_t>(i)]) {
        lw += factors_[static_cast<std::size_t>(c)].log_density(parent_config(c, probe),
                                                                x_rest[static_cast<std::size_t>(c)]);
      }
      logw[k] = lw;
    }
    const double m = logw.maxCoeff();
    if (!std::isfinite(m)) {
      throw DegenerateConditionalError(
          "conditional_weights: all weights vanished at factor " + std::to_string(i));
    }
    Eigen::VectorXd w = (logw.array() - m).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DegenerateConditionalError(
          "conditional_weights: degenerate normalization at factor " + std::to_string(i));
    }
    return w / total;
  }

  /// d log q_{v_i}(x_i | pa_i) / d (factor i's parameters), in factor order.
  void score(int i, const Assignment& x, std::span<double> out) const {
    factors_[static_cast<std::size_t>(i)].score(parent_config(i, x), x[static_cast<std::size_t>(i)], out);
  }

  /// Full score d log q(x) / d flat parameters, accumulated into `grad`
  /// with coefficient `coeff` (shared slots receive summed contributions).
  void accumulate_score(const Assignment& x, double coeff, Eigen::VectorXd& grad) const {
    std::vector<double> buf;
    for (int i = 0; i < size(); ++i) {
      buf.resize(static_cast<std::size_t>(factors_[i].param_count()));
      score(i, x, buf);
      for (std::size_t j = 0; j < buf.size(); ++j) grad[param_map_[i][j]] += coeff * buf[j];
    }
  }

 private:
  void check_assignment(const Assignment& x) const {
    if (static_cast<int>(x.size()) != size()) {
      throw InvalidAssignmentError("assignment length " + std::to_string(x.size()) +
                                   " does not match model size " + std::to_string(size()));
    }
    for (int i = 0; i < size(); ++i) {
      const double v = x[static_cast<std::size_t>(i)];
      if (!std::isfinite(v)) {
        throw InvalidAssignmentError("assignment coordinate " + std::to_string(i) +
                                     " is not finite");
      }
      if (factors_[static_cast<std::size_t>(i)].is_discrete()) {
        const int s = static_cast<int>(v);
        if (v != static_cast<double>(s) || s < 0 || s >= factors_[static_cast<std::size_t>(i)].num_states()) {
          throw InvalidAssignmentError("assignment coordinate " + std::to_string(i) +
                                       " is not a valid state index");
        }
      }
    }
  }

  void require_factorized(const char* op) const {
    if (!fully_factorized_) {
      throw UnsupportedStructureError(std::string(op) +
                                      ": model has parent links; fold -log q into the target");
    }
  }

  std::vector<Factor> factors_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> param_map_;
  int param_count_ = 0;
  bool fully_factorized_ = true;
};

/// Convenience constructor for a fully factorized model.
inline VariationalModel factorized_model(std::vector<Factor> factors) {
  std::vector<std::vector<int>> parents(factors.size());
  return VariationalModel(std::move(factors), std::move(parents));
}

}  // namespace legrad
