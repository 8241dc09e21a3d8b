#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "legrad/common.hpp"

namespace legrad {

/// Gauss-Hermite rule in the probabilists' convention: approximates
/// E_{z ~ N(0,1)}[g(z)] as sum_k weights[k] * g(nodes[k]). Weights form a
/// probability vector and nodes are symmetric about zero.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Builds the K-point rule by eigendecomposition of the Jacobi matrix of the
/// probabilists' Hermite polynomials (recurrence off-diagonals sqrt(j)).
/// Exact for polynomial integrands of degree <= 2K-1.
inline QuadratureRule gauss_hermite(int k) {
  if (k < 1 || k > 64) {
    throw std::invalid_argument("gauss_hermite: K must be in [1, 64], got " +
                                std::to_string(k));
  }
  QuadratureRule rule;
  if (k == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Ones(1);
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd subdiag(k - 1);
  for (int j = 1; j < k; ++j) subdiag[j - 1] = std::sqrt(static_cast<double>(j));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, subdiag, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("gauss_hermite: eigensolver failed");
  }

  rule.nodes = solver.eigenvalues();  // ascending
  rule.weights.resize(k);
  for (int j = 0; j < k; ++j) {
    const double v = solver.eigenvectors()(0, j);
    rule.weights[j] = v * v;  // first-component squared; mu_0 = 1
  }

  // Enforce exact symmetry: pair up mirrored nodes, zero the middle one.
  for (int i = 0; i < k / 2; ++i) {
    const int j = k - 1 - i;
    const double node = 0.5 * (rule.nodes[i] - rule.nodes[j]);
    const double weight = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = node;
    rule.nodes[j] = -node;
    rule.weights[i] = weight;
    rule.weights[j] = weight;
  }
  if (k % 2 == 1) rule.nodes[k / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

/// E_{x ~ N(mu, ell^2)}[g(x)] via the standardized rule: sum_k w_k g(mu + ell z_k).
/// Reduces to g(mu) for K = 1.
template <class G>
double expect_gaussian(const QuadratureRule& rule, double mu, double ell, G&& g) {
  if (!(ell > 0.0)) {
    throw std::invalid_argument("expect_gaussian: ell must be > 0, got " +
                                std::to_string(ell));
  }
  double acc = 0.0;
  for (int j = 0; j < rule.size(); ++j) {
    const double x = mu + ell * rule.nodes[j];
    const double value = g(x);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "expect_gaussian: non-finite integrand value " << value
          << " at node " << j << " (x = " << x << ")";
      throw std::runtime_error(msg.str());
    }
    acc += rule.weights[j] * value;
  }
  return acc;
}

}  // namespace legrad
