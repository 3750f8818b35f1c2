#pragma once

// likelihood evaluators shared by estimation and inference; each instance
// caches the pattern-collapsed data and per-call workspaces, so one instance
// serves one thread

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "snpirt/data.hpp"
#include "snpirt/quadrature.hpp"

namespace snpirt::detail {

// distinct response patterns with multiplicities
struct PatternTable {
  int n = 0, p = 0, n_pat = 0;
  std::vector<int> row_pattern;        // size n, pattern index per row
  Eigen::VectorXd counts;              // size n_pat
  std::vector<std::vector<int>> ones;  // per pattern, items answered 1
  Eigen::MatrixXd Y;                   // n_pat x p, 0/1 as doubles

  static PatternTable build(const ResponseMatrix& data);
};

// marginal log likelihood with the squared-polynomial latent density,
// quadrature in the aggregated-pattern representation
class FullEvaluator {
public:
  FullEvaluator(const ResponseMatrix& data, int degree, const QuadratureRule& rule);

  int items() const { return pat_.p; }
  int degree() const { return degree_; }
  int dim() const { return 2 * pat_.p + degree_; }
  int observations() const { return pat_.n; }

  double value(const Eigen::VectorXd& x);
  double value_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad);
  void per_observation(const Eigen::VectorXd& x, Eigen::VectorXd& out);

private:
  void prepare(const Eigen::VectorXd& x);  // fills the per-call caches

  int degree_;
  PatternTable pat_;
  Eigen::VectorXd x_nodes_, lnw_;
  Eigen::MatrixXd vand_;        // Q x (L+1) node powers
  Eigen::VectorXd n_ones_;      // per item count of 1 responses

  // per-call caches
  Eigen::MatrixXd pi_;          // p x Q
  Eigen::VectorXd base_;        // Q, sum_j log(1 - pi_jq) + log w_q
  Eigen::VectorXd poly_, ptil_; // P(x_q), P(x_q)^2
  Eigen::VectorXd s0_, s1_;     // per pattern sums of alpha over ones
  Eigen::MatrixXd expv_;        // n_pat x Q, exp(v - rowmax)
  Eigen::VectorXd shift_, denom_, lpat_;
};

// sum of bivariate-margin log likelihoods over item pairs, normal latent
class PairwiseEvaluator {
public:
  PairwiseEvaluator(const ResponseMatrix& data, const QuadratureRule& rule);

  int items() const { return pat_.p; }
  int dim() const { return 2 * pat_.p; }
  int observations() const { return pat_.n; }

  double value(const Eigen::VectorXd& x);
  double value_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad);
  void per_observation(const Eigen::VectorXd& x, Eigen::VectorXd& out);

private:
  void tables(const Eigen::VectorXd& x);

  PatternTable pat_;
  Eigen::VectorXd x_nodes_, w_;
  std::vector<std::pair<int, int>> pairs_;  // j < k
  Eigen::MatrixXd cnt_;                     // n_pairs x 4, counts by cell 2s+t
  Eigen::MatrixXd pi_;                      // p x Q
  Eigen::MatrixXd cell_;                    // n_pairs x 4 probabilities
  Eigen::VectorXd margin_;                  // p
};

// full evaluator through the change of variables that standardizes the
// latent scale; gradients/Hessians of this objective are the rescaled ones
class RescaledEvaluator {
public:
  RescaledEvaluator(const ResponseMatrix& data, int degree, const QuadratureRule& rule)
      : inner_(data, degree, rule) {}

  int dim() const { return inner_.dim(); }
  int observations() const { return inner_.observations(); }
  double value(const Eigen::VectorXd& x_final);
  void per_observation(const Eigen::VectorXd& x_final, Eigen::VectorXd& out);

private:
  FullEvaluator inner_;
};

// central differences of per-observation contributions, one column per
// parameter, step max(1e-6, 1e-7 |x_k|)
template <typename PerObs>
Eigen::MatrixXd fd_score_matrix(PerObs&& per_obs, const Eigen::VectorXd& x, int n) {
  const int d = static_cast<int>(x.size());
  Eigen::MatrixXd scores(n, d);
  Eigen::VectorXd xp = x, xm = x, vp(n), vm(n);
  for (int k = 0; k < d; ++k) {
    const double h = std::max(1e-6, 1e-7 * std::abs(x[k]));
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    per_obs(xp, vp);
    per_obs(xm, vm);
    scores.col(k) = (vp - vm) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return scores;
}

} // namespace snpirt::detail
