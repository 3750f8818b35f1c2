#pragma once

#include <Eigen/Dense>

namespace snpirt {

// nodes/weights for integrals against the standard normal density:
// sum_q w_q g(x_q) ~ E[g(Z)], weights sum to one
struct QuadratureRule {
  Eigen::VectorXd nodes;    // ascending
  Eigen::VectorXd weights;
};

// probabilists' Gauss-Hermite rule from the Jacobi matrix eigenproblem;
// exact for polynomials up to degree 2*points - 1
QuadratureRule gauss_hermite_rule(int points);

} // namespace snpirt
