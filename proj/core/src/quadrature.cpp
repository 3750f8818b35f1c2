#include "snpirt/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "snpirt/errors.hpp"

namespace snpirt {

QuadratureRule gauss_hermite_rule(int points) {
  if (points < 1)
    throw DomainError("gauss_hermite_rule: need at least one point, got " +
                      std::to_string(points));
  QuadratureRule rule;
  if (points == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Ones(1);
    return rule;
  }
  // symmetric tridiagonal Jacobi matrix of the Hermite recurrence (unit
  // normal weight): zero diagonal, off diagonal sqrt(k)
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(points);
  Eigen::VectorXd sub(points - 1);
  for (int k = 1; k < points; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw DomainError("gauss_hermite_rule: eigen decomposition failed");
  rule.nodes = solver.eigenvalues();  // ascending
  rule.weights.resize(points);
  for (int q = 0; q < points; ++q) {
    const double v0 = solver.eigenvectors()(0, q);
    rule.weights[q] = v0 * v0;  // total mass one
  }
  return rule;
}

} // namespace snpirt
