#pragma once

// dense BFGS with simple bound constraints: coordinates pinned at an active
// bound are masked out of the search direction, steps are projected back into
// the box, Armijo backtracking on the projected step

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace snpirt::detail {

struct BoxBounds {
  Eigen::VectorXd lower, upper;
};

struct OptimResult {
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  double f = std::numeric_limits<double>::infinity();
  double projected_grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool completed = false;  // at least one finite evaluation
  std::string note;
};

inline Eigen::VectorXd project_box(const Eigen::VectorXd& x, const BoxBounds& box) {
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

inline Eigen::VectorXd masked_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                       const BoxBounds& box) {
  Eigen::VectorXd pg = g;
  constexpr double tol = 1e-10;
  for (int i = 0; i < x.size(); ++i) {
    const bool at_lower = x[i] <= box.lower[i] + tol && g[i] > 0.0;
    const bool at_upper = x[i] >= box.upper[i] - tol && g[i] < 0.0;
    if (at_lower || at_upper) pg[i] = 0.0;
  }
  return pg;
}

inline OptimResult minimize_box_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const BoxBounds& box, int max_iterations, double grad_tol,
    double f_rel_tol) {
  OptimResult out;
  const int d = static_cast<int>(x0.size());
  Eigen::VectorXd x = project_box(x0, box);
  Eigen::VectorXd g(d);
  double f = fg(x, g);
  if (!std::isfinite(f)) {
    out.x = x;
    out.grad = g;
    out.note = "objective not finite at the starting point";
    return out;
  }
  out.completed = true;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  std::string note;
  bool converged = false;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    Eigen::VectorXd pg = masked_gradient(x, g, box);
    if (pg.norm() < grad_tol) {
      converged = true;
      break;
    }
    Eigen::VectorXd dvec = -(H * pg);
    dvec = masked_gradient(x, -dvec, box);  // mask active coordinates
    dvec = -dvec;
    // fall back to steepest descent when the model direction fails
    if (dvec.dot(pg) >= -1e-14 * dvec.norm() * pg.norm()) {
      dvec = -pg;
      H.setIdentity();
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn, gn(d), step;
    double fn = f;
    for (int ls = 0; ls < 60; ++ls) {
      xn = project_box(x + t * dvec, box);
      step = xn - x;
      if (step.norm() == 0.0) break;
      fn = fg(xn, gn);
      const double pred = std::min(g.dot(step), 0.0);
      if (std::isfinite(fn) && fn <= f + 1e-4 * pred) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      note = "line search found no decrease";
      converged = pg.norm() < grad_tol;
      break;
    }
    const Eigen::VectorXd y = gn - g;
    const double rel_change = std::abs(f - fn) / std::max(1.0, std::abs(f));
    const double sy = y.dot(step);
    if (sy > 1e-12 * y.norm() * step.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = H * y;
      H -= rho * (step * hy.transpose() + hy * step.transpose());
      H += rho * rho * (y.dot(hy) + sy) * (step * step.transpose());
    }
    x = xn;
    f = fn;
    g = gn;
    if (rel_change < f_rel_tol) {
      ++iter;
      converged = true;
      break;
    }
  }
  out.x = x;
  out.grad = g;
  out.f = f;
  out.projected_grad_norm = masked_gradient(x, g, box).norm();
  out.iterations = iter;
  out.converged = converged;
  if (!converged && note.empty()) note = "iteration limit reached";
  out.note = note;
  return out;
}

} // namespace snpirt::detail
