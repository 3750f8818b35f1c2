#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "snpirt/basis.hpp"
#include "snpirt/data.hpp"
#include "snpirt/estimation.hpp"
#include "snpirt/likelihood.hpp"
#include "snpirt/quadrature.hpp"

namespace snpirt {

// symmetric central-difference Hessian, step 1e-4 * max(1, |x_i|)
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x);

// Hessian of the total log likelihood at params, raw parametrization
Eigen::MatrixXd observed_hessian(Objective objective, const ResponseMatrix& data,
                                 const ExtendedParams& params,
                                 const QuadratureRule& rule);

// full-likelihood Hessian/scores in the parametrization where the item
// parameters are on the standardized latent scale; differencing this
// reparametrized objective is what carries the rescaling into the covariance
Eigen::MatrixXd observed_hessian_rescaled(const ResponseMatrix& data,
                                          const ExtendedParams& final_params,
                                          const QuadratureRule& rule);
Eigen::MatrixXd score_contributions_rescaled(const ResponseMatrix& data,
                                             const ExtendedParams& final_params,
                                             const QuadratureRule& rule);

// sum over observations of s_i s_i'
Eigen::MatrixXd score_crossproduct(const Eigen::MatrixXd& scores);

// sum over observations of s_i^{pairwise} (s_i^{full})', 2p x (2p + L)
Eigen::MatrixXd cross_model_matrix(const Eigen::MatrixXd& pairwise_scores,
                                   const Eigen::MatrixXd& full_scores);

struct SandwichParts {
  Eigen::MatrixXd hessian;    // observed, negative definite at a maximum
  Eigen::MatrixXd crossprod;  // score cross product
};

struct GhCovariance {
  Eigen::MatrixXd S;            // covariance of the 2p parameter differences
  Eigen::VectorXd eigenvalues;  // sorted by |lambda| descending
  int rank = 0;                 // |lambda| > 1e-8 * max |lambda|
  double a_scale = 0.0;         // sum lambda^2 / sum lambda over retained
  double b_dof = 0.0;           // (sum lambda)^2 / sum lambda^2
  double lambda_sum = 0.0;
  double lambda_sumsq = 0.0;
};

// combined covariance of (rescaled quasi-ML) - (pairwise) item parameter
// estimates: both sandwiches plus the two cross terms
GhCovariance assemble_S(const SandwichParts& pairwise_parts,
                        const SandwichParts& full_parts,
                        const Eigen::MatrixXd& cross_matrix, int degree);

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  std::vector<std::pair<double, bool>> rejections;  // alpha -> reject
  std::map<std::string, double> details;
};

// squared-norm difference statistic against the moment-matched scaled
// chi-square a * chisq(b)
TestReport gh_t_test(const Eigen::VectorXd& diff, const GhCovariance& cov,
                     const std::vector<double>& alphas);
TestReport gh_t_test(const ItemParams& full_rescaled, const ItemParams& pairwise,
                     const GhCovariance& cov, const std::vector<double>& alphas);

// quadratic-form statistic diff' S^{-1} diff against chisq(2p); refuses
// ill-conditioned S
TestReport gh_full_test(const Eigen::VectorXd& diff, const GhCovariance& cov,
                        const std::vector<double>& alphas);

// 2 * (loglik_L - loglik_0) against chisq(L), clamped at zero
TestReport lr_test(double loglik_l, double loglik_0, int degree,
                   const std::vector<double>& alphas);

// limited-information fit statistic from univariate and bivariate margins at
// the normal-latent ML estimate; requires p >= 5
TestReport m2_test(const ResponseMatrix& data, const ItemParams& params,
                   const QuadratureRule& rule, const std::vector<double>& alphas);

struct IcValues {
  double loglik = 0.0;
  int k = 0;
  long n = 0;
  double aic = 0.0;
  double bic = 0.0;
  double hq = 0.0;
};

IcValues information_criteria(double loglik, int k, long n);

struct GhPipelineResult {
  Eigen::VectorXd diff;  // rescaled quasi-ML minus pairwise, [alpha0; alpha1]
  GhCovariance cov;
  TestReport report;
};

// scores, Hessians, cross matrix, covariance and the difference test in one
// pass from the two fitted models
GhPipelineResult gh_t_from_fits(const ResponseMatrix& data, const FitResult& pairwise_fit,
                                const FitResult& snpl_fit, const QuadratureRule& rule,
                                const std::vector<double>& alphas);

} // namespace snpirt
