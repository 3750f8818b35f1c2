#pragma once

#include <Eigen/Dense>

#include "snpirt/basis.hpp"
#include "snpirt/data.hpp"
#include "snpirt/quadrature.hpp"

namespace snpirt {

enum class Objective { full_ml, pairwise };

struct LoglikValue {
  double total = 0.0;
  Eigen::VectorXd per_observation;  // size n
};

// logistic response curve P(y=1 | z)
double response_prob(double intercept, double slope, double z);

// marginal log likelihood with the degree-L latent density, L = 0 is the
// normal-latent model
LoglikValue full_loglik(const ResponseMatrix& data, const ExtendedParams& params,
                        const QuadratureRule& rule);

// sum over item pairs of bivariate-margin log likelihoods under the normal
// latent density
LoglikValue pairwise_loglik(const ResponseMatrix& data, const ItemParams& params,
                            const QuadratureRule& rule);

// n x dim per-observation score matrix by central differences of the
// per-observation contributions; dim is 2p for pairwise, 2p + L for full
Eigen::MatrixXd score_contributions(Objective objective, const ResponseMatrix& data,
                                    const ExtendedParams& params,
                                    const QuadratureRule& rule);

} // namespace snpirt
