#pragma once

// internal helpers shared by the likelihood/estimation/inference translation
// units; these skip the domain checks of the public types so finite
// differencing may step across the angle boundary (the polar formulas extend
// smoothly and still give a valid density there)

#include <Eigen/Dense>

#include "snpirt/basis.hpp"

namespace snpirt::detail {

Eigen::VectorXd polar_unit(const Eigen::VectorXd& phi);
Eigen::MatrixXd polar_unit_jacobian(const Eigen::VectorXd& phi);

// B^{-1} c(phi) and its Jacobian in phi
Eigen::VectorXd poly_coeffs(const Eigen::VectorXd& phi);
Eigen::MatrixXd poly_coeffs_jacobian(const Eigen::VectorXd& phi);

LatentMoments moments_from_phi(const Eigen::VectorXd& phi);

// x is packed [intercepts(p); slopes(p); phi(L)]
Eigen::VectorXd pack(const ExtendedParams& params);
ExtendedParams unpack(const Eigen::VectorXd& x, int p, int degree);

// map a packed standardized-scale parameter vector to the raw one with the
// same likelihood: slopes / sd, intercepts - rescaled slope * mean
Eigen::VectorXd final_to_raw(const Eigen::VectorXd& x_final, int p, int degree);

} // namespace snpirt::detail
