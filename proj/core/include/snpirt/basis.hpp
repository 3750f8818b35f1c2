#pragma once

#include <Eigen/Dense>
#include <vector>

#include "snpirt/errors.hpp"

namespace snpirt {

inline constexpr int kMaxDegree = 2;

// E(Z^k) for standard normal Z: zero for odd k, (k-1)!! for even k
double normal_moment(int k);

// polynomial degree L plus the spherical coordinates of the transformed
// coefficient vector, each angle in the closed interval [-pi/2, pi/2]
class SnpAngles {
public:
  SnpAngles() = default;
  SnpAngles(int degree, std::vector<double> phi);

  int degree() const { return degree_; }
  const std::vector<double>& phi() const { return phi_; }
  Eigen::VectorXd phi_vector() const;

private:
  int degree_ = 0;
  std::vector<double> phi_;
};

struct ItemParams {
  Eigen::VectorXd intercepts;  // alpha0
  Eigen::VectorXd slopes;      // alpha1

  int item_count() const { return static_cast<int>(intercepts.size()); }
  Eigen::VectorXd stacked() const;  // [intercepts; slopes]
  void validate() const;
};

struct ExtendedParams {
  ItemParams items;
  SnpAngles angles;

  int dim() const { return 2 * items.item_count() + angles.degree(); }
  Eigen::VectorXd stacked() const;  // [intercepts; slopes; phi]
};

struct LatentMoments {
  double mean = 0.0;
  double variance = 1.0;
};

// moment matrices of the monomial basis (1, z, ..., z^L) under N(0,1):
// A(i,j) = E(z^{i+j}) with its upper-triangular factor A = B'B, and the
// shifted matrices with entries E(z^{i+j+1}) / E(z^{i+j+2}) that produce the
// latent mean and raw second moment as quadratic forms in the coefficients
struct MomentMatrices {
  int degree = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;        // upper triangular, positive diagonal
  Eigen::MatrixXd B_inv;
  Eigen::MatrixXd M_mean;   // entries E(z^{i+j+1})
  Eigen::MatrixXd M_second; // entries E(z^{i+j+2})

  static const MomentMatrices& for_degree(int degree);
};

struct SnpCoefficients {
  Eigen::VectorXd c;  // unit vector on the sphere, size L+1
  Eigen::VectorXd a;  // polynomial coefficients B^{-1} c, size L+1
};

// c(phi): c_k = sin(phi_k) * prod_{l<k} cos(phi_l), last entry all-cosines
Eigen::VectorXd angles_to_unit_vector(const SnpAngles& angles);

SnpCoefficients coefficients_from_angles(const SnpAngles& angles);

// P_L(z)^2 phi(z) with the full normal density factor
double snp_density(double z, const SnpCoefficients& coef);

// latent mean/variance as quadratic forms a'Ma (any L)
LatentMoments latent_moments(const SnpAngles& angles);
// trigonometric closed forms, L <= 2 only
LatentMoments latent_moments_closed(const SnpAngles& angles);

// map parameters fitted on the raw latent scale to the scale on which the
// latent variable is standardized: slope * sd, intercept + slope * mean
ItemParams rescale_item_params(const ItemParams& raw, const LatentMoments& m);

} // namespace snpirt
