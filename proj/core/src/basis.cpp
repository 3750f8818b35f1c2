#include "snpirt/basis.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "detail.hpp"

namespace snpirt {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kAngleSlack = 1e-9;  // tolerate grid arithmetic roundoff
constexpr double kInvSqrt2Pi = 0.3989422804014327;
} // namespace

double normal_moment(int k) {
  if (k < 0) throw DomainError("normal_moment: negative order " + std::to_string(k));
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (int j = k - 1; j >= 3; j -= 2) m *= static_cast<double>(j);
  return m;
}

SnpAngles::SnpAngles(int degree, std::vector<double> phi)
    : degree_(degree), phi_(std::move(phi)) {
  if (degree_ < 0 || degree_ > kMaxDegree)
    throw DomainError("SnpAngles: degree " + std::to_string(degree_) +
                      " outside [0, " + std::to_string(kMaxDegree) + "]");
  if (static_cast<int>(phi_.size()) != degree_)
    throw DomainError("SnpAngles: expected " + std::to_string(degree_) +
                      " angles, got " + std::to_string(phi_.size()));
  for (int l = 0; l < degree_; ++l) {
    if (!(std::abs(phi_[l]) <= kHalfPi + kAngleSlack))
      throw DomainError("SnpAngles: phi_" + std::to_string(l + 1) + " = " +
                        std::to_string(phi_[l]) + " outside [-pi/2, pi/2]");
  }
}

Eigen::VectorXd SnpAngles::phi_vector() const {
  Eigen::VectorXd v(degree_);
  for (int l = 0; l < degree_; ++l) v[l] = phi_[l];
  return v;
}

Eigen::VectorXd ItemParams::stacked() const {
  Eigen::VectorXd out(intercepts.size() + slopes.size());
  out << intercepts, slopes;
  return out;
}

void ItemParams::validate() const {
  if (intercepts.size() != slopes.size())
    throw DomainError("ItemParams: intercepts and slopes differ in length");
  if (intercepts.size() == 0) throw DomainError("ItemParams: no items");
}

Eigen::VectorXd ExtendedParams::stacked() const {
  Eigen::VectorXd out(dim());
  out << items.intercepts, items.slopes, angles.phi_vector();
  return out;
}

const MomentMatrices& MomentMatrices::for_degree(int degree) {
  if (degree < 0 || degree > kMaxDegree)
    throw DomainError("MomentMatrices: degree " + std::to_string(degree) +
                      " outside [0, " + std::to_string(kMaxDegree) + "]");
  static const std::array<MomentMatrices, kMaxDegree + 1> cache = [] {
    std::array<MomentMatrices, kMaxDegree + 1> out;
    for (int L = 0; L <= kMaxDegree; ++L) {
      MomentMatrices& mm = out[L];
      mm.degree = L;
      const int d = L + 1;
      mm.A.resize(d, d);
      mm.M_mean.resize(d, d);
      mm.M_second.resize(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          mm.A(i, j) = normal_moment(i + j);
          mm.M_mean(i, j) = normal_moment(i + j + 1);
          mm.M_second(i, j) = normal_moment(i + j + 2);
        }
      // A = B'B with B upper triangular, positive diagonal
      Eigen::LLT<Eigen::MatrixXd> llt(mm.A);
      mm.B = llt.matrixL().transpose();
      mm.B_inv = mm.B.triangularView<Eigen::Upper>().solve(
          Eigen::MatrixXd::Identity(d, d));
    }
    return out;
  }();
  return cache[degree];
}

Eigen::VectorXd angles_to_unit_vector(const SnpAngles& angles) {
  return detail::polar_unit(angles.phi_vector());
}

SnpCoefficients coefficients_from_angles(const SnpAngles& angles) {
  SnpCoefficients coef;
  coef.c = detail::polar_unit(angles.phi_vector());
  coef.a = MomentMatrices::for_degree(angles.degree()).B_inv * coef.c;
  return coef;
}

double snp_density(double z, const SnpCoefficients& coef) {
  const auto& a = coef.a;
  double poly = 0.0;
  for (int l = static_cast<int>(a.size()) - 1; l >= 0; --l) poly = poly * z + a[l];
  return poly * poly * kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

LatentMoments latent_moments(const SnpAngles& angles) {
  return detail::moments_from_phi(angles.phi_vector());
}

LatentMoments latent_moments_closed(const SnpAngles& angles) {
  LatentMoments out;
  switch (angles.degree()) {
    case 0:
      out.mean = 0.0;
      out.variance = 1.0;
      break;
    case 1: {
      const double s = std::sin(angles.phi()[0]), c = std::cos(angles.phi()[0]);
      out.mean = 2.0 * s * c;
      out.variance = s * s + 3.0 * c * c - out.mean * out.mean;
      break;
    }
    case 2: {
      const double s1 = std::sin(angles.phi()[0]), c1 = std::cos(angles.phi()[0]);
      const double s2 = std::sin(angles.phi()[1]), c2 = std::cos(angles.phi()[1]);
      const double two_sqrt2 = 2.0 * std::numbers::sqrt2;
      out.mean = 2.0 * s1 * c1 * s2 + two_sqrt2 * c1 * c1 * c2 * s2;
      const double second = s1 * s1 + two_sqrt2 * c1 * s1 * c2 +
                            3.0 * c1 * c1 * s2 * s2 + 5.0 * c1 * c1 * c2 * c2;
      out.variance = second - out.mean * out.mean;
      break;
    }
    default:
      throw DomainError("latent_moments_closed: no closed form beyond degree 2");
  }
  return out;
}

ItemParams rescale_item_params(const ItemParams& raw, const LatentMoments& m) {
  raw.validate();
  if (!(m.variance > 0.0))
    throw DomainError("rescale_item_params: nonpositive latent variance " +
                      std::to_string(m.variance));
  const double sd = std::sqrt(m.variance);
  ItemParams out;
  out.slopes = raw.slopes * sd;
  out.intercepts = raw.intercepts + raw.slopes * m.mean;
  return out;
}

namespace detail {

Eigen::VectorXd polar_unit(const Eigen::VectorXd& phi) {
  const int L = static_cast<int>(phi.size());
  Eigen::VectorXd c(L + 1);
  double running = 1.0;
  for (int k = 0; k < L; ++k) {
    c[k] = running * std::sin(phi[k]);
    running *= std::cos(phi[k]);
  }
  c[L] = running;
  return c;
}

Eigen::MatrixXd polar_unit_jacobian(const Eigen::VectorXd& phi) {
  const int L = static_cast<int>(phi.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(L + 1, L);
  // dc_k/dphi_m: replace sin/cos factors of component k by their derivative
  for (int m = 0; m < L; ++m) {
    for (int k = 0; k <= L; ++k) {
      if (k < m) continue;
      double v = 1.0;
      for (int l = 0; l < std::min(k, L); ++l) {
        if (l == m)
          v *= -std::sin(phi[l]);
        else
          v *= std::cos(phi[l]);
      }
      if (k < L) v *= (k == m) ? std::cos(phi[k]) : std::sin(phi[k]);
      J(k, m) = v;
    }
  }
  return J;
}

Eigen::VectorXd poly_coeffs(const Eigen::VectorXd& phi) {
  const int L = static_cast<int>(phi.size());
  return MomentMatrices::for_degree(L).B_inv * polar_unit(phi);
}

Eigen::MatrixXd poly_coeffs_jacobian(const Eigen::VectorXd& phi) {
  const int L = static_cast<int>(phi.size());
  return MomentMatrices::for_degree(L).B_inv * polar_unit_jacobian(phi);
}

LatentMoments moments_from_phi(const Eigen::VectorXd& phi) {
  const int L = static_cast<int>(phi.size());
  const MomentMatrices& mm = MomentMatrices::for_degree(L);
  const Eigen::VectorXd a = mm.B_inv * polar_unit(phi);
  LatentMoments out;
  out.mean = a.dot(mm.M_mean * a);
  out.variance = a.dot(mm.M_second * a) - out.mean * out.mean;
  return out;
}

Eigen::VectorXd pack(const ExtendedParams& params) { return params.stacked(); }

ExtendedParams unpack(const Eigen::VectorXd& x, int p, int degree) {
  ExtendedParams out;
  out.items.intercepts = x.segment(0, p);
  out.items.slopes = x.segment(p, p);
  std::vector<double> phi(static_cast<std::size_t>(degree));
  for (int l = 0; l < degree; ++l) phi[static_cast<std::size_t>(l)] = x[2 * p + l];
  out.angles = SnpAngles(degree, std::move(phi));
  return out;
}

Eigen::VectorXd final_to_raw(const Eigen::VectorXd& x_final, int p, int degree) {
  Eigen::VectorXd x_raw = x_final;
  if (degree == 0) return x_raw;
  const LatentMoments m = moments_from_phi(x_final.segment(2 * p, degree));
  const double sd = std::sqrt(m.variance);
  x_raw.segment(p, p) = x_final.segment(p, p) / sd;
  x_raw.segment(0, p) = x_final.segment(0, p) - x_raw.segment(p, p) * m.mean;
  return x_raw;
}

} // namespace detail
} // namespace snpirt
