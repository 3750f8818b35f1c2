#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "snpirt/basis.hpp"
#include "snpirt/quadrature.hpp"

using namespace snpirt;

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// trapezoid integration of f against a fine z grid, wide enough that the
// gaussian tail underflow dominates the truncation error
template <typename F>
double trapz(F f, double lo = -10.0, double hi = 10.0, int cells = 40000) {
  const double h = (hi - lo) / cells;
  double acc = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < cells; ++i) acc += f(lo + i * h);
  return acc * h;
}

std::vector<double> grid_half_pi(double step) {
  std::vector<double> out;
  for (double v = -kHalfPi; v < kHalfPi - 1e-12; v += step) out.push_back(v);
  out.push_back(kHalfPi);
  return out;
}

} // namespace

TEST_SUITE("basis") {

TEST_CASE("normal moments follow the double factorial rule") {
  CHECK(normal_moment(0) == 1.0);
  CHECK(normal_moment(1) == 0.0);
  CHECK(normal_moment(2) == 1.0);
  CHECK(normal_moment(3) == 0.0);
  CHECK(normal_moment(4) == 3.0);
  CHECK(normal_moment(6) == 15.0);
  CHECK(normal_moment(8) == 105.0);
  CHECK_THROWS_AS(normal_moment(-1), DomainError);
}

TEST_CASE("angle container validates degree, arity and domain") {
  CHECK_NOTHROW(SnpAngles(0, {}));
  CHECK_NOTHROW(SnpAngles(1, {0.3}));
  CHECK_NOTHROW(SnpAngles(2, {kHalfPi, -kHalfPi}));
  CHECK_THROWS_AS(SnpAngles(3, {0.1, 0.2, 0.3}), DomainError);
  CHECK_THROWS_AS(SnpAngles(-1, {}), DomainError);
  CHECK_THROWS_AS(SnpAngles(1, {0.1, 0.2}), DomainError);
  CHECK_THROWS_AS(SnpAngles(2, {0.1}), DomainError);
  CHECK_THROWS_AS(SnpAngles(1, {1.7}), DomainError);
  CHECK_THROWS_AS(SnpAngles(1, {-1.7}), DomainError);
}

TEST_CASE("unit vector endpoints and the degree-2 product form") {
  const Eigen::VectorXd top = angles_to_unit_vector(SnpAngles(1, {kHalfPi}));
  CHECK(top[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(top[1] == doctest::Approx(0.0).epsilon(1e-15));

  const Eigen::VectorXd mid = angles_to_unit_vector(SnpAngles(1, {0.0}));
  CHECK(mid[0] == doctest::Approx(0.0));
  CHECK(mid[1] == doctest::Approx(1.0));

  const Eigen::VectorXd c = angles_to_unit_vector(SnpAngles(2, {0.3, -0.5}));
  CHECK(c[0] == doctest::Approx(std::sin(0.3)).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(std::cos(0.3) * std::sin(-0.5)).epsilon(1e-14));
  CHECK(c[2] == doctest::Approx(std::cos(0.3) * std::cos(-0.5)).epsilon(1e-14));
}

TEST_CASE("unit vector has norm one across the angle grid") {
  for (double phi : grid_half_pi(0.1)) {
    const Eigen::VectorXd c1 = angles_to_unit_vector(SnpAngles(1, {phi}));
    CHECK(c1.norm() == doctest::Approx(1.0).epsilon(1e-13));
    for (double phi2 : grid_half_pi(0.37)) {
      const Eigen::VectorXd c2 = angles_to_unit_vector(SnpAngles(2, {phi, phi2}));
      CHECK(c2.norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("moment matrix factor reproduces A and inverts cleanly") {
  for (int L = 0; L <= kMaxDegree; ++L) {
    const MomentMatrices& mm = MomentMatrices::for_degree(L);
    const int d = L + 1;
    CHECK(((mm.B.transpose() * mm.B) - mm.A).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mm.B * mm.B_inv - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <
          1e-12);
    // upper triangular with positive diagonal
    for (int i = 0; i < d; ++i) {
      CHECK(mm.B(i, i) > 0.0);
      for (int j = 0; j < i; ++j) CHECK(mm.B(i, j) == 0.0);
    }
  }
  CHECK_THROWS_AS(MomentMatrices::for_degree(3), DomainError);
}

TEST_CASE("degree-2 polynomial coefficients match the trigonometric closed form") {
  const double p1 = 0.7, p2 = 1.0;
  const SnpCoefficients coef = coefficients_from_angles(SnpAngles(2, {p1, p2}));
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  CHECK(coef.a[0] ==
        doctest::Approx(std::sin(p1) - inv_sqrt2 * std::cos(p1) * std::cos(p2))
            .epsilon(1e-13));
  CHECK(coef.a[1] == doctest::Approx(std::cos(p1) * std::sin(p2)).epsilon(1e-13));
  CHECK(coef.a[2] ==
        doctest::Approx(inv_sqrt2 * std::cos(p1) * std::cos(p2)).epsilon(1e-13));
}

TEST_CASE("density integrates to one and is nonnegative for any angles") {
  const std::vector<SnpAngles> cases = {
      SnpAngles(0, {}),          SnpAngles(1, {0.0}),  SnpAngles(1, {0.6}),
      SnpAngles(1, {-kHalfPi}),  SnpAngles(2, {0.7, 1.0}),
      SnpAngles(2, {-0.4, 0.2}), SnpAngles(2, {1.2, -1.3})};
  for (const SnpAngles& angles : cases) {
    const SnpCoefficients coef = coefficients_from_angles(angles);
    CHECK(trapz([&](double z) { return snp_density(z, coef); }) ==
          doctest::Approx(1.0).epsilon(1e-9));
    for (double z = -6.0; z <= 6.0; z += 0.37)
      CHECK(snp_density(z, coef) >= 0.0);
  }
}

TEST_CASE("density at the angle boundary is exactly standard normal") {
  const SnpCoefficients coef = coefficients_from_angles(SnpAngles(1, {kHalfPi}));
  for (double z = -5.0; z <= 5.0; z += 0.31) {
    const double ref = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    CHECK(snp_density(z, coef) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("quadratic-form moments equal the closed forms on a dense grid") {
  for (double phi : grid_half_pi(0.1)) {
    const SnpAngles a1(1, {phi});
    const LatentMoments q = latent_moments(a1);
    const LatentMoments c = latent_moments_closed(a1);
    CHECK(q.mean == doctest::Approx(c.mean).epsilon(1e-12));
    CHECK(q.variance == doctest::Approx(c.variance).epsilon(1e-12));
  }
  for (double p1 : grid_half_pi(0.2))
    for (double p2 : grid_half_pi(0.2)) {
      const SnpAngles a2(2, {p1, p2});
      const LatentMoments q = latent_moments(a2);
      const LatentMoments c = latent_moments_closed(a2);
      CHECK(q.mean == doctest::Approx(c.mean).epsilon(5e-12));
      CHECK(q.variance == doctest::Approx(c.variance).epsilon(5e-12));
    }
}

TEST_CASE("moments agree with direct numeric integration of the density") {
  const std::vector<SnpAngles> cases = {SnpAngles(1, {0.45}), SnpAngles(1, {-1.1}),
                                        SnpAngles(2, {0.7, 1.0}),
                                        SnpAngles(2, {-0.9, 0.3})};
  for (const SnpAngles& angles : cases) {
    const SnpCoefficients coef = coefficients_from_angles(angles);
    const double mean = trapz([&](double z) { return z * snp_density(z, coef); });
    const double second =
        trapz([&](double z) { return z * z * snp_density(z, coef); });
    const LatentMoments m = latent_moments(angles);
    CHECK(m.mean == doctest::Approx(mean).epsilon(1e-8));
    CHECK(m.variance == doctest::Approx(second - mean * mean).epsilon(1e-8));
  }
}

TEST_CASE("degree zero moments are standard normal") {
  const LatentMoments m = latent_moments(SnpAngles(0, {}));
  CHECK(m.mean == doctest::Approx(0.0));
  CHECK(m.variance == doctest::Approx(1.0));
}

TEST_CASE("rescaling maps raw item parameters onto the standardized scale") {
  ItemParams raw;
  raw.intercepts = Eigen::VectorXd::LinSpaced(4, -0.8, 1.1);
  raw.slopes = Eigen::VectorXd::LinSpaced(4, 0.5, 1.5);
  LatentMoments m;
  m.mean = -0.4;
  m.variance = 1.375;
  const ItemParams out = rescale_item_params(raw, m);
  const double sd = std::sqrt(m.variance);
  for (int j = 0; j < 4; ++j) {
    CHECK(out.slopes[j] == doctest::Approx(raw.slopes[j] * sd).epsilon(1e-15));
    CHECK(out.intercepts[j] ==
          doctest::Approx(raw.intercepts[j] + raw.slopes[j] * m.mean).epsilon(1e-15));
  }
  // identity moments leave the parameters unchanged
  const ItemParams same = rescale_item_params(raw, LatentMoments{});
  CHECK((same.stacked() - raw.stacked()).cwiseAbs().maxCoeff() == 0.0);

  LatentMoments bad;
  bad.variance = 0.0;
  CHECK_THROWS_AS(rescale_item_params(raw, bad), DomainError);
}

TEST_CASE("rescaling with the fitted moments is invariant at the normal reduction") {
  // at the boundary the latent is standard normal, so raw and rescaled coincide
  const LatentMoments m = latent_moments(SnpAngles(1, {kHalfPi}));
  CHECK(m.mean == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(m.variance == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("item parameter containers validate their shape") {
  ItemParams bad;
  bad.intercepts = Eigen::VectorXd::Zero(3);
  bad.slopes = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(bad.validate(), DomainError);
  ItemParams empty;
  CHECK_THROWS_AS(empty.validate(), DomainError);
  ItemParams ok;
  ok.intercepts = Eigen::VectorXd::Zero(2);
  ok.slopes = Eigen::VectorXd::Ones(2);
  CHECK_NOTHROW(ok.validate());
  ExtendedParams ext;
  ext.items = ok;
  ext.angles = SnpAngles(1, {0.25});
  CHECK(ext.dim() == 5);
  const Eigen::VectorXd x = ext.stacked();
  CHECK(x.size() == 5);
  CHECK(x[4] == doctest::Approx(0.25));
}

} // TEST_SUITE
