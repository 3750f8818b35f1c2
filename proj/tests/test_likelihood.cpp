#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "snpirt/data.hpp"
#include "snpirt/likelihood.hpp"
#include "snpirt/simulation.hpp"

using namespace snpirt;

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// latent density built from scratch: the squared polynomial times the normal
// pdf, with coefficients written out trigonometrically so the reference shares
// no code with the library path under test
double reference_density(double z, const SnpAngles& angles) {
  double poly = 1.0;
  const auto& phi = angles.phi();
  if (angles.degree() == 1) {
    poly = std::sin(phi[0]) + std::cos(phi[0]) * z;
  } else if (angles.degree() == 2) {
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const double a0 =
        std::sin(phi[0]) - inv_sqrt2 * std::cos(phi[0]) * std::cos(phi[1]);
    const double a1 = std::cos(phi[0]) * std::sin(phi[1]);
    const double a2 = inv_sqrt2 * std::cos(phi[0]) * std::cos(phi[1]);
    poly = a0 + a1 * z + a2 * z * z;
  }
  const double norm_pdf =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return poly * poly * norm_pdf;
}

// log of the marginal probability of one response row by direct integration
double reference_row_loglik(const ResponseMatrix& data, int row,
                            const ExtendedParams& params) {
  const int p = data.items();
  const double lo = -10.0, hi = 10.0;
  const int cells = 20000;
  const double h = (hi - lo) / cells;
  auto integrand = [&](double z) {
    double prod = reference_density(z, params.angles);
    for (int j = 0; j < p; ++j) {
      const double pr =
          sigmoid(params.items.intercepts[j] + params.items.slopes[j] * z);
      prod *= data(row, j) == 1 ? pr : 1.0 - pr;
    }
    return prod;
  };
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i < cells; ++i) acc += integrand(lo + i * h);
  return std::log(acc * h);
}

// bivariate margin probability under the normal latent density
double reference_pair_prob(int yj, int yk, double b0j, double b1j, double b0k,
                           double b1k) {
  const double lo = -10.0, hi = 10.0;
  const int cells = 20000;
  const double h = (hi - lo) / cells;
  auto integrand = [&](double z) {
    const double pj = sigmoid(b0j + b1j * z);
    const double pk = sigmoid(b0k + b1k * z);
    const double tj = yj == 1 ? pj : 1.0 - pj;
    const double tk = yk == 1 ? pk : 1.0 - pk;
    return tj * tk * std::exp(-0.5 * z * z) /
           std::sqrt(2.0 * std::numbers::pi);
  };
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i < cells; ++i) acc += integrand(lo + i * h);
  return acc * h;
}

ResponseMatrix small_fixture(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ItemParams truth;
  truth.intercepts = Eigen::VectorXd::LinSpaced(p, -0.6, 0.9);
  truth.slopes = Eigen::VectorXd::LinSpaced(p, 0.6, 1.4);
  return simulate_dataset(truth, LatentSpec::standard_normal(), n, rng);
}

ExtendedParams make_params(int p, int degree, std::vector<double> phi) {
  ExtendedParams out;
  out.items.intercepts = Eigen::VectorXd::LinSpaced(p, -0.7, 1.0);
  out.items.slopes = Eigen::VectorXd::LinSpaced(p, 0.5, 1.5);
  out.angles = SnpAngles(degree, std::move(phi));
  return out;
}

} // namespace

TEST_SUITE("likelihood") {

TEST_CASE("response curve is the logistic function of the linear predictor") {
  CHECK(response_prob(0.0, 0.0, 3.0) == doctest::Approx(0.5));
  CHECK(response_prob(1.2, 0.0, -5.0) == doctest::Approx(sigmoid(1.2)));
  CHECK(response_prob(0.4, 0.8, 1.5) == doctest::Approx(sigmoid(0.4 + 1.2)));
  CHECK(response_prob(-30.0, 1.0, 0.0) > 0.0);
  CHECK(response_prob(30.0, 1.0, 0.0) < 1.0);
  // monotone in the latent for positive slope
  double prev = 0.0;
  for (double z = -4.0; z <= 4.0; z += 0.5) {
    const double cur = response_prob(0.3, 1.1, z);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("marginal log likelihood matches dense integration for each degree") {
  const ResponseMatrix data = small_fixture(20, 3, 91u);
  const QuadratureRule rule = gauss_hermite_rule(40);
  const std::vector<ExtendedParams> cases = {
      make_params(3, 0, {}), make_params(3, 1, {0.5}),
      make_params(3, 1, {-1.2}), make_params(3, 2, {0.7, 1.0})};
  for (const ExtendedParams& params : cases) {
    const LoglikValue ll = full_loglik(data, params, rule);
    REQUIRE(ll.per_observation.size() == data.rows());
    double total = 0.0;
    for (int i = 0; i < data.rows(); ++i) {
      const double ref = reference_row_loglik(data, i, params);
      CHECK(ll.per_observation[i] == doctest::Approx(ref).epsilon(1e-7));
      total += ref;
    }
    CHECK(ll.total == doctest::Approx(total).epsilon(1e-9));
    CHECK(ll.total == doctest::Approx(ll.per_observation.sum()).epsilon(1e-12));
  }
}

TEST_CASE("pairwise log likelihood matches dense bivariate margins") {
  const ResponseMatrix data = small_fixture(15, 4, 17u);
  const QuadratureRule rule = gauss_hermite_rule(40);
  ItemParams params;
  params.intercepts = Eigen::VectorXd::LinSpaced(4, -0.5, 0.8);
  params.slopes = Eigen::VectorXd::LinSpaced(4, 0.6, 1.3);
  const LoglikValue pl = pairwise_loglik(data, params, rule);
  REQUIRE(pl.per_observation.size() == data.rows());
  for (int i = 0; i < data.rows(); ++i) {
    double ref = 0.0;
    for (int j = 0; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        ref += std::log(reference_pair_prob(
            data(i, j), data(i, k), params.intercepts[j], params.slopes[j],
            params.intercepts[k], params.slopes[k]));
    CHECK(pl.per_observation[i] == doctest::Approx(ref).epsilon(1e-7));
  }
  CHECK(pl.total == doctest::Approx(pl.per_observation.sum()).epsilon(1e-12));
}

TEST_CASE("with two items the pairwise objective equals the marginal one") {
  const ResponseMatrix data = small_fixture(40, 2, 23u);
  const QuadratureRule rule = gauss_hermite_rule(40);
  const ExtendedParams params = make_params(2, 0, {});
  const LoglikValue full = full_loglik(data, params, rule);
  const LoglikValue pair = pairwise_loglik(data, params.items, rule);
  CHECK(full.total == doctest::Approx(pair.total).epsilon(1e-10));
  for (int i = 0; i < data.rows(); ++i)
    CHECK(full.per_observation[i] ==
          doctest::Approx(pair.per_observation[i]).epsilon(1e-10));
}

TEST_CASE("identical response rows receive identical contributions") {
  ResponseMatrix data(4, 3);
  for (int j = 0; j < 3; ++j) {
    data.set(0, j, j % 2);
    data.set(2, j, j % 2);  // duplicate of row 0
    data.set(1, j, 1);
    data.set(3, j, 0);
  }
  const QuadratureRule rule = gauss_hermite_rule(30);
  const ExtendedParams params = make_params(3, 1, {0.4});
  const LoglikValue ll = full_loglik(data, params, rule);
  CHECK(ll.per_observation[0] == doctest::Approx(ll.per_observation[2]).epsilon(1e-14));
}

TEST_CASE("quadrature size past convergence leaves the totals unchanged") {
  const ResponseMatrix data = small_fixture(20, 3, 5u);
  // moderate slopes: the logistic factor limits the geometric quadrature rate,
  // so the steep-slope regime is covered by the dense-oracle cases instead
  auto mild = [](int degree, std::vector<double> phi) {
    ExtendedParams out;
    out.items.intercepts = Eigen::VectorXd::LinSpaced(3, -0.5, 0.8);
    out.items.slopes = Eigen::VectorXd::LinSpaced(3, 0.5, 1.1);
    out.angles = SnpAngles(degree, std::move(phi));
    return out;
  };
  for (const ExtendedParams& params :
       {mild(0, {}), mild(1, {0.8}), mild(2, {0.4, -0.9})}) {
    const double a = full_loglik(data, params, gauss_hermite_rule(30)).total;
    const double b = full_loglik(data, params, gauss_hermite_rule(60)).total;
    CHECK(std::abs(a - b) < 1e-7);
  }
}

TEST_CASE("score rows sum to a central-difference gradient of the total") {
  const ResponseMatrix data = small_fixture(25, 3, 57u);
  const QuadratureRule rule = gauss_hermite_rule(30);
  const ExtendedParams params = make_params(3, 1, {0.3});
  const Eigen::MatrixXd scores =
      score_contributions(Objective::full_ml, data, params, rule);
  REQUIRE(scores.rows() == data.rows());
  REQUIRE(scores.cols() == 7);
  const Eigen::VectorXd grad = scores.colwise().sum();
  // independent finite difference with a coarser step than the library uses
  Eigen::VectorXd x = params.stacked();
  for (int k = 0; k < x.size(); ++k) {
    const double h = 3e-5 * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    auto eval = [&](const Eigen::VectorXd& v) {
      ExtendedParams q = params;
      q.items.intercepts = v.head(3);
      q.items.slopes = v.segment(3, 3);
      q.angles = SnpAngles(1, {v[6]});
      return full_loglik(data, q, rule).total;
    };
    const double ref = (eval(xp) - eval(xm)) / (2.0 * h);
    CHECK(grad[k] == doctest::Approx(ref).epsilon(5e-4));
  }

  // the pairwise objective is defined for the normal-latent model only
  const Eigen::MatrixXd pl_scores =
      score_contributions(Objective::pairwise, data, make_params(3, 0, {}), rule);
  CHECK(pl_scores.cols() == 6);
  CHECK(pl_scores.rows() == data.rows());
  CHECK_THROWS_AS(score_contributions(Objective::pairwise, data, params, rule),
                  DomainError);
}

TEST_CASE("dimension mismatches are refused") {
  const ResponseMatrix data = small_fixture(10, 3, 3u);
  const QuadratureRule rule = gauss_hermite_rule(20);
  CHECK_THROWS_AS(full_loglik(data, make_params(4, 0, {}), rule), DomainError);
  ItemParams two;
  two.intercepts = Eigen::VectorXd::Zero(2);
  two.slopes = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(pairwise_loglik(data, two, rule), DomainError);
}

} // TEST_SUITE
