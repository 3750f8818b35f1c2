#include "snpirt/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detail.hpp"
#include "eval.hpp"
#include "snpirt/errors.hpp"

namespace snpirt {

namespace {

double chi2_upper(double x, double dof) {
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double chi2_quantile(double prob, double dof) {
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::quantile(dist, prob);
}

void check_alphas(const std::vector<double>& alphas) {
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw DomainError("test level " + std::to_string(a) + " outside (0, 1)");
}

Eigen::MatrixXd invert_or_throw(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible())
    throw InferenceError("covariance assembly failed: singular " + what + " Hessian");
  return lu.inverse();
}

} // namespace

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd h(d);
  for (int i = 0; i < d; ++i) h[i] = 1e-4 * std::max(1.0, std::abs(x[i]));
  Eigen::MatrixXd H(d, d);
  const double f0 = f(x);
  Eigen::VectorXd xt = x;
  for (int i = 0; i < d; ++i) {
    xt[i] = x[i] + h[i];
    const double fp = f(xt);
    xt[i] = x[i] - h[i];
    const double fm = f(xt);
    xt[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      xt[i] = x[i] + h[i];
      xt[j] = x[j] + h[j];
      const double fpp = f(xt);
      xt[j] = x[j] - h[j];
      const double fpm = f(xt);
      xt[i] = x[i] - h[i];
      const double fmm = f(xt);
      xt[j] = x[j] + h[j];
      const double fmp = f(xt);
      xt[i] = x[i];
      xt[j] = x[j];
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

Eigen::MatrixXd observed_hessian(Objective objective, const ResponseMatrix& data,
                                 const ExtendedParams& params,
                                 const QuadratureRule& rule) {
  params.items.validate();
  if (objective == Objective::pairwise) {
    if (params.angles.degree() != 0)
      throw DomainError("observed_hessian: pairwise objective has no angles");
    detail::PairwiseEvaluator ev(data, rule);
    return fd_hessian([&ev](const Eigen::VectorXd& x) { return ev.value(x); },
                      params.items.stacked());
  }
  detail::FullEvaluator ev(data, params.angles.degree(), rule);
  return fd_hessian([&ev](const Eigen::VectorXd& x) { return ev.value(x); },
                    detail::pack(params));
}

Eigen::MatrixXd observed_hessian_rescaled(const ResponseMatrix& data,
                                          const ExtendedParams& final_params,
                                          const QuadratureRule& rule) {
  detail::RescaledEvaluator ev(data, final_params.angles.degree(), rule);
  return fd_hessian([&ev](const Eigen::VectorXd& x) { return ev.value(x); },
                    detail::pack(final_params));
}

Eigen::MatrixXd score_contributions_rescaled(const ResponseMatrix& data,
                                             const ExtendedParams& final_params,
                                             const QuadratureRule& rule) {
  detail::RescaledEvaluator ev(data, final_params.angles.degree(), rule);
  return detail::fd_score_matrix(
      [&ev](const Eigen::VectorXd& x, Eigen::VectorXd& v) { ev.per_observation(x, v); },
      detail::pack(final_params), data.rows());
}

Eigen::MatrixXd score_crossproduct(const Eigen::MatrixXd& scores) {
  return scores.transpose() * scores;
}

Eigen::MatrixXd cross_model_matrix(const Eigen::MatrixXd& pairwise_scores,
                                   const Eigen::MatrixXd& full_scores) {
  if (pairwise_scores.rows() != full_scores.rows())
    throw DomainError("cross_model_matrix: score matrices cover different observations");
  return pairwise_scores.transpose() * full_scores;
}

GhCovariance assemble_S(const SandwichParts& pairwise_parts,
                        const SandwichParts& full_parts,
                        const Eigen::MatrixXd& cross_matrix, int degree) {
  const int q = static_cast<int>(pairwise_parts.hessian.rows());  // 2p
  const int d = q + degree;
  if (pairwise_parts.hessian.cols() != q || pairwise_parts.crossprod.rows() != q ||
      pairwise_parts.crossprod.cols() != q)
    throw DomainError("assemble_S: pairwise parts are not square 2p blocks");
  if (full_parts.hessian.rows() != d || full_parts.hessian.cols() != d ||
      full_parts.crossprod.rows() != d || full_parts.crossprod.cols() != d)
    throw DomainError("assemble_S: full parts must be (2p + L) square");
  if (cross_matrix.rows() != q || cross_matrix.cols() != d)
    throw DomainError("assemble_S: cross matrix must be 2p x (2p + L)");

  const Eigen::MatrixXd inv_full = invert_or_throw(full_parts.hessian, "full-model");
  const Eigen::MatrixXd inv_pl = invert_or_throw(pairwise_parts.hessian, "pairwise");
  // the full-model inverse enters with its angle rows dropped, keeping the
  // item-parameter block of the expansion
  const Eigen::MatrixXd top = inv_full.topRows(q);
  const Eigen::MatrixXd term_full = top * full_parts.crossprod * top.transpose();
  const Eigen::MatrixXd term_pl = inv_pl * pairwise_parts.crossprod * inv_pl.transpose();
  const Eigen::MatrixXd cross = top * cross_matrix.transpose() * inv_pl.transpose();
  Eigen::MatrixXd S = term_full + term_pl - cross - cross.transpose();
  S = 0.5 * (S + S.transpose()).eval();

  GhCovariance out;
  out.S = S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
  if (solver.info() != Eigen::Success)
    throw InferenceError("covariance assembly failed: eigen decomposition error");
  Eigen::VectorXd ev = solver.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });
  out.eigenvalues = ev;
  const double max_abs = ev.size() ? std::abs(ev[0]) : 0.0;
  const double cutoff = 1e-8 * max_abs;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) > cutoff && max_abs > 0.0) {
      ++out.rank;
      out.lambda_sum += ev[i];
      out.lambda_sumsq += ev[i] * ev[i];
    }
  }
  if (out.rank > 0) {
    if (out.lambda_sum <= 0.0)
      throw InferenceError("indefinite covariance, difference test unavailable");
    out.a_scale = out.lambda_sumsq / out.lambda_sum;
    out.b_dof = out.lambda_sum * out.lambda_sum / out.lambda_sumsq;
    // moment identities must hold to rounding; anything else is a logic error
    const double tol = 1e-10 * std::max(1.0, std::abs(out.lambda_sum));
    if (std::abs(out.a_scale * out.b_dof - out.lambda_sum) > tol ||
        std::abs(out.a_scale * out.a_scale * out.b_dof - out.lambda_sumsq) >
            1e-10 * std::max(1.0, out.lambda_sumsq))
      throw InferenceError("covariance moment identities violated");
  }
  return out;
}

TestReport gh_t_test(const Eigen::VectorXd& diff, const GhCovariance& cov,
                     const std::vector<double>& alphas) {
  check_alphas(alphas);
  if (diff.size() != cov.S.rows())
    throw DomainError("gh_t_test: difference vector does not match the covariance");
  if (cov.rank < 1 || !(cov.b_dof > 0.0))
    throw InferenceError("gh_t_test: degenerate covariance (rank 0)");
  TestReport report;
  report.name = "gh_t";
  report.statistic = diff.squaredNorm();
  report.dof = cov.b_dof;
  report.p_value = chi2_upper(report.statistic / cov.a_scale, cov.b_dof);
  for (double a : alphas) {
    const double crit = cov.a_scale * chi2_quantile(1.0 - a, cov.b_dof);
    report.rejections.emplace_back(a, report.statistic >= crit);
  }
  report.details["a_scale"] = cov.a_scale;
  report.details["b_dof"] = cov.b_dof;
  report.details["rank"] = static_cast<double>(cov.rank);
  report.details["lambda_sum"] = cov.lambda_sum;
  report.details["lambda_sumsq"] = cov.lambda_sumsq;
  return report;
}

TestReport gh_t_test(const ItemParams& full_rescaled, const ItemParams& pairwise,
                     const GhCovariance& cov, const std::vector<double>& alphas) {
  full_rescaled.validate();
  pairwise.validate();
  if (full_rescaled.item_count() != pairwise.item_count())
    throw DomainError("gh_t_test: estimators cover different item counts");
  return gh_t_test(full_rescaled.stacked() - pairwise.stacked(), cov, alphas);
}

TestReport gh_full_test(const Eigen::VectorXd& diff, const GhCovariance& cov,
                        const std::vector<double>& alphas) {
  check_alphas(alphas);
  if (diff.size() != cov.S.rows())
    throw DomainError("gh_full_test: difference vector does not match the covariance");
  double min_abs = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (int i = 0; i < cov.eigenvalues.size(); ++i) {
    min_abs = std::min(min_abs, std::abs(cov.eigenvalues[i]));
    max_abs = std::max(max_abs, std::abs(cov.eigenvalues[i]));
  }
  if (!(min_abs > 0.0) || max_abs / min_abs > 1e12)
    throw InferenceError(
        "gh_full_test: covariance condition number exceeds 1e12; "
        "use the squared-norm variant");
  TestReport report;
  report.name = "gh";
  report.dof = static_cast<double>(diff.size());
  report.statistic = diff.dot(cov.S.ldlt().solve(diff));
  report.p_value = chi2_upper(report.statistic, report.dof);
  for (double a : alphas)
    report.rejections.emplace_back(a, report.statistic >= chi2_quantile(1.0 - a, report.dof));
  return report;
}

TestReport lr_test(double loglik_l, double loglik_0, int degree,
                   const std::vector<double>& alphas) {
  check_alphas(alphas);
  if (degree < 1)
    throw DomainError("lr_test: degree must be at least 1");
  double stat = 2.0 * (loglik_l - loglik_0);
  if (stat < -1e-6)
    throw InferenceError("lr_test: likelihood ordering violated (statistic " +
                         std::to_string(stat) + ")");
  stat = std::max(stat, 0.0);
  TestReport report;
  report.name = "lr";
  report.statistic = stat;
  report.dof = static_cast<double>(degree);
  report.p_value = chi2_upper(stat, report.dof);
  for (double a : alphas)
    report.rejections.emplace_back(a, stat >= chi2_quantile(1.0 - a, report.dof));
  return report;
}

namespace {

// model margins (univariate then pairwise, pairs in j < k order) under the
// normal-latent model; conditional independence given the latent value
Eigen::VectorXd model_margins(const Eigen::VectorXd& x, int p,
                              const Eigen::VectorXd& nodes, const Eigen::VectorXd& w) {
  const int Q = static_cast<int>(nodes.size());
  Eigen::MatrixXd pi(p, Q);
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q)
      pi(j, q) = response_prob(x[j], x[p + j], nodes[q]);
  Eigen::VectorXd m(p + p * (p - 1) / 2);
  m.head(p) = pi * w;
  int idx = p;
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k)
      m[idx++] = (pi.row(j).array() * pi.row(k).array() * w.transpose().array()).sum();
  return m;
}

} // namespace

TestReport m2_test(const ResponseMatrix& data, const ItemParams& params,
                   const QuadratureRule& rule, const std::vector<double>& alphas) {
  check_alphas(alphas);
  params.validate();
  const int p = data.items();
  if (params.item_count() != p) throw DomainError("m2_test: item count mismatch");
  if (p < 5)
    throw InferenceError("M2 undefined for p = " + std::to_string(p) +
                         "; at least 5 items are required");
  const int n = data.rows();
  const int s = p + p * (p - 1) / 2;
  const int Q = static_cast<int>(rule.nodes.size());
  const Eigen::VectorXd x = params.stacked();

  // observed univariate and bivariate margins
  Eigen::VectorXd sample = Eigen::VectorXd::Zero(s);
  for (int i = 0; i < n; ++i) {
    int idx = p;
    for (int j = 0; j < p; ++j) {
      if (data(i, j)) sample[j] += 1.0;
      for (int k = j + 1; k < p; ++k) {
        if (data(i, j) && data(i, k)) sample[idx] += 1.0;
        ++idx;
      }
    }
  }
  sample /= static_cast<double>(n);

  const Eigen::VectorXd fitted = model_margins(x, p, rule.nodes, rule.weights);
  const Eigen::VectorXd resid = sample - fitted;

  // multinomial covariance of the margin indicators needs joint positive
  // probabilities up to quadruples
  Eigen::MatrixXd pi(p, Q);
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q)
      pi(j, q) = response_prob(x[j], x[p + j], rule.nodes[q]);
  std::vector<std::vector<int>> sets;
  sets.reserve(static_cast<std::size_t>(s));
  for (int j = 0; j < p; ++j) sets.push_back({j});
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k) sets.push_back({j, k});
  auto joint_prob = [&](const std::vector<int>& items) {
    Eigen::ArrayXd prod = Eigen::ArrayXd::Ones(Q);
    for (int j : items) prod *= pi.row(j).transpose().array();
    return (prod * rule.weights.array()).sum();
  };
  Eigen::MatrixXd xi(s, s);
  for (int a = 0; a < s; ++a) {
    for (int b = a; b < s; ++b) {
      std::vector<int> u = sets[static_cast<std::size_t>(a)];
      for (int j : sets[static_cast<std::size_t>(b)])
        if (std::find(u.begin(), u.end(), j) == u.end()) u.push_back(j);
      const double pu = joint_prob(u);
      xi(a, b) = xi(b, a) = pu - fitted[a] * fitted[b];
    }
  }

  // margin Jacobian by central differences
  Eigen::MatrixXd delta(s, 2 * p);
  Eigen::VectorXd xt = x;
  for (int i = 0; i < 2 * p; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    xt[i] = x[i] + h;
    const Eigen::VectorXd mp = model_margins(xt, p, rule.nodes, rule.weights);
    xt[i] = x[i] - h;
    const Eigen::VectorXd mm = model_margins(xt, p, rule.nodes, rule.weights);
    xt[i] = x[i];
    delta.col(i) = (mp - mm) / (2.0 * h);
  }

  Eigen::LDLT<Eigen::MatrixXd> xi_ldlt(xi);
  if (xi_ldlt.info() != Eigen::Success)
    throw InferenceError("m2_test: margin covariance is nearly singular "
                         "(collinear margins)");
  const Eigen::VectorXd dvec = xi_ldlt.vectorD();
  if (!(dvec.minCoeff() > 1e-12 * dvec.maxCoeff()))
    throw InferenceError("m2_test: margin covariance is nearly singular "
                         "(collinear margins)");
  const Eigen::VectorXd t1 = xi_ldlt.solve(resid);
  const Eigen::MatrixXd w_delta = xi_ldlt.solve(delta);
  const Eigen::MatrixXd gram = delta.transpose() * w_delta;
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
  if (gram_ldlt.info() != Eigen::Success ||
      !(gram_ldlt.vectorD().minCoeff() > 1e-12 * gram_ldlt.vectorD().maxCoeff()))
    throw InferenceError("m2_test: margins Jacobian is rank deficient");
  const Eigen::VectorXd u = delta.transpose() * t1;
  double stat = n * (resid.dot(t1) - u.dot(gram_ldlt.solve(u)));
  if (stat < -1e-6) throw InferenceError("m2_test: negative statistic " + std::to_string(stat));
  stat = std::max(stat, 0.0);

  TestReport report;
  report.name = "m2";
  report.statistic = stat;
  report.dof = static_cast<double>(s - 2 * p);
  report.p_value = chi2_upper(stat, report.dof);
  for (double a : alphas)
    report.rejections.emplace_back(a, stat >= chi2_quantile(1.0 - a, report.dof));
  report.details["margin_count"] = static_cast<double>(s);
  return report;
}

IcValues information_criteria(double loglik, int k, long n) {
  if (k < 1) throw DomainError("information_criteria: k must be positive");
  if (n < 3) throw DomainError("information_criteria: need n >= 3");
  IcValues out;
  out.loglik = loglik;
  out.k = k;
  out.n = n;
  const double nn = static_cast<double>(n);
  out.aic = -2.0 * loglik + 2.0 * k;
  out.bic = -2.0 * loglik + k * std::log(nn);
  out.hq = -2.0 * loglik + 2.0 * k * std::log(std::log(nn));
  return out;
}

GhPipelineResult gh_t_from_fits(const ResponseMatrix& data, const FitResult& pairwise_fit,
                                const FitResult& snpl_fit, const QuadratureRule& rule,
                                const std::vector<double>& alphas) {
  if (pairwise_fit.objective != Objective::pairwise)
    throw DomainError("gh_t_from_fits: first fit must be the pairwise one");
  if (snpl_fit.raw_params.angles.degree() < 1)
    throw DomainError("gh_t_from_fits: second fit must have degree >= 1");
  const int degree = snpl_fit.raw_params.angles.degree();

  SandwichParts pl_parts;
  pl_parts.hessian =
      observed_hessian(Objective::pairwise, data, pairwise_fit.raw_params, rule);
  const Eigen::MatrixXd pl_scores =
      score_contributions(Objective::pairwise, data, pairwise_fit.raw_params, rule);
  pl_parts.crossprod = score_crossproduct(pl_scores);

  SandwichParts full_parts;
  full_parts.hessian = observed_hessian_rescaled(data, snpl_fit.final_params, rule);
  const Eigen::MatrixXd full_scores =
      score_contributions_rescaled(data, snpl_fit.final_params, rule);
  full_parts.crossprod = score_crossproduct(full_scores);

  GhPipelineResult out;
  out.cov = assemble_S(pl_parts, full_parts,
                       cross_model_matrix(pl_scores, full_scores), degree);
  out.diff = snpl_fit.final_params.items.stacked() - pairwise_fit.raw_params.items.stacked();
  out.report = gh_t_test(out.diff, out.cov, alphas);
  return out;
}

} // namespace snpirt
