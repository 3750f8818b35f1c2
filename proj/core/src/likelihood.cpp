#include "snpirt/likelihood.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "detail.hpp"
#include "eval.hpp"
#include "snpirt/errors.hpp"

namespace snpirt {

namespace {

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double eta) {  // log(1 + e^eta)
  if (eta > 33.0) return eta;
  if (eta < -33.0) return 0.0;
  return std::log1p(std::exp(eta));
}

void check_rule(const QuadratureRule& rule) {
  if (rule.nodes.size() < 1 || rule.nodes.size() != rule.weights.size())
    throw DomainError("quadrature rule is empty or inconsistent");
}

} // namespace

double response_prob(double intercept, double slope, double z) {
  return logistic(intercept + slope * z);
}

namespace detail {

PatternTable PatternTable::build(const ResponseMatrix& data) {
  PatternTable out;
  out.n = data.rows();
  out.p = data.items();
  out.row_pattern.resize(static_cast<std::size_t>(out.n));
  std::unordered_map<std::string, int> index;
  index.reserve(static_cast<std::size_t>(out.n));
  std::vector<double> counts;
  const auto& cells = data.storage();
  std::string key(static_cast<std::size_t>(out.p), '\0');
  for (int i = 0; i < out.n; ++i) {
    key.assign(reinterpret_cast<const char*>(cells.data()) +
                   static_cast<std::size_t>(i) * out.p,
               static_cast<std::size_t>(out.p));
    auto [it, inserted] = index.emplace(key, static_cast<int>(counts.size()));
    if (inserted) counts.push_back(0.0);
    counts[static_cast<std::size_t>(it->second)] += 1.0;
    out.row_pattern[static_cast<std::size_t>(i)] = it->second;
  }
  out.n_pat = static_cast<int>(counts.size());
  out.counts = Eigen::Map<Eigen::VectorXd>(counts.data(), out.n_pat);
  out.Y = Eigen::MatrixXd::Zero(out.n_pat, out.p);
  out.ones.assign(static_cast<std::size_t>(out.n_pat), {});
  for (const auto& [key_str, r] : index) {
    for (int j = 0; j < out.p; ++j) {
      if (key_str[static_cast<std::size_t>(j)]) {
        out.Y(r, j) = 1.0;
        out.ones[static_cast<std::size_t>(r)].push_back(j);
      }
    }
  }
  return out;
}

FullEvaluator::FullEvaluator(const ResponseMatrix& data, int degree,
                             const QuadratureRule& rule)
    : degree_(degree), pat_(PatternTable::build(data)) {
  check_rule(rule);
  if (degree_ < 0 || degree_ > kMaxDegree)
    throw DomainError("FullEvaluator: degree " + std::to_string(degree_));
  const int Q = static_cast<int>(rule.nodes.size());
  x_nodes_ = rule.nodes;
  lnw_ = rule.weights.array().log().matrix();
  vand_.resize(Q, degree_ + 1);
  for (int q = 0; q < Q; ++q) {
    double v = 1.0;
    for (int l = 0; l <= degree_; ++l) {
      vand_(q, l) = v;
      v *= x_nodes_[q];
    }
  }
  n_ones_ = pat_.Y.transpose() * pat_.counts;
  pi_.resize(pat_.p, Q);
}

void FullEvaluator::prepare(const Eigen::VectorXd& x) {
  const int p = pat_.p;
  const int Q = static_cast<int>(x_nodes_.size());
  if (static_cast<int>(x.size()) != dim())
    throw DomainError("FullEvaluator: parameter vector has length " +
                      std::to_string(x.size()) + ", expected " + std::to_string(dim()));
  if (degree_ == 0) {
    poly_ = Eigen::VectorXd::Ones(Q);
    ptil_ = poly_;
  } else {
    poly_ = vand_ * detail::poly_coeffs(x.tail(degree_));
    ptil_ = poly_.cwiseProduct(poly_);
  }
  base_ = lnw_;
  for (int j = 0; j < p; ++j) {
    const double a0 = x[j], a1 = x[p + j];
    for (int q = 0; q < Q; ++q) {
      const double eta = a0 + a1 * x_nodes_[q];
      pi_(j, q) = logistic(eta);
      base_[q] -= softplus(eta);  // log(1 - pi)
    }
  }
  // v_rq = base_q + sum of eta over items answered 1, split into the
  // intercept part (node free) and the slope part (times the node)
  s0_.resize(pat_.n_pat);
  s1_.resize(pat_.n_pat);
  for (int r = 0; r < pat_.n_pat; ++r) {
    double a0sum = 0.0, a1sum = 0.0;
    for (int j : pat_.ones[static_cast<std::size_t>(r)]) {
      a0sum += x[j];
      a1sum += x[p + j];
    }
    s0_[r] = a0sum;
    s1_[r] = a1sum;
  }
  expv_ = s1_ * x_nodes_.transpose();
  expv_.rowwise() += base_.transpose();
  shift_ = expv_.rowwise().maxCoeff();
  expv_ = (expv_.colwise() - shift_).array().exp();
  denom_ = expv_ * ptil_;
  lpat_.resize(pat_.n_pat);
  for (int r = 0; r < pat_.n_pat; ++r)
    lpat_[r] = denom_[r] > 0.0
                   ? s0_[r] + shift_[r] + std::log(denom_[r])
                   : -std::numeric_limits<double>::infinity();
}

double FullEvaluator::value(const Eigen::VectorXd& x) {
  prepare(x);
  return pat_.counts.dot(lpat_);
}

double FullEvaluator::value_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  prepare(x);
  const int p = pat_.p;
  grad.resize(dim());
  const Eigen::VectorXd t = pat_.counts.cwiseQuotient(denom_);
  const Eigen::VectorXd wagg = (expv_.transpose() * t).cwiseProduct(ptil_);
  grad.segment(0, p) = n_ones_ - pi_ * wagg;
  // posterior mean node per pattern feeds the slope part
  const Eigen::VectorXd tnode =
      (expv_ * ptil_.cwiseProduct(x_nodes_)).cwiseQuotient(denom_);
  Eigen::VectorXd cvec = Eigen::VectorXd::Zero(p);
  for (int r = 0; r < pat_.n_pat; ++r) {
    const double w = pat_.counts[r] * tnode[r];
    for (int j : pat_.ones[static_cast<std::size_t>(r)]) cvec[j] += w;
  }
  grad.segment(p, p) = cvec - pi_ * wagg.cwiseProduct(x_nodes_);
  if (degree_ > 0) {
    const Eigen::MatrixXd ja = detail::poly_coeffs_jacobian(x.tail(degree_));
    for (int m = 0; m < degree_; ++m) {
      const Eigen::VectorXd dptil =
          2.0 * poly_.cwiseProduct(vand_ * ja.col(m));
      grad[2 * p + m] = t.dot(expv_ * dptil);
    }
  }
  return pat_.counts.dot(lpat_);
}

void FullEvaluator::per_observation(const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  prepare(x);
  out.resize(pat_.n);
  for (int i = 0; i < pat_.n; ++i)
    out[i] = lpat_[pat_.row_pattern[static_cast<std::size_t>(i)]];
}

PairwiseEvaluator::PairwiseEvaluator(const ResponseMatrix& data,
                                     const QuadratureRule& rule)
    : pat_(PatternTable::build(data)) {
  check_rule(rule);
  if (pat_.p < 2)
    throw DomainError("pairwise likelihood needs at least 2 items, got " +
                      std::to_string(pat_.p));
  x_nodes_ = rule.nodes;
  w_ = rule.weights;
  for (int j = 0; j < pat_.p; ++j)
    for (int k = j + 1; k < pat_.p; ++k) pairs_.emplace_back(j, k);
  cnt_ = Eigen::MatrixXd::Zero(static_cast<int>(pairs_.size()), 4);
  for (int idx = 0; idx < static_cast<int>(pairs_.size()); ++idx) {
    const auto [j, k] = pairs_[static_cast<std::size_t>(idx)];
    for (int r = 0; r < pat_.n_pat; ++r) {
      const int cell = 2 * static_cast<int>(pat_.Y(r, j)) + static_cast<int>(pat_.Y(r, k));
      cnt_(idx, cell) += pat_.counts[r];
    }
  }
  pi_.resize(pat_.p, static_cast<int>(x_nodes_.size()));
  cell_.resize(static_cast<int>(pairs_.size()), 4);
}

void PairwiseEvaluator::tables(const Eigen::VectorXd& x) {
  const int p = pat_.p;
  const int Q = static_cast<int>(x_nodes_.size());
  if (static_cast<int>(x.size()) != 2 * p)
    throw DomainError("PairwiseEvaluator: parameter vector has length " +
                      std::to_string(x.size()) + ", expected " + std::to_string(2 * p));
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q) pi_(j, q) = logistic(x[j] + x[p + j] * x_nodes_[q]);
  margin_ = pi_ * w_;
  for (int idx = 0; idx < static_cast<int>(pairs_.size()); ++idx) {
    const auto [j, k] = pairs_[static_cast<std::size_t>(idx)];
    const double p11 =
        (pi_.row(j).array() * pi_.row(k).array() * w_.transpose().array()).sum();
    const double p10 = margin_[j] - p11;
    const double p01 = margin_[k] - p11;
    const double p00 = 1.0 - margin_[j] - margin_[k] + p11;
    cell_(idx, 3) = std::max(p11, 1e-300);
    cell_(idx, 2) = std::max(p10, 1e-300);
    cell_(idx, 1) = std::max(p01, 1e-300);
    cell_(idx, 0) = std::max(p00, 1e-300);
  }
}

double PairwiseEvaluator::value(const Eigen::VectorXd& x) {
  tables(x);
  return cnt_.cwiseProduct(cell_.array().log().matrix()).sum();
}

double PairwiseEvaluator::value_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  tables(x);
  const int p = pat_.p;
  grad = Eigen::VectorXd::Zero(2 * p);
  const Eigen::MatrixXd deriv = (pi_.array() * (1.0 - pi_.array())).matrix();
  const Eigen::VectorXd t0 = deriv * w_;
  const Eigen::VectorXd t1 = deriv * w_.cwiseProduct(x_nodes_);
  for (int idx = 0; idx < static_cast<int>(pairs_.size()); ++idx) {
    const auto [j, k] = pairs_[static_cast<std::size_t>(idx)];
    const Eigen::ArrayXd wdj = deriv.row(j).transpose().cwiseProduct(w_).array();
    const Eigen::ArrayXd wdk = deriv.row(k).transpose().cwiseProduct(w_).array();
    const Eigen::ArrayXd pj = pi_.row(j).transpose().array();
    const Eigen::ArrayXd pk = pi_.row(k).transpose().array();
    const double u0j = (wdj * pk).sum();
    const double u1j = (wdj * pk * x_nodes_.array()).sum();
    const double u0k = (wdk * pj).sum();
    const double u1k = (wdk * pj * x_nodes_.array()).sum();
    const double r00 = cnt_(idx, 0) / cell_(idx, 0);
    const double r01 = cnt_(idx, 1) / cell_(idx, 1);
    const double r10 = cnt_(idx, 2) / cell_(idx, 2);
    const double r11 = cnt_(idx, 3) / cell_(idx, 3);
    const double common = r11 - r10 - r01 + r00;
    grad[j] += u0j * common + t0[j] * (r10 - r00);
    grad[p + j] += u1j * common + t1[j] * (r10 - r00);
    grad[k] += u0k * common + t0[k] * (r01 - r00);
    grad[p + k] += u1k * common + t1[k] * (r01 - r00);
  }
  return cnt_.cwiseProduct(cell_.array().log().matrix()).sum();
}

void PairwiseEvaluator::per_observation(const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  tables(x);
  const Eigen::MatrixXd lncell = cell_.array().log();
  Eigen::VectorXd pat_val = Eigen::VectorXd::Zero(pat_.n_pat);
  for (int idx = 0; idx < static_cast<int>(pairs_.size()); ++idx) {
    const auto [j, k] = pairs_[static_cast<std::size_t>(idx)];
    for (int r = 0; r < pat_.n_pat; ++r) {
      const int cell = 2 * static_cast<int>(pat_.Y(r, j)) + static_cast<int>(pat_.Y(r, k));
      pat_val[r] += lncell(idx, cell);
    }
  }
  out.resize(pat_.n);
  for (int i = 0; i < pat_.n; ++i)
    out[i] = pat_val[pat_.row_pattern[static_cast<std::size_t>(i)]];
}

double RescaledEvaluator::value(const Eigen::VectorXd& x_final) {
  return inner_.value(detail::final_to_raw(x_final, inner_.items(), inner_.degree()));
}

void RescaledEvaluator::per_observation(const Eigen::VectorXd& x_final,
                                        Eigen::VectorXd& out) {
  inner_.per_observation(detail::final_to_raw(x_final, inner_.items(), inner_.degree()),
                         out);
}

} // namespace detail

LoglikValue full_loglik(const ResponseMatrix& data, const ExtendedParams& params,
                        const QuadratureRule& rule) {
  params.items.validate();
  if (params.items.item_count() != data.items())
    throw DomainError("full_loglik: params have " +
                      std::to_string(params.items.item_count()) + " items, data has " +
                      std::to_string(data.items()));
  detail::FullEvaluator ev(data, params.angles.degree(), rule);
  LoglikValue out;
  ev.per_observation(detail::pack(params), out.per_observation);
  out.total = 0.0;
  for (int i = 0; i < data.rows(); ++i) out.total += out.per_observation[i];
  return out;
}

LoglikValue pairwise_loglik(const ResponseMatrix& data, const ItemParams& params,
                            const QuadratureRule& rule) {
  params.validate();
  if (params.item_count() != data.items())
    throw DomainError("pairwise_loglik: params have " +
                      std::to_string(params.item_count()) + " items, data has " +
                      std::to_string(data.items()));
  detail::PairwiseEvaluator ev(data, rule);
  LoglikValue out;
  ev.per_observation(params.stacked(), out.per_observation);
  out.total = 0.0;
  for (int i = 0; i < data.rows(); ++i) out.total += out.per_observation[i];
  return out;
}

Eigen::MatrixXd score_contributions(Objective objective, const ResponseMatrix& data,
                                    const ExtendedParams& params,
                                    const QuadratureRule& rule) {
  params.items.validate();
  if (params.items.item_count() != data.items())
    throw DomainError("score_contributions: item count mismatch");
  if (objective == Objective::pairwise) {
    if (params.angles.degree() != 0)
      throw DomainError("score_contributions: pairwise objective has no angles");
    detail::PairwiseEvaluator ev(data, rule);
    return detail::fd_score_matrix(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& v) { ev.per_observation(x, v); },
        params.items.stacked(), data.rows());
  }
  detail::FullEvaluator ev(data, params.angles.degree(), rule);
  return detail::fd_score_matrix(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& v) { ev.per_observation(x, v); },
      detail::pack(params), data.rows());
}

} // namespace snpirt
