#include "snpirt/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bfgs.hpp"
#include "detail.hpp"
#include "eval.hpp"
#include "snpirt/errors.hpp"
#include "snpirt/quadrature.hpp"

namespace snpirt {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void validate_config(const FitConfig& config) {
  if (config.quadrature_points < 1)
    throw DomainError("FitConfig: quadrature_points must be positive");
  if (config.max_iterations < 1)
    throw DomainError("FitConfig: max_iterations must be positive");
  if (!(config.gradient_tolerance > 0.0) || !(config.objective_rel_tolerance > 0.0))
    throw DomainError("FitConfig: tolerances must be positive");
  if (config.n_starts < 1) throw DomainError("FitConfig: n_starts must be positive");
}

void check_separation(const ResponseMatrix& data) {
  const Eigen::VectorXd means = data.item_means();
  for (int j = 0; j < data.items(); ++j) {
    if (means[j] <= 0.0 || means[j] >= 1.0)
      throw EstimationError("item " + std::to_string(j + 1) +
                            " is constant (all responses " +
                            std::to_string(means[j] <= 0.0 ? 0 : 1) +
                            "); its parameters are not identified");
  }
}

ItemParams default_init(const ResponseMatrix& data) {
  const Eigen::VectorXd means = data.item_means();
  ItemParams init;
  init.intercepts.resize(data.items());
  init.slopes = Eigen::VectorXd::Ones(data.items());
  for (int j = 0; j < data.items(); ++j) {
    const double logit = std::log(means[j] / (1.0 - means[j]));
    init.intercepts[j] = std::clamp(logit, -3.0, 3.0);
  }
  return init;
}

detail::BoxBounds make_box(int p, int degree, const std::optional<std::vector<double>>& pin) {
  const double inf = std::numeric_limits<double>::infinity();
  detail::BoxBounds box;
  box.lower = Eigen::VectorXd::Constant(2 * p + degree, -inf);
  box.upper = Eigen::VectorXd::Constant(2 * p + degree, inf);
  for (int l = 0; l < degree; ++l) {
    box.lower[2 * p + l] = -kHalfPi;
    box.upper[2 * p + l] = kHalfPi;
  }
  if (pin) {
    for (int l = 0; l < degree; ++l) {
      box.lower[2 * p + l] = (*pin)[static_cast<std::size_t>(l)];
      box.upper[2 * p + l] = (*pin)[static_cast<std::size_t>(l)];
    }
  }
  return box;
}

// maximize by minimizing the negated objective; non-finite values are pushed
// back as +inf so the line search retreats
template <typename Eval>
detail::OptimResult run_optimizer(Eval& ev, const Eigen::VectorXd& x0,
                                  const detail::BoxBounds& box, const FitConfig& config) {
  auto fg = [&ev](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double v = ev.value_and_grad(x, g);
    g = -g;
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    return -v;
  };
  return detail::minimize_box_bfgs(fg, x0, box, config.max_iterations,
                                   config.gradient_tolerance,
                                   config.objective_rel_tolerance);
}

StartDiagnostic diagnostic_from(const detail::OptimResult& opt, int index,
                                std::vector<double> phi_init) {
  StartDiagnostic d;
  d.start_index = index;
  d.phi_init = std::move(phi_init);
  d.completed = opt.completed;
  d.converged = opt.converged;
  d.objective = -opt.f;
  d.iterations = opt.iterations;
  d.note = opt.note;
  return d;
}

// mirror-image solutions (all slopes negated, latent density reflected) have
// identical likelihood; report the representative with a positive slope sum
void canonicalize(ExtendedParams& raw) {
  if (raw.items.slopes.sum() >= 0.0) return;
  raw.items.slopes = -raw.items.slopes;
  std::vector<double> phi = raw.angles.phi();
  const int L = raw.angles.degree();
  if (L == 1) phi[0] = -phi[0];
  if (L == 2) phi[1] = -phi[1];
  raw.angles = SnpAngles(L, std::move(phi));
}

FitResult build_result(Objective objective, const detail::OptimResult& opt, int p,
                       int degree, bool allow_canonicalize) {
  FitResult fit;
  fit.objective = objective;
  fit.raw_params = detail::unpack(opt.x, p, degree);
  if (allow_canonicalize) canonicalize(fit.raw_params);
  if (degree > 0) {
    fit.latent = latent_moments(fit.raw_params.angles);
    fit.final_params.items = rescale_item_params(fit.raw_params.items, fit.latent);
    fit.final_params.angles = fit.raw_params.angles;
  } else {
    fit.latent = LatentMoments{0.0, 1.0};
    fit.final_params = fit.raw_params;
  }
  fit.objective_value = -opt.f;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.gradient_norm = opt.projected_grad_norm;
  for (double v : fit.raw_params.angles.phi())
    if (std::abs(v) >= kHalfPi - 1e-8) fit.boundary = true;
  return fit;
}

} // namespace

FitResult fit_snp0_full(const ResponseMatrix& data, const FitConfig& config) {
  validate_config(config);
  check_separation(data);
  const QuadratureRule rule = gauss_hermite_rule(config.quadrature_points);
  detail::FullEvaluator ev(data, 0, rule);
  const detail::BoxBounds box = make_box(data.items(), 0, std::nullopt);
  const detail::OptimResult opt =
      run_optimizer(ev, default_init(data).stacked(), box, config);
  if (!opt.completed)
    throw EstimationError("normal-latent ML fit failed: " + opt.note);
  FitResult fit = build_result(Objective::full_ml, opt, data.items(), 0, true);
  fit.starts.push_back(diagnostic_from(opt, 0, {}));
  return fit;
}

FitResult fit_snp0_pairwise(const ResponseMatrix& data, const FitConfig& config) {
  validate_config(config);
  check_separation(data);
  const QuadratureRule rule = gauss_hermite_rule(config.quadrature_points);
  detail::PairwiseEvaluator ev(data, rule);
  const detail::BoxBounds box = make_box(data.items(), 0, std::nullopt);
  const detail::OptimResult opt =
      run_optimizer(ev, default_init(data).stacked(), box, config);
  if (!opt.completed)
    throw EstimationError("pairwise fit failed: " + opt.note);
  FitResult fit = build_result(Objective::pairwise, opt, data.items(), 0, true);
  fit.starts.push_back(diagnostic_from(opt, 0, {}));
  return fit;
}

FitResult fit_snpl(const ResponseMatrix& data, const FitConfig& config,
                   const std::optional<ItemParams>& init_items) {
  validate_config(config);
  const int L = config.degree;
  if (L < 1 || L > kMaxDegree)
    throw DomainError("fit_snpl: degree must be 1 or 2, got " + std::to_string(L));
  check_separation(data);
  if (config.pin_phi && static_cast<int>(config.pin_phi->size()) != L)
    throw DomainError("fit_snpl: pin_phi must supply one value per angle");
  if (config.pin_phi)
    for (double v : *config.pin_phi)
      if (!(std::abs(v) <= kHalfPi + 1e-9))
        throw DomainError("fit_snpl: pinned angle outside [-pi/2, pi/2]");
  if (config.pin_phi && !config.extra_starts.empty())
    throw DomainError("fit_snpl: extra_starts cannot be combined with pin_phi");
  for (const auto& es : config.extra_starts) {
    if (static_cast<int>(es.phi.size()) != L)
      throw DomainError("fit_snpl: extra start must supply one value per angle");
    for (double v : es.phi)
      if (!(std::abs(v) <= kHalfPi + 1e-9))
        throw DomainError("fit_snpl: extra start angle outside [-pi/2, pi/2]");
    if (es.items) {
      es.items->validate();
      if (es.items->item_count() != data.items())
        throw DomainError("fit_snpl: extra start item count mismatch");
    }
  }

  ItemParams items0;
  if (init_items) {
    items0 = *init_items;
    items0.validate();
    if (items0.item_count() != data.items())
      throw DomainError("fit_snpl: init_items item count mismatch");
  } else {
    FitConfig base = config;
    base.degree = 0;
    items0 = fit_snp0_full(data, base).raw_params.items;
  }

  // start list: pinned value, the angle grid sample for L = 1, or the single
  // documented start for L = 2; the user grid is appended afterwards
  std::vector<std::vector<double>> starts;
  if (config.pin_phi) {
    starts.push_back(*config.pin_phi);
  } else if (L == 1) {
    std::vector<double> grid;
    for (int k = 0;; ++k) {
      const double v = -kHalfPi + 0.1 * k;
      if (v > kHalfPi) break;
      grid.push_back(v);
    }
    std::vector<double> chosen;
    const int m = std::min<int>(config.n_starts, static_cast<int>(grid.size()));
    std::mt19937_64 rng(config.seed);
    std::sample(grid.begin(), grid.end(), std::back_inserter(chosen), m, rng);
    for (double v : chosen) starts.push_back({v});
  } else {
    starts.push_back({0.7, 1.0});
  }
  std::vector<const ItemParams*> start_items(starts.size(), &items0);
  for (const auto& es : config.extra_starts) {
    starts.push_back(es.phi);
    start_items.push_back(es.items ? &*es.items : &items0);
  }

  const QuadratureRule rule = gauss_hermite_rule(config.quadrature_points);
  detail::FullEvaluator ev(data, L, rule);
  const detail::BoxBounds box = make_box(data.items(), L, config.pin_phi);

  std::vector<StartDiagnostic> diags;
  std::optional<detail::OptimResult> best;
  int best_index = 0;
  for (int s = 0; s < static_cast<int>(starts.size()); ++s) {
    const ItemParams& si = *start_items[static_cast<std::size_t>(s)];
    Eigen::VectorXd x0(2 * data.items() + L);
    x0 << si.intercepts, si.slopes,
        Eigen::Map<const Eigen::VectorXd>(starts[static_cast<std::size_t>(s)].data(), L);
    const detail::OptimResult opt = run_optimizer(ev, x0, box, config);
    diags.push_back(diagnostic_from(opt, s, starts[static_cast<std::size_t>(s)]));
    if (!opt.completed) continue;
    if (!best || -opt.f > -best->f + 1e-12) {
      best = opt;
      best_index = s;
    }
  }
  if (!best) {
    std::string msg = "all starts failed:";
    for (const auto& d : diags)
      msg += " [start " + std::to_string(d.start_index) + ": " + d.note + "]";
    throw EstimationError(msg);
  }

  FitResult fit = build_result(Objective::full_ml, *best, data.items(), L,
                               !config.pin_phi.has_value());
  fit.start_index = best_index;
  fit.starts = std::move(diags);
  return fit;
}

} // namespace snpirt
