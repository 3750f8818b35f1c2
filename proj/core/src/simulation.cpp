#include "snpirt/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <thread>

#include "snpirt/errors.hpp"
#include "snpirt/quadrature.hpp"

namespace snpirt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double normal_quantile(double prob) {
  boost::math::normal_distribution<double> dist;
  return boost::math::quantile(dist, prob);
}

} // namespace

void LatentSpec::validate() const {
  switch (kind) {
    case LatentKind::standard_normal:
      break;
    case LatentKind::normal_mixture: {
      if (components.empty())
        throw DomainError("LatentSpec: mixture needs at least one component");
      double total = 0.0;
      for (const auto& c : components) {
        if (!(c.weight > 0.0)) throw DomainError("LatentSpec: nonpositive mixture weight");
        if (!(c.scale > 0.0)) throw DomainError("LatentSpec: nonpositive component scale");
        total += c.weight;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw DomainError("LatentSpec: mixture weights sum to " + std::to_string(total));
      break;
    }
    case LatentKind::skew_normal:
      if (!(skew.scale > 0.0)) throw DomainError("LatentSpec: nonpositive skew scale");
      break;
  }
}

LatentMoments LatentSpec::moments() const {
  validate();
  LatentMoments out;
  switch (kind) {
    case LatentKind::standard_normal:
      out.mean = 0.0;
      out.variance = 1.0;
      break;
    case LatentKind::normal_mixture: {
      double mean = 0.0, second = 0.0;
      for (const auto& c : components) {
        const double var = scales_are_sd ? c.scale * c.scale : c.scale;
        mean += c.weight * c.location;
        second += c.weight * (var + c.location * c.location);
      }
      out.mean = mean;
      out.variance = second - mean * mean;
      break;
    }
    case LatentKind::skew_normal: {
      const double delta = skew.shape / std::sqrt(1.0 + skew.shape * skew.shape);
      out.mean = skew.location + skew.scale * delta * std::sqrt(2.0 / std::numbers::pi);
      out.variance =
          skew.scale * skew.scale * (1.0 - 2.0 * delta * delta / std::numbers::pi);
      break;
    }
  }
  return out;
}

LatentSpec LatentSpec::standard_normal() {
  LatentSpec spec;
  spec.kind = LatentKind::standard_normal;
  spec.label = "N(0,1)";
  return spec;
}

LatentSpec LatentSpec::normal_mixture(std::vector<MixtureComponent> components,
                                      bool scales_are_sd) {
  LatentSpec spec;
  spec.kind = LatentKind::normal_mixture;
  spec.components = std::move(components);
  spec.scales_are_sd = scales_are_sd;
  spec.label = "normal mixture";
  spec.validate();
  return spec;
}

LatentSpec LatentSpec::skew_normal(double location, double scale, double shape) {
  LatentSpec spec;
  spec.kind = LatentKind::skew_normal;
  spec.skew = SkewNormalParams{location, scale, shape};
  spec.label = "skew normal";
  spec.validate();
  return spec;
}

LatentSpec LatentSpec::scenario(const std::string& name) {
  for (auto& [key, spec] : catalog())
    if (key == name) return spec;
  std::string msg = "unknown scenario '" + name + "'; available:";
  for (auto& [key, spec] : catalog()) msg += " " + key + " (" + spec.label + ")";
  throw DomainError(msg);
}

std::vector<std::pair<std::string, LatentSpec>> LatentSpec::catalog() {
  std::vector<std::pair<std::string, LatentSpec>> out;
  {
    LatentSpec a = standard_normal();
    a.label = "standard normal";
    out.emplace_back("A", a);
  }
  {
    // component scales are standard deviations
    LatentSpec b = normal_mixture({{0.7, -1.0, 0.7}, {0.3, 1.0, 0.8}}, true);
    b.label = "bimodal normal mixture";
    out.emplace_back("B", b);
  }
  {
    // component scales are variances
    LatentSpec c = normal_mixture({{0.1, -2.0, 0.25}, {0.9, 2.0, 1.0}}, false);
    c.label = "separated normal mixture";
    out.emplace_back("C", c);
  }
  {
    LatentSpec d = skew_normal(-2.5, 2.0, 5.0);
    d.label = "skew normal, shape 5";
    out.emplace_back("D", d);
  }
  {
    LatentSpec e = skew_normal(-2.5, 2.0, 10.0);
    e.label = "skew normal, shape 10";
    out.emplace_back("E", e);
  }
  return out;
}

Eigen::VectorXd sample_latent(const LatentSpec& spec, int n, std::mt19937_64& rng) {
  spec.validate();
  if (n < 0) throw DomainError("sample_latent: negative draw count");
  Eigen::VectorXd z(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  switch (spec.kind) {
    case LatentKind::standard_normal:
      for (int i = 0; i < n; ++i) z[i] = normal(rng);
      break;
    case LatentKind::normal_mixture:
      for (int i = 0; i < n; ++i) {
        const double u = uniform(rng);
        double cum = 0.0;
        const MixtureComponent* chosen = &spec.components.back();
        for (const auto& c : spec.components) {
          cum += c.weight;
          if (u < cum) {
            chosen = &c;
            break;
          }
        }
        const double sd =
            spec.scales_are_sd ? chosen->scale : std::sqrt(chosen->scale);
        z[i] = chosen->location + sd * normal(rng);
      }
      break;
    case LatentKind::skew_normal: {
      const double delta =
          spec.skew.shape / std::sqrt(1.0 + spec.skew.shape * spec.skew.shape);
      const double rest = std::sqrt(1.0 - delta * delta);
      for (int i = 0; i < n; ++i) {
        const double u0 = normal(rng);
        const double u1 = normal(rng);
        z[i] = spec.skew.location +
               spec.skew.scale * (delta * std::abs(u0) + rest * u1);
      }
      break;
    }
  }
  return z;
}

ItemParams draw_item_params(int p, const ItemParamRanges& ranges, std::mt19937_64& rng) {
  if (p < 1) throw DomainError("draw_item_params: need at least one item");
  if (ranges.intercept_lo > ranges.intercept_hi || ranges.slope_lo > ranges.slope_hi)
    throw DomainError("draw_item_params: empty parameter range");
  std::uniform_real_distribution<double> u_int(ranges.intercept_lo, ranges.intercept_hi);
  std::uniform_real_distribution<double> u_slope(ranges.slope_lo, ranges.slope_hi);
  ItemParams out;
  out.intercepts.resize(p);
  out.slopes.resize(p);
  for (int j = 0; j < p; ++j) out.intercepts[j] = u_int(rng);
  for (int j = 0; j < p; ++j) out.slopes[j] = u_slope(rng);
  return out;
}

ResponseMatrix simulate_dataset(const ItemParams& truth, const LatentSpec& spec, int n,
                                std::mt19937_64& rng) {
  truth.validate();
  if (n < 1) throw DomainError("simulate_dataset: need at least one observation");
  const Eigen::VectorXd z = sample_latent(spec, n, rng);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ResponseMatrix data(n, truth.item_count());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < truth.item_count(); ++j) {
      const double prob = response_prob(truth.intercepts[j], truth.slopes[j], z[i]);
      data.set(i, j, uniform(rng) < prob ? 1 : 0);
    }
  return data;
}

namespace {

TestOutcome outcome_from_report(const TestReport& report) {
  TestOutcome out;
  out.valid = true;
  out.statistic = report.statistic;
  out.dof = report.dof;
  out.p_value = report.p_value;
  out.rejections = report.rejections;
  auto get = [&report](const char* key) {
    const auto it = report.details.find(key);
    return it == report.details.end() ? 0.0 : it->second;
  };
  out.a_scale = get("a_scale");
  out.b_dof = get("b_dof");
  out.lambda_sum = get("lambda_sum");
  out.lambda_sumsq = get("lambda_sumsq");
  return out;
}

TestOutcome invalid_outcome(const std::string& note) {
  TestOutcome out;
  out.valid = false;
  out.note = note;
  return out;
}

bool wants(const StudyConfig& config, TestKind kind) {
  return std::find(config.tests.begin(), config.tests.end(), kind) !=
         config.tests.end();
}

void validate_study(const StudyConfig& config) {
  config.latent.validate();
  if (config.p < 1) throw StudyError("study: p must be positive");
  if (config.n < 2) throw StudyError("study: n must be at least 2");
  if (config.replications < 1) throw StudyError("study: need at least one replication");
  for (double a : config.alphas)
    if (!(a > 0.0 && a < 1.0)) throw StudyError("study: level outside (0, 1)");
  for (int L : config.degrees)
    if (L < 1 || L > kMaxDegree)
      throw StudyError("study: degree " + std::to_string(L) + " outside {1, 2}");
  const bool needs_gh = wants(config, TestKind::gh_t) || wants(config, TestKind::gh_full);
  const bool needs_snp = needs_gh || wants(config, TestKind::lr) || config.with_ics;
  if (needs_snp && config.degrees.empty())
    throw StudyError("study: requested tests need at least one SNP degree");
  if (needs_gh && config.p < 2)
    throw StudyError("study: difference tests need at least 2 items");
  if (wants(config, TestKind::m2) && config.p < 5)
    throw StudyError("study: M2 undefined for p = " + std::to_string(config.p) +
                     "; at least 5 items are required");
}

struct RepPlan {
  bool need_pl = false;
  bool need_m2 = false;
  bool need_lr = false;
  bool need_gh_t = false;
  bool need_gh_full = false;
};

RepRecord run_replication(const StudyConfig& config, const ItemParams& truth,
                          const RepPlan& plan, const QuadratureRule& rule, int rep) {
  RepRecord rec;
  rec.replication = rep;
  std::mt19937_64 rng(config.seed ^ static_cast<std::uint64_t>(rep));
  const ResponseMatrix data =
      simulate_dataset(truth, config.latent, config.n, rng);

  FitConfig base = config.fit;
  base.seed = config.seed ^ static_cast<std::uint64_t>(rep);

  std::optional<FitResult> pl_fit, full_fit;
  std::map<int, FitResult> snp_fits;
  if (plan.need_pl) {
    try {
      FitConfig c = base;
      c.degree = 0;
      pl_fit = fit_snp0_pairwise(data, c);
      rec.pl_ok = pl_fit->converged;
    } catch (const Error& e) {
      rec.pl_ok = false;
      rec.note += std::string("pairwise fit: ") + e.what() + "; ";
    }
  }
  try {
    FitConfig c = base;
    c.degree = 0;
    full_fit = fit_snp0_full(data, c);
    rec.full_ok = full_fit->converged;
  } catch (const Error& e) {
    rec.full_ok = false;
    rec.note += std::string("normal-latent fit: ") + e.what() + "; ";
  }
  for (int L : config.degrees) {
    try {
      FitConfig c = base;
      c.degree = L;
      std::optional<ItemParams> init;
      if (L == 2 && config.init_l2_at_truth)
        init = truth;
      else if (full_fit)
        init = full_fit->raw_params.items;
      // chain the previous degree's winner as an extra start at phi_L = pi/2,
      // where the top polynomial coefficient vanishes and the objective equals
      // the degree-(L-1) optimum; keeps the nested likelihood ordering when
      // the fixed start lands in a poor basin
      const auto prev = snp_fits.find(L - 1);
      if (prev != snp_fits.end() && prev->second.converged) {
        AngleStart chained;
        chained.phi = prev->second.raw_params.angles.phi();
        chained.phi.push_back(std::numbers::pi / 2.0);
        chained.items = prev->second.raw_params.items;
        c.extra_starts.push_back(std::move(chained));
      }
      // sign companions of the fixed L = 2 start: the leading coefficient is
      // nonnegative by construction, so the four (phi_1, phi_2) sign quadrants
      // parametrize four distinct density families and each needs its own start
      if (L == 2)
        for (auto phi : {std::pair{0.7, -1.0}, {-0.7, 1.0}, {-0.7, -1.0}})
          c.extra_starts.push_back({{phi.first, phi.second}, std::nullopt});
      FitResult fit = fit_snpl(data, c, init);
      rec.snp_ok[L] = fit.converged;
      snp_fits.emplace(L, std::move(fit));
    } catch (const Error& e) {
      rec.snp_ok[L] = false;
      rec.note += "degree " + std::to_string(L) + " fit: " + e.what() + "; ";
    }
  }

  // difference tests per degree, sharing one covariance assembly
  for (int L : config.degrees) {
    if (!plan.need_gh_t && !plan.need_gh_full) break;
    const auto it = snp_fits.find(L);
    if (!rec.pl_ok || it == snp_fits.end() || !rec.snp_ok[L]) {
      const auto note = invalid_outcome("required fit unavailable");
      if (plan.need_gh_t) rec.gh_t[L] = note;
      if (plan.need_gh_full) rec.gh_full[L] = note;
      continue;
    }
    try {
      const GhPipelineResult pipe =
          gh_t_from_fits(data, *pl_fit, it->second, rule, config.alphas);
      if (plan.need_gh_t) rec.gh_t[L] = outcome_from_report(pipe.report);
      if (plan.need_gh_full) {
        try {
          rec.gh_full[L] =
              outcome_from_report(gh_full_test(pipe.diff, pipe.cov, config.alphas));
        } catch (const Error& e) {
          rec.gh_full[L] = invalid_outcome(e.what());
        }
      }
    } catch (const Error& e) {
      if (plan.need_gh_t) rec.gh_t[L] = invalid_outcome(e.what());
      if (plan.need_gh_full) rec.gh_full[L] = invalid_outcome(e.what());
    }
  }

  if (plan.need_lr) {
    for (int L : config.degrees) {
      const auto it = snp_fits.find(L);
      if (!rec.full_ok || it == snp_fits.end() || !rec.snp_ok[L]) {
        rec.lr[L] = invalid_outcome("required fit unavailable");
        continue;
      }
      try {
        rec.lr[L] = outcome_from_report(lr_test(
            it->second.objective_value, full_fit->objective_value, L, config.alphas));
      } catch (const Error& e) {
        rec.lr[L] = invalid_outcome(e.what());
      }
    }
  }

  if (plan.need_m2) {
    if (!rec.full_ok) {
      rec.m2 = invalid_outcome("normal-latent fit unavailable");
    } else {
      try {
        rec.m2 = outcome_from_report(
            m2_test(data, full_fit->raw_params.items, rule, config.alphas));
      } catch (const Error& e) {
        rec.m2 = invalid_outcome(e.what());
      }
    }
  }

  if (config.with_ics && rec.full_ok) {
    rec.ics[0] =
        information_criteria(full_fit->objective_value, 2 * config.p, config.n);
    for (int L : config.degrees) {
      const auto it = snp_fits.find(L);
      if (it != snp_fits.end() && rec.snp_ok[L])
        rec.ics[L] = information_criteria(it->second.objective_value,
                                          2 * config.p + L, config.n);
    }
  }

  if (pl_fit && rec.pl_ok)
    rec.estimates["snp0_pl"] = pl_fit->final_params.items.stacked();
  if (full_fit && rec.full_ok)
    rec.estimates["snp0_ml"] = full_fit->final_params.items.stacked();
  for (const auto& [L, fit] : snp_fits)
    if (rec.snp_ok[L])
      rec.estimates["snp" + std::to_string(L)] = fit.final_params.items.stacked();
  return rec;
}

std::vector<RateSummary> summarize_rates(
    const StudyConfig& config,
    const std::vector<const TestOutcome*>& outcomes) {
  std::vector<RateSummary> out;
  for (double alpha : config.alphas) {
    RateSummary row;
    row.alpha = alpha;
    for (const TestOutcome* oc : outcomes) {
      if (!oc || !oc->valid) continue;
      ++row.n_valid;
      for (const auto& [a, rejected] : oc->rejections)
        if (a == alpha && rejected) ++row.n_reject;
    }
    if (row.n_valid > 0) {
      row.rate = static_cast<double>(row.n_reject) / row.n_valid;
      const double z = normal_quantile(1.0 - alpha / 2.0);
      const double nominal_half = z * std::sqrt(alpha * (1.0 - alpha) / row.n_valid);
      row.ci_lo = row.rate - nominal_half;
      row.ci_hi = row.rate + nominal_half;
      const double wald_half = z * std::sqrt(row.rate * (1.0 - row.rate) / row.n_valid);
      row.wald_lo = row.rate - wald_half;
      row.wald_hi = row.rate + wald_half;
    }
    out.push_back(row);
  }
  return out;
}

} // namespace

std::vector<BiasRow> bias_report(const StudyConfig& config,
                                 const ItemParams& truth_rescaled,
                                 const std::vector<RepRecord>& replications) {
  const int p = config.p;
  const Eigen::VectorXd truth = truth_rescaled.stacked();
  std::vector<std::string> labels;
  for (int j = 0; j < p; ++j) labels.push_back("intercept_" + std::to_string(j + 1));
  for (int j = 0; j < p; ++j) labels.push_back("slope_" + std::to_string(j + 1));

  std::vector<std::string> estimators;
  for (const auto& rec : replications)
    for (const auto& [key, est] : rec.estimates)
      if (std::find(estimators.begin(), estimators.end(), key) == estimators.end())
        estimators.push_back(key);
  std::sort(estimators.begin(), estimators.end());

  std::vector<BiasRow> rows(static_cast<std::size_t>(2 * p));
  for (int i = 0; i < 2 * p; ++i) {
    rows[static_cast<std::size_t>(i)].param = labels[static_cast<std::size_t>(i)];
    rows[static_cast<std::size_t>(i)].truth = truth[i];
  }
  for (const std::string& est : estimators) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2 * p);
    int used = 0;
    for (const auto& rec : replications) {
      const auto it = rec.estimates.find(est);
      if (it == rec.estimates.end()) continue;
      acc += (it->second - truth).cwiseAbs();
      ++used;
    }
    for (int i = 0; i < 2 * p; ++i) {
      rows[static_cast<std::size_t>(i)].mean_abs_dev[est] =
          used > 0 ? acc[i] / used : 0.0;
      rows[static_cast<std::size_t>(i)].n_used[est] = used;
    }
  }
  return rows;
}

StudyResult run_study(const StudyConfig& config, int threads) {
  validate_study(config);
  StudyResult result;
  result.config = config;

  // the item truth is drawn once per study from its own scrambled stream so
  // it cannot collide with replication 0's stream (seed xor 0 == seed)
  std::mt19937_64 truth_rng(splitmix64(config.seed));
  result.truth = draw_item_params(config.p, config.ranges, truth_rng);
  result.true_moments = config.latent.moments();
  result.truth_rescaled = rescale_item_params(result.truth, result.true_moments);

  RepPlan plan;
  plan.need_gh_t = wants(config, TestKind::gh_t);
  plan.need_gh_full = wants(config, TestKind::gh_full);
  plan.need_pl = plan.need_gh_t || plan.need_gh_full;
  plan.need_lr = wants(config, TestKind::lr);
  plan.need_m2 = wants(config, TestKind::m2);

  const QuadratureRule rule = gauss_hermite_rule(config.fit.quadrature_points);
  const int R = config.replications;
  int n_threads = threads > 0 ? threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min(n_threads, R);
  result.threads_used = n_threads;

  std::vector<RepRecord> records(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int rep = next.fetch_add(1);
      if (rep >= R) break;
      try {
        records[static_cast<std::size_t>(rep)] =
            run_replication(config, result.truth, plan, rule, rep);
      } catch (const std::exception& e) {
        RepRecord rec;
        rec.replication = rep;
        rec.note = std::string("replication failed: ") + e.what();
        records[static_cast<std::size_t>(rep)] = std::move(rec);
      }
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  result.replications = std::move(records);

  // per-test aggregation over valid replications
  auto collect = [&](auto accessor) {
    std::vector<const TestOutcome*> out;
    for (const auto& rec : result.replications) out.push_back(accessor(rec));
    return out;
  };
  if (plan.need_gh_t)
    for (int L : config.degrees) {
      TestSummary s;
      s.test = "gh_t";
      s.degree = L;
      s.by_alpha = summarize_rates(config, collect([L](const RepRecord& r) {
        const auto it = r.gh_t.find(L);
        return it == r.gh_t.end() ? nullptr : &it->second;
      }));
      s.n_invalid = R - (s.by_alpha.empty() ? 0 : s.by_alpha.front().n_valid);
      result.tests.push_back(std::move(s));
    }
  if (plan.need_gh_full)
    for (int L : config.degrees) {
      TestSummary s;
      s.test = "gh";
      s.degree = L;
      s.by_alpha = summarize_rates(config, collect([L](const RepRecord& r) {
        const auto it = r.gh_full.find(L);
        return it == r.gh_full.end() ? nullptr : &it->second;
      }));
      s.n_invalid = R - (s.by_alpha.empty() ? 0 : s.by_alpha.front().n_valid);
      result.tests.push_back(std::move(s));
    }
  if (plan.need_lr)
    for (int L : config.degrees) {
      TestSummary s;
      s.test = "lr";
      s.degree = L;
      s.by_alpha = summarize_rates(config, collect([L](const RepRecord& r) {
        const auto it = r.lr.find(L);
        return it == r.lr.end() ? nullptr : &it->second;
      }));
      s.n_invalid = R - (s.by_alpha.empty() ? 0 : s.by_alpha.front().n_valid);
      result.tests.push_back(std::move(s));
    }
  if (plan.need_m2) {
    TestSummary s;
    s.test = "m2";
    s.degree = 0;
    s.by_alpha = summarize_rates(config, collect([](const RepRecord& r) {
      return r.m2 ? &*r.m2 : nullptr;
    }));
    s.n_invalid = R - (s.by_alpha.empty() ? 0 : s.by_alpha.front().n_valid);
    result.tests.push_back(std::move(s));
  }

  if (config.with_ics) {
    for (int L : config.degrees) {
      IcSummary s;
      s.degree = L;
      int aic = 0, bic = 0, hq = 0;
      for (const auto& rec : result.replications) {
        const auto it0 = rec.ics.find(0);
        const auto itl = rec.ics.find(L);
        if (it0 == rec.ics.end() || itl == rec.ics.end()) continue;
        ++s.n_valid;
        if (itl->second.aic < it0->second.aic) ++aic;
        if (itl->second.bic < it0->second.bic) ++bic;
        if (itl->second.hq < it0->second.hq) ++hq;
      }
      if (s.n_valid > 0) {
        s.pct_aic = 100.0 * aic / s.n_valid;
        s.pct_bic = 100.0 * bic / s.n_valid;
        s.pct_hq = 100.0 * hq / s.n_valid;
      }
      result.ics.push_back(s);
    }
  }

  result.bias = bias_report(config, result.truth_rescaled, result.replications);
  return result;
}

} // namespace snpirt
