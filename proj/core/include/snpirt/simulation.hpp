#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "snpirt/basis.hpp"
#include "snpirt/data.hpp"
#include "snpirt/estimation.hpp"
#include "snpirt/inference.hpp"

namespace snpirt {

enum class LatentKind { standard_normal, normal_mixture, skew_normal };

struct MixtureComponent {
  double weight = 1.0;
  double location = 0.0;
  double scale = 1.0;  // sd or variance, per LatentSpec::scales_are_sd
};

struct SkewNormalParams {
  double location = 0.0;
  double scale = 1.0;  // omega
  double shape = 0.0;  // lambda
};

struct LatentSpec {
  LatentKind kind = LatentKind::standard_normal;
  std::vector<MixtureComponent> components;
  bool scales_are_sd = true;
  SkewNormalParams skew;
  std::string label = "N(0,1)";

  LatentMoments moments() const;  // exact closed forms
  void validate() const;

  static LatentSpec standard_normal();
  static LatentSpec normal_mixture(std::vector<MixtureComponent> components,
                                   bool scales_are_sd);
  static LatentSpec skew_normal(double location, double scale, double shape);
  // named scenario catalog: A standard normal, B/C two-component mixtures,
  // D/E skew normals
  static LatentSpec scenario(const std::string& name);
  static std::vector<std::pair<std::string, LatentSpec>> catalog();
};

struct ItemParamRanges {
  double intercept_lo = -0.8, intercept_hi = 1.12;
  double slope_lo = 0.5, slope_hi = 1.5;
};

Eigen::VectorXd sample_latent(const LatentSpec& spec, int n, std::mt19937_64& rng);
ItemParams draw_item_params(int p, const ItemParamRanges& ranges, std::mt19937_64& rng);
ResponseMatrix simulate_dataset(const ItemParams& truth, const LatentSpec& spec, int n,
                                std::mt19937_64& rng);

enum class TestKind { gh_t, gh_full, lr, m2 };

struct StudyConfig {
  LatentSpec latent;
  int p = 10;
  int n = 1000;
  int replications = 200;
  std::vector<int> degrees = {1};          // SNP degrees fitted per replication
  std::vector<TestKind> tests = {TestKind::gh_t};
  bool with_ics = false;
  std::vector<double> alphas = {0.05, 0.01};
  ItemParamRanges ranges;
  std::uint64_t seed = 20240915;
  FitConfig fit;                           // degree field ignored, set per fit
  // L = 2 starts item parameters at the generating truth when true
  bool init_l2_at_truth = true;
};

struct TestOutcome {
  bool valid = false;
  std::string note;                        // failure reason when invalid
  double statistic = 0.0, dof = 0.0, p_value = 1.0;
  double a_scale = 0.0, b_dof = 0.0, lambda_sum = 0.0, lambda_sumsq = 0.0;
  std::vector<std::pair<double, bool>> rejections;
};

struct RepRecord {
  int replication = 0;
  bool pl_ok = false, full_ok = false;
  std::map<int, bool> snp_ok;              // degree -> converged
  std::map<int, TestOutcome> gh_t, gh_full, lr;
  std::optional<TestOutcome> m2;
  std::map<int, IcValues> ics;             // 0 = normal-latent model
  // estimator label -> stacked final-scale item estimates
  std::map<std::string, Eigen::VectorXd> estimates;
  std::string note;
};

struct RateSummary {
  double alpha = 0.0;
  int n_valid = 0, n_reject = 0;
  double rate = 0.0;
  // nominal-level binomial band, plus the observed-rate band as an extra
  double ci_lo = 0.0, ci_hi = 0.0;
  double wald_lo = 0.0, wald_hi = 0.0;
};

struct TestSummary {
  std::string test;
  int degree = 0;  // 0 for m2
  int n_invalid = 0;
  std::vector<RateSummary> by_alpha;
};

struct IcSummary {
  int degree = 0;              // model compared against the normal-latent fit
  int n_valid = 0;
  double pct_aic = 0.0, pct_bic = 0.0, pct_hq = 0.0;  // % preferring degree L
};

struct BiasRow {
  std::string param;
  double truth = 0.0;  // standardized latent scale
  std::map<std::string, double> mean_abs_dev;  // estimator label -> mean |dev|
  std::map<std::string, int> n_used;
};

struct StudyResult {
  StudyConfig config;
  ItemParams truth;
  LatentMoments true_moments;
  ItemParams truth_rescaled;
  std::vector<RepRecord> replications;
  std::vector<TestSummary> tests;
  std::vector<IcSummary> ics;
  std::vector<BiasRow> bias;
  int threads_used = 1;
};

// fixed item truth, per-replication generator streams seeded seed xor index,
// replications farmed to a thread pool, aggregation in replication order
StudyResult run_study(const StudyConfig& config, int threads = 0);

std::vector<BiasRow> bias_report(const StudyConfig& config, const ItemParams& truth_rescaled,
                                 const std::vector<RepRecord>& replications);

} // namespace snpirt
