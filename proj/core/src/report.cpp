#include "snpirt/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace snpirt {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* kind_name(LatentKind kind) {
  switch (kind) {
    case LatentKind::standard_normal: return "standard_normal";
    case LatentKind::normal_mixture: return "normal_mixture";
    case LatentKind::skew_normal: return "skew_normal";
  }
  return "unknown";
}

std::string test_display(const std::string& key) {
  if (key == "gh_t") return "GH_T";
  if (key == "gh") return "GH";
  if (key == "lr") return "LR";
  if (key == "m2") return "M2";
  return key;
}

ordered_json latent_to_json(const LatentSpec& spec) {
  ordered_json j;
  j["kind"] = kind_name(spec.kind);
  j["label"] = spec.label;
  if (spec.kind == LatentKind::normal_mixture) {
    j["scales_are_sd"] = spec.scales_are_sd;
    ordered_json comps = ordered_json::array();
    for (const auto& c : spec.components) {
      ordered_json cj;
      cj["weight"] = c.weight;
      cj["location"] = c.location;
      cj["scale"] = c.scale;
      comps.push_back(std::move(cj));
    }
    j["components"] = std::move(comps);
  }
  if (spec.kind == LatentKind::skew_normal) {
    j["location"] = spec.skew.location;
    j["scale"] = spec.skew.scale;
    j["shape"] = spec.skew.shape;
  }
  return j;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

ordered_json items_to_json(const ItemParams& items) {
  ordered_json j;
  j["intercepts"] = vector_to_json(items.intercepts);
  j["slopes"] = vector_to_json(items.slopes);
  return j;
}

ordered_json rejections_to_json(const std::vector<std::pair<double, bool>>& r) {
  ordered_json arr = ordered_json::array();
  for (const auto& [alpha, reject] : r) {
    ordered_json e;
    e["alpha"] = alpha;
    e["reject"] = reject;
    arr.push_back(std::move(e));
  }
  return arr;
}

ordered_json outcome_to_json(const TestOutcome& oc) {
  ordered_json j;
  j["valid"] = oc.valid;
  if (!oc.valid) {
    j["note"] = oc.note;
    return j;
  }
  j["statistic"] = oc.statistic;
  j["dof"] = oc.dof;
  j["p_value"] = oc.p_value;
  if (oc.b_dof > 0.0) {
    j["a_scale"] = oc.a_scale;
    j["b_dof"] = oc.b_dof;
    j["lambda_sum"] = oc.lambda_sum;
    j["lambda_sumsq"] = oc.lambda_sumsq;
  }
  j["rejections"] = rejections_to_json(oc.rejections);
  return j;
}

ordered_json ic_to_json(const IcValues& ic) {
  ordered_json j;
  j["loglik"] = ic.loglik;
  j["k"] = ic.k;
  j["n"] = ic.n;
  j["aic"] = ic.aic;
  j["bic"] = ic.bic;
  j["hq"] = ic.hq;
  return j;
}

ordered_json config_to_json(const StudyConfig& c) {
  ordered_json j;
  j["latent"] = latent_to_json(c.latent);
  j["p"] = c.p;
  j["n"] = c.n;
  j["replications"] = c.replications;
  j["degrees"] = c.degrees;
  ordered_json tests = ordered_json::array();
  for (TestKind t : c.tests) {
    switch (t) {
      case TestKind::gh_t: tests.push_back("gh_t"); break;
      case TestKind::gh_full: tests.push_back("gh"); break;
      case TestKind::lr: tests.push_back("lr"); break;
      case TestKind::m2: tests.push_back("m2"); break;
    }
  }
  j["tests"] = std::move(tests);
  j["with_ics"] = c.with_ics;
  j["alphas"] = c.alphas;
  ordered_json ranges;
  ranges["intercept_lo"] = c.ranges.intercept_lo;
  ranges["intercept_hi"] = c.ranges.intercept_hi;
  ranges["slope_lo"] = c.ranges.slope_lo;
  ranges["slope_hi"] = c.ranges.slope_hi;
  j["item_ranges"] = std::move(ranges);
  j["seed"] = c.seed;
  ordered_json fit;
  fit["quadrature_points"] = c.fit.quadrature_points;
  fit["max_iterations"] = c.fit.max_iterations;
  fit["gradient_tolerance"] = c.fit.gradient_tolerance;
  fit["objective_rel_tolerance"] = c.fit.objective_rel_tolerance;
  fit["n_starts"] = c.fit.n_starts;
  j["fit"] = std::move(fit);
  j["init_l2_at_truth"] = c.init_l2_at_truth;
  return j;
}

} // namespace

std::string study_result_to_json(const StudyResult& result) {
  ordered_json j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["report"] = "simulation_study";
  j["config"] = config_to_json(result.config);
  j["truth"] = items_to_json(result.truth);
  j["true_moments"] = {{"mean", result.true_moments.mean},
                       {"variance", result.true_moments.variance}};
  j["truth_rescaled"] = items_to_json(result.truth_rescaled);
  j["threads_used"] = result.threads_used;

  ordered_json tests = ordered_json::array();
  for (const auto& s : result.tests) {
    ordered_json tj;
    tj["test"] = s.test;
    tj["degree"] = s.degree;
    tj["n_invalid"] = s.n_invalid;
    ordered_json rows = ordered_json::array();
    for (const auto& r : s.by_alpha) {
      ordered_json rj;
      rj["alpha"] = r.alpha;
      rj["n_valid"] = r.n_valid;
      rj["n_reject"] = r.n_reject;
      rj["rate"] = r.rate;
      rj["ci_nominal"] = {r.ci_lo, r.ci_hi};
      rj["ci_wald"] = {r.wald_lo, r.wald_hi};
      rows.push_back(std::move(rj));
    }
    tj["by_alpha"] = std::move(rows);
    tests.push_back(std::move(tj));
  }
  j["tests"] = std::move(tests);

  ordered_json ics = ordered_json::array();
  for (const auto& s : result.ics) {
    ordered_json ij;
    ij["degree"] = s.degree;
    ij["n_valid"] = s.n_valid;
    ij["pct_aic"] = s.pct_aic;
    ij["pct_bic"] = s.pct_bic;
    ij["pct_hq"] = s.pct_hq;
    ics.push_back(std::move(ij));
  }
  j["information_criteria"] = std::move(ics);

  ordered_json bias = ordered_json::array();
  for (const auto& row : result.bias) {
    ordered_json bj;
    bj["param"] = row.param;
    bj["truth"] = row.truth;
    ordered_json devs;
    for (const auto& [est, dev] : row.mean_abs_dev) devs[est] = dev;
    bj["mean_abs_dev"] = std::move(devs);
    ordered_json used;
    for (const auto& [est, cnt] : row.n_used) used[est] = cnt;
    bj["n_used"] = std::move(used);
    bias.push_back(std::move(bj));
  }
  j["bias"] = std::move(bias);

  ordered_json reps = ordered_json::array();
  for (const auto& rec : result.replications) {
    ordered_json rj;
    rj["replication"] = rec.replication;
    rj["pl_converged"] = rec.pl_ok;
    rj["full_converged"] = rec.full_ok;
    ordered_json snp;
    for (const auto& [L, ok] : rec.snp_ok) snp[std::to_string(L)] = ok;
    rj["snp_converged"] = std::move(snp);
    auto put_map = [&rj](const char* key, const std::map<int, TestOutcome>& m) {
      if (m.empty()) return;
      ordered_json mj;
      for (const auto& [L, oc] : m) mj[std::to_string(L)] = outcome_to_json(oc);
      rj[key] = std::move(mj);
    };
    put_map("gh_t", rec.gh_t);
    put_map("gh", rec.gh_full);
    put_map("lr", rec.lr);
    if (rec.m2) rj["m2"] = outcome_to_json(*rec.m2);
    if (!rec.ics.empty()) {
      ordered_json icj;
      for (const auto& [L, ic] : rec.ics) icj[std::to_string(L)] = ic_to_json(ic);
      rj["ics"] = std::move(icj);
    }
    if (!rec.estimates.empty()) {
      ordered_json ej;
      for (const auto& [key, est] : rec.estimates) ej[key] = vector_to_json(est);
      rj["estimates"] = std::move(ej);
    }
    if (!rec.note.empty()) rj["note"] = rec.note;
    reps.push_back(std::move(rj));
  }
  j["replications"] = std::move(reps);

  return j.dump(2) + "\n";
}

std::string study_result_to_text(const StudyResult& result) {
  std::ostringstream out;
  out << std::fixed;
  out << "simulation study: " << result.config.latent.label << "\n";
  out << std::setprecision(4) << "true latent mean " << result.true_moments.mean
      << ", variance " << result.true_moments.variance << "\n";
  out << "p=" << result.config.p << "  n=" << result.config.n
      << "  replications=" << result.config.replications
      << "  seed=" << result.config.seed << "  threads=" << result.threads_used
      << "\n";

  if (!result.tests.empty()) {
    out << "\nrejection rates\n";
    out << std::left << std::setw(6) << "test" << std::right << std::setw(3) << "L"
        << std::setw(8) << "alpha" << std::setw(7) << "N_v" << std::setw(8) << "rate"
        << "   " << std::left << std::setw(17) << "CI(nominal)" << std::setw(17)
        << "CI(Wald)" << std::right << std::setw(8) << "invalid" << "\n";
    for (const auto& s : result.tests) {
      for (const auto& r : s.by_alpha) {
        std::ostringstream nom, wald;
        nom << std::fixed << std::setprecision(3) << "[" << r.ci_lo << ", "
            << r.ci_hi << "]";
        wald << std::fixed << std::setprecision(3) << "[" << r.wald_lo << ", "
             << r.wald_hi << "]";
        out << std::left << std::setw(6) << test_display(s.test) << std::right
            << std::setw(3);
        if (s.degree > 0)
          out << s.degree;
        else
          out << "-";
        out << std::setw(8) << std::setprecision(3) << r.alpha << std::setw(7)
            << r.n_valid << std::setw(8) << std::setprecision(3) << r.rate << "   "
            << std::left << std::setw(17) << nom.str() << std::setw(17) << wald.str()
            << std::right << std::setw(8) << s.n_invalid << "\n";
      }
    }
  }

  if (!result.ics.empty()) {
    out << "\nmodel selection, % preferring the degree-L model\n";
    out << std::right << std::setw(3) << "L" << std::setw(7) << "N_v" << std::setw(8)
        << "AIC" << std::setw(8) << "BIC" << std::setw(8) << "HQ" << "\n";
    for (const auto& s : result.ics) {
      out << std::setw(3) << s.degree << std::setw(7) << s.n_valid
          << std::setprecision(1) << std::setw(8) << s.pct_aic << std::setw(8)
          << s.pct_bic << std::setw(8) << s.pct_hq << "\n";
    }
  }

  if (!result.bias.empty()) {
    std::vector<std::string> estimators;
    for (const auto& [est, dev] : result.bias.front().mean_abs_dev)
      estimators.push_back(est);
    if (!estimators.empty()) {
      out << "\nmean absolute deviation from the rescaled truth\n";
      out << std::left << std::setw(14) << "param" << std::right << std::setw(9)
          << "truth";
      for (const auto& est : estimators) out << std::setw(10) << est;
      out << "\n";
      for (const auto& row : result.bias) {
        out << std::left << std::setw(14) << row.param << std::right
            << std::setprecision(3) << std::setw(9) << row.truth;
        for (const auto& est : estimators) {
          const auto it = row.mean_abs_dev.find(est);
          if (it != row.mean_abs_dev.end())
            out << std::setprecision(3) << std::setw(10) << it->second;
          else
            out << std::setw(10) << "-";
        }
        out << "\n";
      }
    }
  }

  int failed = 0;
  for (const auto& rec : result.replications)
    if (!rec.note.empty()) ++failed;
  if (failed > 0) out << "\n" << failed << " replications recorded a failure note\n";
  return out.str();
}

} // namespace snpirt
