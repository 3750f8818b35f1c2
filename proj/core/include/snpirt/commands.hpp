#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace snpirt {

// one flat bag of options shared by the subcommands; a JSON config file fills
// it first, explicit flags override, remaining fields keep these defaults
struct RunManifest {
  std::string data_path;
  std::string scenario;                 // catalog name for simulate
  std::string latent_json;              // inline latent spec, overrides none set
  std::string objective = "snp";        // fit: snp | full | pairwise
  int degree = 1;                       // --L
  int starts = 10;
  int quadrature = 40;
  std::vector<std::string> tests = {"ght"};   // ght, gh, lr, m2
  std::vector<std::string> ics;               // aic, bic, hq
  std::vector<double> alphas = {0.05, 0.01};
  int n = 1000;
  int p = 10;
  int reps = 200;
  std::uint64_t seed = 20240915;
  int threads = 0;                      // 0 = available parallelism
  std::string out_path;                 // write the JSON report here when set
};

struct CommandOutput {
  std::string report_json;
  std::string text;
};

// overlay manifest fields present in a JSON config document onto base
RunManifest manifest_from_json(const std::string& json_text, RunManifest base);

CommandOutput cmd_fit(const RunManifest& manifest);
CommandOutput cmd_test(const RunManifest& manifest);
CommandOutput cmd_simulate(const RunManifest& manifest);
std::string scenario_listing();

} // namespace snpirt
