#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snpirt/basis.hpp"
#include "snpirt/data.hpp"
#include "snpirt/likelihood.hpp"

namespace snpirt {

// one user-supplied optimizer start: angles plus an optional item-parameter
// initializer that overrides the shared one for this start only
struct AngleStart {
  std::vector<double> phi;          // one value per angle
  std::optional<ItemParams> items;
};

struct FitConfig {
  int degree = 0;                       // L
  int quadrature_points = 40;
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;     // projected gradient norm
  double objective_rel_tolerance = 1e-9;
  int n_starts = 10;                    // L = 1 multi-start count
  std::uint64_t seed = 12345;           // start sampling
  // fixes the angles instead of estimating them (constrained fits)
  std::optional<std::vector<double>> pin_phi;
  // user grid appended to the default start list; rejected with pin_phi
  std::vector<AngleStart> extra_starts;
};

struct StartDiagnostic {
  int start_index = 0;
  std::vector<double> phi_init;
  bool completed = false;   // evaluated without numerical failure
  bool converged = false;
  double objective = 0.0;   // log likelihood reached
  int iterations = 0;
  std::string note;
};

struct FitResult {
  Objective objective = Objective::full_ml;
  ExtendedParams raw_params;    // maximizer as parametrized
  ExtendedParams final_params;  // standardized latent scale
  LatentMoments latent;         // moments at raw_params.angles
  double objective_value = 0.0; // maximized (pairwise) log likelihood
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;   // projected gradient at the maximizer
  bool boundary = false;        // some |phi_l| ended at pi/2
  int start_index = 0;
  std::vector<StartDiagnostic> starts;
};

// normal-latent model by marginal maximum likelihood
FitResult fit_snp0_full(const ResponseMatrix& data, const FitConfig& config = {});

// normal-latent model by pairwise likelihood
FitResult fit_snp0_pairwise(const ResponseMatrix& data, const FitConfig& config = {});

// degree-L model by quasi maximum likelihood; L = 1 multi-starts the angle
// over a grid sample, L = 2 uses the single start phi = (0.7, 1.0), and any
// config.extra_starts are appended; item parameters start from init_items
// when given (per-start overrides aside), otherwise from an internal
// normal-latent fit
FitResult fit_snpl(const ResponseMatrix& data, const FitConfig& config,
                   const std::optional<ItemParams>& init_items = std::nullopt);

} // namespace snpirt
