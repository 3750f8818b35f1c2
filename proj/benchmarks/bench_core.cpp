#include <benchmark/benchmark.h>

#include <random>

#include "snpirt/estimation.hpp"
#include "snpirt/likelihood.hpp"
#include "snpirt/quadrature.hpp"
#include "snpirt/simulation.hpp"

using namespace snpirt;

namespace {

ResponseMatrix bench_data(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ItemParams truth = draw_item_params(p, ItemParamRanges{}, rng);
  return simulate_dataset(truth, LatentSpec::standard_normal(), n, rng);
}

ExtendedParams bench_params(int p, int degree) {
  ExtendedParams params;
  params.items.intercepts = Eigen::VectorXd::LinSpaced(p, -0.7, 1.0);
  params.items.slopes = Eigen::VectorXd::LinSpaced(p, 0.5, 1.5);
  params.angles = SnpAngles(degree, std::vector<double>(degree, 0.4));
  return params;
}

void BM_quadrature_rule(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gauss_hermite_rule(q));
}
BENCHMARK(BM_quadrature_rule)->Arg(20)->Arg(40)->Arg(60);

void BM_full_loglik(benchmark::State& state) {
  const int degree = static_cast<int>(state.range(0));
  const ResponseMatrix data = bench_data(1000, 10, 7u);
  const ExtendedParams params = bench_params(10, degree);
  const QuadratureRule rule = gauss_hermite_rule(40);
  for (auto _ : state) benchmark::DoNotOptimize(full_loglik(data, params, rule));
}
BENCHMARK(BM_full_loglik)->Arg(0)->Arg(1)->Arg(2);

void BM_pairwise_loglik(benchmark::State& state) {
  const ResponseMatrix data = bench_data(1000, 10, 7u);
  const ExtendedParams params = bench_params(10, 0);
  const QuadratureRule rule = gauss_hermite_rule(40);
  for (auto _ : state)
    benchmark::DoNotOptimize(pairwise_loglik(data, params.items, rule));
}
BENCHMARK(BM_pairwise_loglik);

void BM_score_contributions(benchmark::State& state) {
  const ResponseMatrix data = bench_data(1000, 10, 7u);
  const ExtendedParams params = bench_params(10, 1);
  const QuadratureRule rule = gauss_hermite_rule(40);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        score_contributions(Objective::full_ml, data, params, rule));
}
BENCHMARK(BM_score_contributions);

void BM_fit_normal_latent(benchmark::State& state) {
  const ResponseMatrix data = bench_data(500, 5, 11u);
  FitConfig cfg;
  cfg.degree = 0;
  cfg.quadrature_points = 21;
  for (auto _ : state) benchmark::DoNotOptimize(fit_snp0_full(data, cfg));
}
BENCHMARK(BM_fit_normal_latent)->Unit(benchmark::kMillisecond);

void BM_fit_degree_one(benchmark::State& state) {
  const ResponseMatrix data = bench_data(500, 5, 11u);
  FitConfig cfg;
  cfg.degree = 1;
  cfg.quadrature_points = 21;
  cfg.n_starts = 4;
  for (auto _ : state) benchmark::DoNotOptimize(fit_snpl(data, cfg));
}
BENCHMARK(BM_fit_degree_one)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
