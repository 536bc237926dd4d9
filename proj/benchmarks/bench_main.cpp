#include <random>

#include <benchmark/benchmark.h>

#include "rocsurf/asymptotics.hpp"
#include "rocsurf/resampling.hpp"
#include "rocsurf/simlab.hpp"
#include "rocsurf/vus.hpp"

using namespace rocsurf;

namespace {

struct Triples {
  std::vector<double> t;
  Eigen::MatrixXd w;
};

Triples triples(std::size_t n) {
  std::mt19937_64 rng(n);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Triples x{std::vector<double>(n), Eigen::MatrixXd(static_cast<Eigen::Index>(n), 3)};
  for (auto& v : x.t) v = std::round(z(rng) * 20.0) / 10.0;
  for (Eigen::Index i = 0; i < x.w.size(); ++i) x.w.data()[i] = u(rng);
  return x;
}

Dataset study_one(std::size_t n) {
  StudyConfig c = default_config(Study::s1);
  c.n = n;
  return generate(c, 0);
}

void BM_VusFast(benchmark::State& state) {
  const Triples x = triples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(vus_sums(x.t, x.w, VusEngine::fast));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_VusFast)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

void BM_VusNaive(benchmark::State& state) {
  const Triples x = triples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(vus_sums(x.t, x.w, VusEngine::naive));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_VusNaive)->RangeMultiplier(2)->Range(32, 256)->Complexity(benchmark::oNCubed);

void BM_FitDisease(benchmark::State& state) {
  const Dataset ds = study_one(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_disease(ds));
}
BENCHMARK(BM_FitDisease)->Arg(250)->Arg(1000)->Arg(10000);

void BM_FitVerification(benchmark::State& state) {
  const Dataset ds = study_one(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_verification(ds, Link::logit));
}
BENCHMARK(BM_FitVerification)->Arg(250)->Arg(1000)->Arg(10000);

void BM_TcfWithSandwich(benchmark::State& state) {
  const Dataset ds = study_one(static_cast<std::size_t>(state.range(0)));
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, {});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_tcf_with_sd(Method::spe, ds, CutPair(2, 4), fits));
}
BENCHMARK(BM_TcfWithSandwich)->Arg(250)->Arg(1000);

void BM_VusWithVariance(benchmark::State& state) {
  const Dataset ds = study_one(static_cast<std::size_t>(state.range(0)));
  const NuisanceFits fits = fit_nuisance(ds, kCorrectedMethods, {});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_vus(Method::spe, ds, fits));
}
BENCHMARK(BM_VusWithVariance)->Arg(250)->Arg(1000)->Arg(5000);

void BM_BootstrapTcf(benchmark::State& state) {
  const Dataset ds = study_one(250);
  const std::vector<CutPair> cuts{{2, 4}};
  const BootstrapPlan plan{50, 1, static_cast<unsigned>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_tcf(Method::spe, ds, cuts, {}, plan));
}
BENCHMARK(BM_BootstrapTcf)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
