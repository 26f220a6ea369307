#include <random>

#include <benchmark/benchmark.h>

#include "pathcast/bands.hpp"
#include "pathcast/point_forecast.hpp"
#include "pathcast/samplers.hpp"
#include "pathcast/scoring.hpp"

namespace {

using namespace pathcast;

Eigen::MatrixXd randomMatrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  return Eigen::MatrixXd::NullaryExpr(r, c, [&]() { return n(rng); });
}

void BM_EnergyScore(benchmark::State& state) {
  const Eigen::MatrixXd samples = randomMatrix(state.range(0), 10, 1);
  const Eigen::VectorXd obs = randomMatrix(10, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(energyScore(samples, obs));
}
BENCHMARK(BM_EnergyScore)->Arg(100)->Arg(1000);

void BM_Crps(benchmark::State& state) {
  const Eigen::MatrixXd samples = randomMatrix(state.range(0), 1, 3);
  std::vector<double> v(samples.data(), samples.data() + samples.rows());
  for (auto _ : state) benchmark::DoNotOptimize(crps(v, 0.3));
}
BENCHMARK(BM_Crps)->Arg(1000)->Arg(10000);

void BM_LassoFit(benchmark::State& state) {
  const Eigen::Index n = 56, p = state.range(0);
  const Eigen::MatrixXd X = randomMatrix(n, p, 4);
  const Eigen::VectorXd beta = randomMatrix(p, 1, 5);
  const Eigen::VectorXd y = X * beta * 0.1 + randomMatrix(n, 1, 6);
  for (auto _ : state) benchmark::DoNotOptimize(fitLasso(X, y, 0.1));
}
BENCHMARK(BM_LassoFit)->Arg(101);

void BM_CopulaSample(benchmark::State& state) {
  const Eigen::MatrixXd z = randomMatrix(30, 10, 7);
  const CopulaSpec spec = estimateCopulaFromProbits(z);
  QuantileFan fan;
  for (int q = 1; q <= 99; ++q) fan.q[static_cast<std::size_t>(q - 1)] = q * 0.3;
  std::vector<MarginalCdf> cdfs(10, buildCdf(fan));
  for (auto _ : state)
    benchmark::DoNotOptimize(sampleCopulaPaths(spec, cdfs, static_cast<int>(state.range(0)), 9));
}
BENCHMARK(BM_CopulaSample)->Arg(1000);

void BM_BuildBand(benchmark::State& state) {
  TrajectoryEnsemble e;
  e.paths = randomMatrix(state.range(0), 10, 8);
  for (auto _ : state) benchmark::DoNotOptimize(buildBand(e, 0.5, BandSide::Upper));
}
BENCHMARK(BM_BuildBand)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
