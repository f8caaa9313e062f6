#include <benchmark/benchmark.h>

#include "gazetrait/baseline.hpp"
#include "gazetrait/random.hpp"

namespace {

using namespace gazetrait;

void BM_FitForest(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng = make_rng({3});
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(baseline::kStatDim));
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = noise(rng) + 0.3 * (i % 3) * (j % 2);
  }
  baseline::ForestConfig config;
  config.n_trees = 50;
  for (auto _ : state) {
    auto forest = baseline::fit_forest(x, y, config);
    benchmark::DoNotOptimize(forest.oob_accuracy());
  }
}
BENCHMARK(BM_FitForest)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
