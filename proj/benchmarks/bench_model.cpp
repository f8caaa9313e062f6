#include <benchmark/benchmark.h>

#include "gazetrait/model.hpp"
#include "gazetrait/train.hpp"

namespace {

using namespace gazetrait;

model::Batch<float> random_batch(std::size_t batch, std::size_t length, std::size_t k) {
  Rng rng = make_rng({42});
  std::normal_distribution<float> n(0.0f, 1.0f);
  model::Batch<float> b;
  b.size = batch;
  b.length = length;
  b.inputs.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(length * batch));
  for (Eigen::Index j = 0; j < b.inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < b.inputs.rows(); ++i) b.inputs(i, j) = n(rng);
  }
  for (std::size_t i = 0; i < batch; ++i) b.labels.push_back(static_cast<int>(i % 3));
  return b;
}

void BM_Forward(benchmark::State& state) {
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 100, 12);
  const auto params = model::init_params(1, model::ModelDims{}).cast<float>();
  for (auto _ : state) {
    auto cache = model::forward(params, batch);
    benchmark::DoNotOptimize(cache.probs.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 100, 12);
  auto params = model::init_params(1, model::ModelDims{}).cast<float>();
  auto adam = train::AdamState<float>::zeros(params.dims);
  train::TrainConfig config;
  Rng rng = make_rng({7});
  for (auto _ : state) {
    benchmark::DoNotOptimize(train::train_step(params, adam, batch, config, 1e-3, &rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
