// Serial reference kernels against their OpenMP counterparts, plus the
// per-batch gradient in both parallelism modes.

#include <benchmark/benchmark.h>

#include <vector>

#include "han/gradcheck.hpp"
#include "han/kernels.hpp"
#include "han/training.hpp"

namespace {

han::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  han::Rng rng(seed);
  han::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

han::Vector random_vector(std::size_t n, std::uint64_t seed) {
  han::Rng rng(seed);
  han::Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_GemvSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const han::Matrix m = random_matrix(4 * n, n, 1);
  const han::Vector x = random_vector(n, 2);
  han::Vector out(4 * n);
  for (auto _ : state) {
    han::kernels::gemv_serial(m, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(4 * n * n));
}

void BM_GemvParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const han::Matrix m = random_matrix(4 * n, n, 1);
  const han::Vector x = random_vector(n, 2);
  han::Vector out(4 * n);
  for (auto _ : state) {
    han::kernels::gemv_parallel(m, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(4 * n * n));
}

void BM_GemvTransposedSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const han::Matrix m = random_matrix(4 * n, n, 3);
  const han::Vector v = random_vector(4 * n, 4);
  han::Vector out(n, 0.0);
  for (auto _ : state) {
    han::matvec_transposed_acc(m, v, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_GemvTransposedParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const han::Matrix m = random_matrix(4 * n, n, 3);
  const han::Vector v = random_vector(4 * n, 4);
  han::Vector out(n, 0.0);
  for (auto _ : state) {
    han::kernels::gemv_t_acc_parallel(m, v, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void batch_gradient_bench(benchmark::State& state, han::Parallelism mode) {
  han::ModelConfig cfg;
  cfg.regions_per_side = 3;
  cfg.feature_dim = 16;
  cfg.hidden = static_cast<std::uint32_t>(state.range(0));
  cfg.skip = 4;
  cfg.frames = 16;
  cfg.classes = 4;
  han::Rng rng(5);
  const han::HanModel model = han::HanModel::initialized(cfg, rng);
  std::vector<han::Sample> samples;
  for (int i = 0; i < 32; ++i) samples.push_back(han::random_sample(cfg, rng));
  std::vector<const han::Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  const han::Rng drop(6);
  for (auto _ : state) {
    auto r = han::batch_gradient(model, batch, 0.5, drop, mode);
    benchmark::DoNotOptimize(r.loss_sum);
  }
}

void BM_BatchGradientSerial(benchmark::State& state) {
  batch_gradient_bench(state, han::Parallelism::kSerial);
}
void BM_BatchGradientOpenMP(benchmark::State& state) {
  batch_gradient_bench(state, han::Parallelism::kOpenMP);
}

}  // namespace

BENCHMARK(BM_GemvSerial)->Arg(256)->Arg(1024);
BENCHMARK(BM_GemvParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_GemvTransposedSerial)->Arg(256)->Arg(1024);
BENCHMARK(BM_GemvTransposedParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_BatchGradientSerial)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientOpenMP)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
