#include <benchmark/benchmark.h>

#include <random>

#include "safnet/baselines.hpp"
#include "safnet/matrix.hpp"
#include "safnet/training.hpp"

using namespace safnet;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

std::vector<MultiViewSample> random_batch(std::size_t n, std::size_t d_in) {
  std::vector<MultiViewSample> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"b" + std::to_string(i), static_cast<int>(i % 2), random_matrix(d_in, 2, 100 + i)});
  return out;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_serial(a, b));
}

void BM_Backward(benchmark::State& state) {
  const ModelDims dims{static_cast<std::size_t>(state.range(0)), 64, 32, 2};
  const SafNetParams params = SafNetParams::glorot(dims, 3);
  const auto batch = random_batch(144, dims.d_in);
  for (auto _ : state) benchmark::DoNotOptimize(backward(batch, params, ClassWeights{1.0, 1.0}));
}

void BM_BackwardSerial(benchmark::State& state) {
  const ModelDims dims{static_cast<std::size_t>(state.range(0)), 64, 32, 2};
  const SafNetParams params = SafNetParams::glorot(dims, 3);
  const auto batch = random_batch(144, dims.d_in);
  for (auto _ : state) benchmark::DoNotOptimize(backward_serial(batch, params, ClassWeights{1.0, 1.0}));
}

void BM_Distances(benchmark::State& state) {
  const Matrix pts = random_matrix(144, static_cast<std::size_t>(state.range(0)), 4);
  const Matrix q = random_matrix(1, pts.cols(), 5);
  for (auto _ : state) benchmark::DoNotOptimize(squared_distances(pts, q.values()));
}

void BM_DistancesSerial(benchmark::State& state) {
  const Matrix pts = random_matrix(144, static_cast<std::size_t>(state.range(0)), 4);
  const Matrix q = random_matrix(1, pts.cols(), 5);
  for (auto _ : state) benchmark::DoNotOptimize(squared_distances_serial(pts, q.values()));
}

}  // namespace

BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);
BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_Backward)->Arg(64)->Arg(1024);
BENCHMARK(BM_BackwardSerial)->Arg(64)->Arg(1024);
BENCHMARK(BM_Distances)->Arg(128)->Arg(10240);
BENCHMARK(BM_DistancesSerial)->Arg(128)->Arg(10240);

BENCHMARK_MAIN();
