#include <benchmark/benchmark.h>

#include "mmr/margin.hpp"
#include "mmr/numeric.hpp"
#include "mmr/rng.hpp"

namespace {

mmr::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  mmr::Rng rng(seed);
  mmr::Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mmr::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_matmul_reference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mmr::matmul_reference(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

// Pool scoring shape: B rows of features against a 10-class head.
void BM_matmul_transposed(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(rows, 64, 3);
  const auto w = random_matrix(10, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmr::matmul_transposed(x, w));
}

void BM_matmul_transposed_reference(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(rows, 64, 3);
  const auto w = random_matrix(10, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmr::matmul_transposed_reference(x, w));
}

void BM_score_batch(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(rows, 64, 5);
  const mmr::LinearHead head{random_matrix(10, 64, 6), std::vector<double>(10, 0.0)};
  for (auto _ : state) benchmark::DoNotOptimize(mmr::score_batch(head, x));
}

void BM_score_batch_reference(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(rows, 64, 5);
  const mmr::LinearHead head{random_matrix(10, 64, 6), std::vector<double>(10, 0.0)};
  for (auto _ : state) benchmark::DoNotOptimize(mmr::score_batch_reference(head, x));
}

}  // namespace

BENCHMARK(BM_matmul)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_reference)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_transposed)->Arg(640)->Arg(6400);
BENCHMARK(BM_matmul_transposed_reference)->Arg(640)->Arg(6400);
BENCHMARK(BM_score_batch)->Arg(640)->Arg(6400);
BENCHMARK(BM_score_batch_reference)->Arg(640)->Arg(6400);

BENCHMARK_MAIN();
