#include <benchmark/benchmark.h>

#include <cmath>

#include "nnlsgd/linalg.hpp"
#include "nnlsgd/problem.hpp"
#include "nnlsgd/solvers.hpp"

namespace {

using namespace nnlsgd;

NnlsProblem instance(std::size_t m, std::size_t n, std::size_t s) {
  DenseMatrix A = gen_gaussian_matrix(m, n, 1);
  normalize_columns(A);
  const auto sig = make_q_perturbed(gen_sparse_nonneg(n, s, 1), 0.0, 1);
  return make_problem(std::move(A), sig, 1, "bench");
}

void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix A = gen_gaussian_matrix(n, n, 2);
  const Vector x(n, 1.0);
  Vector y(n);
  for (auto _ : state) {
    matvec_into(A, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Matvec)->Arg(64)->Arg(256)->Arg(1024);

void BM_MatvecTranspose(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix A = gen_gaussian_matrix(n, n, 2);
  const Vector v(n, 1.0);
  Vector y(n);
  for (auto _ : state) {
    matvec_t_into(A, v, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_MatvecTranspose)->Arg(64)->Arg(256)->Arg(1024);

void BM_PgdGram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sys = GramSystem::from_problem(instance(n, n, n / 8));
  const double eta = 1.0 / gram_spectral_norm(instance(n, n, n / 8).A).value;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pgd_gram(sys, eta, Vector(n, 0.02), 100));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_PgdGram)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_GdGram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int L = static_cast<int>(state.range(1));
  const auto sys = GramSystem::from_problem(instance(n, n, n / 8));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_gd_gram(sys, L, Vector(n, 0.02), 100, 1000));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_GdGram)
    ->Args({64, 2})
    ->Args({256, 2})
    ->Args({256, 3})
    ->Unit(benchmark::kMicrosecond);

void BM_LawsonHanson(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = instance(n * 3 / 5, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lawson_hanson(p));
}
BENCHMARK(BM_LawsonHanson)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_GramSpectralNorm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix A = gen_gaussian_matrix(n / 2, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gram_spectral_norm(A));
}
BENCHMARK(BM_GramSpectralNorm)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
