#include <benchmark/benchmark.h>

#include <random>

#include "phasegen/generator.hpp"
#include "phasegen/measure.hpp"
#include "phasegen/solver.hpp"

using namespace phasegen;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

GeneratorModel model_for(int arch) {
  if (arch == 2) return make_mnist_dcgan_generator(1);
  SyntheticSpec spec;
  spec.arch = arch == 0 ? SyntheticArch::mlp : SyntheticArch::dcgan;
  spec.output = {16, 16, 1};
  return make_synthetic_generator(spec);
}

void BM_Forward(benchmark::State& state) {
  const auto model = model_for(static_cast<int>(state.range(0)));
  const auto p = state.range(1) == 0 ? Precision::f32 : Precision::f64;
  const auto z = noise(model.input_dim(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, z, p));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1, 2}, {0, 1}});

void BM_Vjp(benchmark::State& state) {
  const auto model = model_for(static_cast<int>(state.range(0)));
  const auto z = noise(model.input_dim(), 1);
  const ImageTensor cot(model.output_shape(), noise(model.output_size(), 2));
  for (auto _ : state) benchmark::DoNotOptimize(vjp(model, z, cot));
}
BENCHMARK(BM_Vjp)->DenseRange(0, 2);

void BM_ApplyGaussian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto op = make_gaussian(n / 2, n, 1);
  const auto x = noise(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_ApplyGaussian)->Arg(256)->Arg(1024)->Arg(4096);

void BM_ApplyCdp(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto op = make_cdp(side, side, 2, side * side / 2, 1);
  const auto x = noise(side * side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_ApplyCdp)->Arg(16)->Arg(64)->Arg(128);

void BM_SolverIterations(benchmark::State& state) {
  const auto model = model_for(0);
  const auto op = make_gaussian(128, 256, 3);
  const auto x = forward(model, noise(10, 4));
  std::vector<double> y;
  for (auto u : op.apply(x.data)) y.push_back(std::abs(u));
  SolverConfig cfg;
  cfg.restarts = 1;
  cfg.iterations = 100;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(solve(model, op, y, cfg));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SolverIterations);

}  // namespace
BENCHMARK_MAIN();
