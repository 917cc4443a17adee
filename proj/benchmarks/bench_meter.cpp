// Hot paths of the streaming loop.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "meter/dsd.hpp"
#include "meter/eval.hpp"
#include "meter/iec.hpp"
#include "meter/ous.hpp"
#include "meter/scd.hpp"

using namespace meter;

namespace {

Vector noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// 33 -> 16 -> 8 -> 16 -> 33, the acceptance throughput shape
AutoencoderModel model(std::mt19937_64& rng) { return init_autoencoder(33, 8, {16}, rng); }

}  // namespace

static void BM_MlpForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto m = model(rng);
  const auto x = noise(33, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(m.params, m.spec, x));
}
BENCHMARK(BM_MlpForward);

static void BM_StaticScore(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto m = model(rng);
  const auto x = noise(33, rng);
  for (auto _ : state) benchmark::DoNotOptimize(score(m, x));
}
BENCHMARK(BM_StaticScore);

static void BM_DynamicScore(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto m = model(rng);
  DsdOptions opt;
  const auto hyper = init_hypernetwork(m, opt, rng);
  const auto x = noise(33, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dynamic_score(m, hyper, x));
}
BENCHMARK(BM_DynamicScore);

static void BM_Opinion(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto c = init_controller(33, 32, rng);
  const auto x = noise(33, rng);
  for (auto _ : state) benchmark::DoNotOptimize(opinion(c, x));
}
BENCHMARK(BM_Opinion);

static void BM_WindowObserve(benchmark::State& state) {
  std::mt19937_64 rng(5);
  WindowState w(static_cast<std::size_t>(state.range(0)), 1u << 30, 1e300, 0.01);
  const auto x = noise(33, rng);
  double u = 0.0;
  for (auto _ : state) {
    u = u > 0.05 ? 0.0 : u + 0.001;
    benchmark::DoNotOptimize(w.observe(x, u));
  }
}
BENCHMARK(BM_WindowObserve)->Arg(64)->Arg(1024);

static void BM_Aucroc(benchmark::State& state) {
  std::mt19937_64 rng(6);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<int> y(n);
  std::uniform_real_distribution<double> u;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.05;
  }
  y[0] = 1;
  y[1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(aucroc(s, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Aucroc)->Range(1 << 10, 1 << 16)->Complexity();

BENCHMARK_MAIN();
