#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "trgan/metrics.hpp"
#include "trgan/model.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/phantom.hpp"
#include "trgan/radiomics.hpp"

using namespace trgan;

namespace {

nn::Tensor random_tensor(nn::Shape s, std::mt19937_64& rng) {
  nn::Tensor t(std::move(s));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void BM_Conv3d(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int c = static_cast<int>(state.range(0));
  const nn::Var x = nn::constant(random_tensor({8, c, 8, 16, 16}, rng));
  const nn::Var w = nn::constant(random_tensor({2 * c, c, 4, 4, 4}, rng));
  for (auto _ : state) {
    nn::NoGradGuard guard;
    benchmark::DoNotOptimize(nn::conv3d(x, w, nullptr, {{2, 2, 2}, {1, 1, 1}}));
  }
}
BENCHMARK(BM_Conv3d)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::unique_ptr<bool[]> labels(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 3 != 0;
    scores[i] = g(rng) + (labels[i] ? 0.5 : 0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, std::span<const bool>(labels.get(), n)));
}
BENCHMARK(BM_Auc)->Arg(200)->Arg(20000);

void BM_RadiomicFeatures(benchmark::State& state) {
  PhantomConfig c;
  c.dims = {static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2};
  c.tumour_semi_axes_mm = {6.0, 12.0};
  const Sample s = generate_phantom(c, 0);
  for (auto _ : state) benchmark::DoNotOptimize(radiomic_features(s.volume, s.mask));
}
BENCHMARK(BM_RadiomicFeatures)->Arg(16)->Arg(64);

void BM_GeneratorForward(benchmark::State& state) {
  TrganConfig c;
  const GridDims grid{16, 16, 8};
  const Generator g(c, grid, 3);
  std::mt19937_64 rng(4);
  const int n = static_cast<int>(state.range(0));
  const nn::Tensor z = random_tensor({n, c.latent_dim0}, rng);
  nn::Tensor masks({n, 1, grid.depth, grid.height, grid.width});
  for (auto _ : state) {
    nn::NoGradGuard guard;
    benchmark::DoNotOptimize(g.generate(nn::constant(z), masks));
  }
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
