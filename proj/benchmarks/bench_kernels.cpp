#include <benchmark/benchmark.h>

#include <random>

#include "semi2i/core_math.hpp"
#include "semi2i/ops.hpp"
#include "semi2i/tiling.hpp"

namespace {

using semi2i::Tensor;

Tensor random_tensor(semi2i::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void BM_Conv2d3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const Tensor x = random_tensor({1, c, s, s}, 1), w = random_tensor({c, c, 3, 3}, 2);
  semi2i::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(semi2i::ops::conv2d(x, w, Tensor(), 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c) * c * 9 * s * s);
}
BENCHMARK(BM_Conv2d3x3)->Args({16, 64})->Args({32, 64})->Args({64, 32});

void BM_ConvBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  const Tensor x = random_tensor({1, c, s, s}, 3);
  Tensor w = random_tensor({c, c, 3, 3}, 4, true);
  for (auto _ : state) {
    w.zero_grad();
    semi2i::backward(semi2i::ops::mean(semi2i::ops::conv2d(x, w, Tensor(), 1, 1)));
  }
}
BENCHMARK(BM_ConvBackward)->Args({16, 64});

void BM_Adain(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 256, s, s}, 5);
  const semi2i::ChannelStats target{std::vector<double>(256, 0.3), std::vector<double>(256, 1.5)};
  semi2i::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(semi2i::adain(x, target, 1e-5));
}
BENCHMARK(BM_Adain)->Arg(16)->Arg(64);

void BM_Sobel(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 3, s, s}, 6);
  semi2i::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(semi2i::sobel_gradients(x));
  state.SetItemsProcessed(state.iterations() * 3 * s * s);
}
BENCHMARK(BM_Sobel)->Arg(64)->Arg(256);

void BM_TileRoundTrip(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  semi2i::RasterImage img(s, s, 3, semi2i::ValueRange::kSigned);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : img.data) v = u(rng);
  for (auto _ : state) {
    const auto p = semi2i::extract_patches(img, 256, 32);
    benchmark::DoNotOptimize(semi2i::stitch_patches(p.patches, p.grid, s, s));
  }
}
BENCHMARK(BM_TileRoundTrip)->Arg(512)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
