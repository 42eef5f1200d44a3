#include <benchmark/benchmark.h>

#include "fmfusion/edges.hpp"
#include "fmfusion/ops.hpp"
#include "fmfusion/rng.hpp"
#include "fmfusion/tape.hpp"

using namespace fmf;

namespace {

Tensor input(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return uniform_tensor(std::move(shape), -1.0, 1.0, rng);
}

// args: channels, spatial size
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const Tensor x = input({2, c, hw, hw}, 1);
  const Tensor w = input({c, c, 3, 3}, 2);
  const Tensor b = input({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({8, 64})->Args({16, 32})->Args({32, 16})->Args({64, 8});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  Tensor x = input({2, c, hw, hw}, 1);
  Tensor w = input({c, c, 3, 3}, 2);
  Tensor b = input({c}, 3);
  x.set_requires_grad();
  w.set_requires_grad();
  b.set_requires_grad();
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(conv2d(x, w, b, 1, 1)));
    benchmark::DoNotOptimize(w.mutable_grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 64})->Args({64, 8});

void BM_FeatureDisparity(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const Tensor a = input({2, c, hw, hw}, 4);
  const Tensor d = input({2, c, hw, hw}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(feature_disparity(a, d).item());
}
BENCHMARK(BM_FeatureDisparity)->Args({8, 64})->Args({64, 8});

}  // namespace
