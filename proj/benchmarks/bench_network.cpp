#include <benchmark/benchmark.h>

#include "fmfusion/synth.hpp"
#include "fmfusion/tape.hpp"
#include "fmfusion/train.hpp"

using namespace fmf;

namespace {

const Batch& batch() {
  static const DataSplit split = make_split(1000, 2, 1);
  static const Batch b = stack_scenes(split.train);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const auto v = static_cast<Variant>(state.range(0));
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(v), 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch().rgb, batch().depth).logits);
  state.SetLabel(std::string(variant_name(v)));
}
BENCHMARK(BM_Forward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

// one forward + backward of the composite loss, as in a training step
void BM_ForwardBackward(benchmark::State& state) {
  const auto v = static_cast<Variant>(state.range(0));
  auto net = FusionNetwork::build(ArchitectureSpec::for_variant(v), 1);
  const TrainingConfig cfg;
  for (auto _ : state) {
    net.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(total_loss(net, batch().rgb, batch().depth, batch().mask, cfg).total);
  }
  state.SetLabel(std::string(variant_name(v)));
}
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
