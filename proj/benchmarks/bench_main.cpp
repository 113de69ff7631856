#include <benchmark/benchmark.h>

#include "fvp/adapt.hpp"
#include "fvp/data.hpp"
#include "fvp/fft.hpp"
#include "fvp/prompt.hpp"
#include "fvp/pseudo.hpp"
#include "fvp/random.hpp"
#include "fvp/segnet.hpp"

namespace {

using namespace fvp;

RealGrid noise_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  RealGrid x(size, size, 1);
  for (double& v : x.values()) v = rng.normal();
  return x;
}

void BM_Fft2(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ComplexGrid z = to_complex(noise_image(n, 1));
  for (auto _ : state) benchmark::DoNotOptimize(fft2(z));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Fft2)->Arg(16)->Arg(64)->Arg(256)->Arg(48);

void BM_ComplexPrompt(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  SpectrumPrompt v(r, 1, PromptVariant::kComplex);
  Rng rng(2);
  std::vector<double> p(v.parameter_count());
  for (double& x : p) x = rng.normal();
  v.set_parameters(p);
  const AnyPrompt prompt = v;
  const RealGrid x = noise_image(64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(apply_prompt(x, prompt));
}
BENCHMARK(BM_ComplexPrompt)->Arg(4)->Arg(16)->Arg(64);

void BM_Forward(benchmark::State& state) {
  const SegModel m = init_model(4, 4);
  const std::vector<RealGrid> batch(static_cast<std::size_t>(state.range(0)), noise_image(64, 5));
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AdaptStep(benchmark::State& state) {
  const SegModel m = init_model(6, 4);
  std::vector<RealGrid> base;
  std::vector<ReliableLabel> labels;
  for (int b = 0; b < 8; ++b) {
    base.push_back(standardize(noise_image(64, 10 + b)).output);
    labels.push_back(reliable_labels(predict(m, base.back()), SelectionConfig{}));
  }
  const AnyPrompt prompt = SpectrumPrompt(16, 1, PromptVariant::kComplex);
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(m, prompt, base, labels));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_AdaptStep)->Unit(benchmark::kMillisecond);

void BM_ReliableLabels(benchmark::State& state) {
  const SegModel m = init_model(7, 4);
  const SegOutput out = predict(m, noise_image(64, 8));
  for (auto _ : state) benchmark::DoNotOptimize(reliable_labels(out, SelectionConfig{}));
}
BENCHMARK(BM_ReliableLabels);

}  // namespace
BENCHMARK_MAIN();
