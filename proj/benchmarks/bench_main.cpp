#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "meshseq/codec.hpp"
#include "meshseq/metrics.hpp"
#include "meshseq/model.hpp"
#include "meshseq/sampling.hpp"

using namespace meshseq;

static void BM_Canonicalize(benchmark::State& state) {
  RandomStream rng(1, 0);
  const auto q = fixture::random_qmesh(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(canonicalize(q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Canonicalize)->Arg(100)->Arg(800);

static void BM_EncodeDecode(benchmark::State& state) {
  RandomStream rng(2, 0);
  const Vocabulary vocab(128);
  const auto q = fixture::random_canonical(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto seq = encode(q, vocab);
    benchmark::DoNotOptimize(decode(seq.tokens, vocab, {}, true));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeDecode)->Arg(100)->Arg(800);

static void BM_Chamfer(benchmark::State& state) {
  const auto a = sample_points(fixture::uv_sphere(16, 32), static_cast<std::size_t>(state.range(0)), 1, 0);
  const auto b = sample_points(fixture::cylinder(24), static_cast<std::size_t>(state.range(0)), 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
}
BENCHMARK(BM_Chamfer)->Arg(2048);

namespace {
ModelConfig desk() {
  ModelConfig c;
  c.vocab_size = Vocabulary(128).size();
  c.prefix_length = 0;
  return c;
}

std::vector<Token> tokens_of(std::size_t n) {
  RandomStream rng(3, 0);
  std::vector<Token> t{128};
  while (t.size() < n) t.push_back(static_cast<Token>(rng.below(128)));
  return t;
}
}  // namespace

static void BM_Forward(benchmark::State& state) {
  const Transformer<float> model(desk());
  const auto t = tokens_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(308)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const Transformer<float> model(desk());
  auto grads = Parameters<float>::zeros(model.config());
  const std::vector<Example> batch{{tokens_of(static_cast<std::size_t>(state.range(0))), std::nullopt}};
  for (auto _ : state) benchmark::DoNotOptimize(model.batch_gradients(batch, grads));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(308)->Unit(benchmark::kMillisecond);

static void BM_SampleStep(benchmark::State& state) {
  const Transformer<float> model(desk());
  const Vocabulary vocab(128);
  SamplingParams p;
  p.max_tokens = static_cast<std::size_t>(state.range(0));
  p.constrained = true;
  for (auto _ : state) benchmark::DoNotOptimize(sample(model, vocab, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleStep)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
