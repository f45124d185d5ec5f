#include <benchmark/benchmark.h>

#include "lightd/attack.hpp"
#include "lightd/metrics/caption.hpp"
#include "lightd/metrics/niqe.hpp"
#include "lightd/synthetic.hpp"

using namespace lightd;

namespace {

void BM_ResizeBilinear(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image img = synthetic_scene(1, n, n).image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(resize_bilinear(img, n / 2, n / 2));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ResizeBilinear)->Arg(64)->Arg(256)->Arg(512);

void BM_ResizeAdjoint(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GradientTensor g(n / 2, n / 2, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(resize_adjoint(g, n, n));
}
BENCHMARK(BM_ResizeAdjoint)->Arg(64)->Arg(256);

void BM_LossGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto scene = synthetic_scene(2, n, n);
  const SurrogateVictim victim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(victim.loss_grad(scene.image, scene.image, scene.captions[0]));
  }
}
BENCHMARK(BM_LossGrad)->Arg(48)->Arg(224);

void BM_SgaIteration(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto scene = synthetic_scene(3, 48, 48);
  const SurrogateRelighter relighter;
  const SurrogateVictim victim;
  AttackConfig cfg;
  cfg.resize_count = m;
  const Image l = generate_lighting_image(LightingParams{}, 48, 48);
  for (auto _ : state) {
    benchmark::DoNotOptimize(multiscale_lighting_gradient(cfg, relighter, victim, l, scene.image,
                                                          scene.captions[0], nullptr));
  }
}
BENCHMARK(BM_SgaIteration)->Arg(1)->Arg(5);

void BM_NiqeFeatures(benchmark::State& state) {
  const Image img = synthetic_scene(4, 192, 192).image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::niqe_features(img, metrics::PatchSelection::kAll));
  }
}
BENCHMARK(BM_NiqeFeatures);

void BM_Cider(benchmark::State& state) {
  std::vector<metrics::TokenSeq> cands;
  std::vector<std::vector<metrics::TokenSeq>> refs;
  for (const auto& s : synthetic_corpus(10, 50, 8, 8)) {
    cands.push_back(metrics::tokenize(s.captions[0]));
    refs.push_back({metrics::tokenize(s.captions[1]), metrics::tokenize(s.captions[2])});
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::cider(cands, refs, refs));
}
BENCHMARK(BM_Cider);

}  // namespace

BENCHMARK_MAIN();
