#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "designbridge/attribution.hpp"
#include "designbridge/backends.hpp"
#include "designbridge/catalog.hpp"
#include "designbridge/elicitation.hpp"
#include "designbridge/preference_model.hpp"
#include "designbridge/rng.hpp"

using namespace designbridge;

namespace {

const DesignSpace& space() { return DesignSpace::canonical(); }

std::vector<HybridFeature> features(int n, std::uint64_t seed) {
  Rng rng(seed);
  MockEmbeddingBackend emb(seed);
  std::vector<HybridFeature> out;
  for (int k = 0; k < n; ++k) {
    DesignItem item;
    item.item_id = "item-" + std::to_string(k);
    for (int d = 0; d < kDimensionCount; ++d) item.design_vector.set(d, static_cast<int>(rng.index(space().attribute_count(d))));
    item.image_ref = "img-" + item.item_id;
    item.visual_embedding = emb.embed(item.design_vector, item.image_ref);
    out.push_back(build_feature(space(), item));
  }
  return out;
}

void BM_ShapleyExact(benchmark::State& state) {
  const auto net = Ppnn::initialized(1);
  const auto f = features(2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(shapley_exact(space(), net, f[0], {f[1]}));
}
BENCHMARK(BM_ShapleyExact)->Unit(benchmark::kMicrosecond);

void BM_Fit(benchmark::State& state) {
  const auto f = features(static_cast<int>(state.range(0)), 2);
  std::vector<LabeledFeature> batch;
  for (std::size_t i = 0; i < f.size(); ++i) batch.push_back({f[i], static_cast<int>(i % 2)});
  for (auto _ : state) benchmark::DoNotOptimize(fit(Ppnn::initialized(3), batch));
}
BENCHMARK(BM_Fit)->Arg(10)->Arg(35)->Unit(benchmark::kMillisecond);

void BM_SelectNext(benchmark::State& state) {
  const auto f = features(static_cast<int>(state.range(0)), 3);
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < f.size(); ++i) candidates.push_back({"item-" + std::to_string(i), f[i]});
  const auto model = PreferenceModel::fresh(4);
  for (auto _ : state) benchmark::DoNotOptimize(select_next(model, candidates, 1));
}
BENCHMARK(BM_SelectNext)->Arg(200)->Arg(2000)->Unit(benchmark::kMicrosecond);

void BM_RasterizeMask(benchmark::State& state) {
  const BrushRegion r{230, 0, 538, 154, 768, 768};
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_mask(r));
}
BENCHMARK(BM_RasterizeMask);

void BM_MaskPng(benchmark::State& state) {
  const auto mask = rasterize_mask({0, 116, 153, 691, 768, 768});
  for (auto _ : state) benchmark::DoNotOptimize(mask.to_png());
}
BENCHMARK(BM_MaskPng)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
