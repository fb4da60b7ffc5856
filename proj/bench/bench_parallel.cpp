// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "latefuse/automl.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/imageprep.hpp"
#include "latefuse/models/forest.hpp"
#include "latefuse/parallel.hpp"
#include "latefuse/rng.hpp"

namespace {

using namespace latefuse;

const DatasetSplit& split() {
  static const DatasetSplit s = [] {
    fusion::SynthConfig c;
    c.n_train = 3000;
    c.n_valid = 1000;
    c.n_test = 100;
    c.seed = 3;
    const auto data = fusion::generate_synthetic(c);
    fusion::GoldLabels gold(data.gold.begin(), data.gold.end());
    fusion::SplitAssignment sp(data.splits.begin(), data.splits.end());
    return fusion::partition(fusion::join_modalities(data.img, data.text, gold).features, sp).split;
  }();
  return s;
}

const std::vector<image::Image>& images() {
  static const std::vector<image::Image> imgs = [] {
    Rng rng(1);
    std::vector<image::Image> v;
    for (int i = 0; i < 64; ++i) {
      image::Image im(224, 224, 3);
      for (auto& p : im.data()) p = static_cast<double>(uniform_int(rng, 0, 255));
      v.push_back(std::move(im));
    }
    return v;
  }();
  return imgs;
}

const models::ForestParams kForest{64, 8, models::FeatureSubsample::Sqrt, true};

void BM_ForestReference(benchmark::State& state) {
  const Dataset train = to_dataset(split().train);
  for (auto _ : state) benchmark::DoNotOptimize(models::reference::fit_forest(train, kForest, false, 1));
}

void BM_ForestParallel(benchmark::State& state) {
  const Dataset train = to_dataset(split().train);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(models::fit_forest(train, kForest, false, 1, threads));
}

void BM_ChannelStatsReference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(image::reference::channel_stats(images()));
}

void BM_ChannelStatsParallel(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(image::channel_stats(images(), threads));
}

void BM_NormalizeReference(benchmark::State& state) {
  const auto stats = image::channel_stats(images());
  for (auto _ : state) benchmark::DoNotOptimize(image::reference::normalize_all(images(), stats));
}

void BM_NormalizeParallel(benchmark::State& state) {
  const auto stats = image::channel_stats(images());
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(image::normalize_all(images(), stats, threads));
}

void BM_RandomSearch(benchmark::State& state) {
  const Dataset train = to_dataset(split().train);
  const Dataset valid = to_dataset(split().valid);
  automl::SearchBudget budget;
  budget.max_trials = 12;
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        automl::random_search(train, valid, budget, 42, {.threads = threads, .build_ensembles = false}));
  }
}

void thread_counts(benchmark::internal::Benchmark* b) {
  const int max = resolve_threads(0);
  for (int t = 1; t < max; t *= 2) b->Arg(t);
  b->Arg(max);
}

}  // namespace

BENCHMARK(BM_ForestReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ChannelStatsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChannelStatsParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NormalizeReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormalizeParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RandomSearch)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime()->Iterations(1);

BENCHMARK_MAIN();
