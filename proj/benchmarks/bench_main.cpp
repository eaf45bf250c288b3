#include <benchmark/benchmark.h>

#include "tartan/encoder.hpp"
#include "tartan/experiment.hpp"
#include "tartan/search.hpp"
#include "tartan/synth.hpp"
#include "tartan/training.hpp"

namespace {

using namespace tartan;

const std::vector<Task>& bench_tasks() {
  static const std::vector<Task> tasks = [] {
    SynthSpec spec;
    spec.docs_per_task = 2000;
    return generate_benchmark(spec);
  }();
  return tasks;
}

DualParams bench_dual() { return DualParams::init(1u << 18, 64, kDefaultTemperature, 7); }

void BM_Featurize(benchmark::State& state) {
  const std::string text = compose_input(bench_tasks()[0].instructions[0], bench_tasks()[0].queries[0]);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(text, 1u << 18));
}
BENCHMARK(BM_Featurize);

void BM_Embed(benchmark::State& state) {
  const auto params = bench_dual();
  const std::string text = document_text(bench_tasks()[0].corpus.docs()[0]);
  for (auto _ : state) benchmark::DoNotOptimize(embed(params, text));
}
BENCHMARK(BM_Embed);

void BM_BuildIndex(benchmark::State& state) {
  const auto params = bench_dual();
  for (auto _ : state) benchmark::DoNotOptimize(build_index(bench_tasks()[0].corpus, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bench_tasks()[0].corpus.size()));
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

void BM_SearchTopk(benchmark::State& state) {
  const auto params = bench_dual();
  const auto index = build_index(bench_tasks()[0].corpus, params);
  const auto q = embed(params, bench_tasks()[0].queries[0].text);
  for (auto _ : state) benchmark::DoNotOptimize(search_topk(index, q, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_SearchTopk)->Arg(10)->Arg(100);

void BM_Bm25Search(benchmark::State& state) {
  const auto stats = build_bm25(bench_tasks()[0].corpus);
  const auto& q = bench_tasks()[0].queries[0].text;
  for (auto _ : state) benchmark::DoNotOptimize(bm25_search(stats, q, 100));
}
BENCHMARK(BM_Bm25Search);

void BM_DualLossGrad(benchmark::State& state) {
  const auto params = bench_dual();
  const auto& task = bench_tasks()[0];
  DualBatch batch;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    DualItem item;
    item.instruction = task.instructions[0];
    item.query = task.queries[i];
    const auto& pos = task.qrels.positives(task.queries[i].id);
    item.positive = *task.corpus.find(pos.front());
    for (std::size_t j = 0; j < 5; ++j) item.negatives.push_back(task.corpus.docs()[(7 * i + j) % task.corpus.size()]);
    batch.items.push_back(std::move(item));
  }
  for (auto _ : state) benchmark::DoNotOptimize(dual_loss_grad(params, batch));
}
BENCHMARK(BM_DualLossGrad)->Arg(16)->Arg(64);

void BM_CrossScore(benchmark::State& state) {
  const auto params = CrossParams::init(1u << 18, 64, 64, 7);
  const auto& task = bench_tasks()[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        score_cross(params, task.instructions[0], task.queries[0], task.corpus.docs()[0]));
  }
}
BENCHMARK(BM_CrossScore);

}  // namespace

BENCHMARK_MAIN();
