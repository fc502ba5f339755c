#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "aph/hypergraph.hpp"
#include "aph/model.hpp"
#include "aph/rng.hpp"
#include "aph/tensor.hpp"
#include "aph/train_eval.hpp"

namespace {

using namespace aph;

// One hot item with `n_edges` incident hyperedges; users and aspects cycle
// through pools sized so every quadruple stays distinct.
Hypergraph item_graph(int n_edges) {
  std::vector<Quadruple> quads;
  quads.reserve(static_cast<std::size_t>(n_edges));
  for (int e = 0; e < n_edges; ++e)
    quads.push_back({"u" + std::to_string(e % 97), "hot", "a" + std::to_string(e % 53),
                     static_cast<Polarity>(e % 3)});
  return build_hypergraph(quads);
}

Hypergraph random_graph(Rng& rng, int n_users, int n_items, int n_aspects, int n_edges) {
  std::vector<Quadruple> quads;
  quads.reserve(static_cast<std::size_t>(n_edges));
  for (int e = 0; e < n_edges; ++e)
    quads.push_back({"u" + std::to_string(rng.below_int(n_users)),
                     "i" + std::to_string(rng.below_int(n_items)),
                     "a" + std::to_string(rng.below_int(n_aspects)),
                     static_cast<Polarity>(rng.below_int(3))});
  return build_hypergraph(quads);
}

void PredictByItemEdges(benchmark::State& state) {
  const Hypergraph graph = item_graph(static_cast<int>(state.range(0)));
  const IncidenceIndex index(graph);
  const AphModel model(graph, index, HyperParams{}, Variant::Full, 4);
  const int item = graph.item_index("hot");
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(0, item));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PredictByItemEdges)->RangeMultiplier(10)->Range(10, 1000)->Complexity();

void PredictByVariant(benchmark::State& state) {
  const Hypergraph graph = item_graph(200);
  const IncidenceIndex index(graph);
  const Variant variant = static_cast<Variant>(state.range(0));
  const AphModel model(graph, index, HyperParams{}, variant, 4);
  const int item = graph.item_index("hot");
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(0, item));
}
BENCHMARK(PredictByVariant)
    ->DenseRange(static_cast<int>(Variant::Full), static_cast<int>(Variant::NoFm))
    ->ArgName("variant");

void PairwiseFast(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = 8;
  Rng rng(6);
  std::vector<double> z(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n * k));
  for (double& x : z) x = rng.uniform(-1.0, 1.0);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(
        fm_pairwise(tape, tape.constant(1, n, z), tape.constant(n, k, v)).scalar());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PairwiseFast)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void PairwiseNaive(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = 8;
  Rng rng(6);
  std::vector<double> z(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n * k));
  for (double& x : z) x = rng.uniform(-1.0, 1.0);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(fm_pairwise_naive(z, v, k));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PairwiseNaive)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void ExplainItem(benchmark::State& state) {
  const Hypergraph graph = item_graph(static_cast<int>(state.range(0)));
  const IncidenceIndex index(graph);
  const AphModel model(graph, index, HyperParams{}, Variant::Full, 4);
  const int item = graph.item_index("hot");
  for (auto _ : state) benchmark::DoNotOptimize(model.explain_item(item));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ExplainItem)->RangeMultiplier(10)->Range(10, 1000)->Complexity();

void TrainEpoch(benchmark::State& state) {
  Rng rng(12);
  const Hypergraph graph = random_graph(rng, 120, 40, 25, 2000);
  const IncidenceIndex index(graph);
  std::vector<RatedPair> pairs;
  for (int p = 0; p < 800; ++p)
    pairs.push_back({rng.below_int(static_cast<int>(graph.users().size())),
                     rng.below_int(static_cast<int>(graph.items().size())),
                     rng.uniform(1.0, 5.0)});
  AphModel model(graph, index, HyperParams{}, Variant::Full, 4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.patience = 0;
  tc.seed = 4;
  for (auto _ : state) benchmark::DoNotOptimize(train(model, pairs, {}, tc));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
