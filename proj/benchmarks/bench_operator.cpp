// Parallel pull kernel vs the serial push reference, plus full flow and search runs.

#include "mapflow/bench.hpp"
#include "mapflow/flow.hpp"
#include "mapflow/prior.hpp"
#include "mapflow/search.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>
#include <memory>
#include <random>

using namespace mapflow;

namespace {

struct Fixture {
    MultiGraph graph;
    PriorModel prior;
    std::unique_ptr<TransitionOperator> op;
    std::vector<double> p, out;
};

// Random directed graph with ~10 arcs per node and 100 metadata labels.
Fixture& fixture(std::size_t n) {
    static std::map<std::size_t, std::unique_ptr<Fixture>> cache;
    auto& slot = cache[n];
    if (!slot) {
        slot = std::make_unique<Fixture>();
        std::mt19937_64 rng(n);
        std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
        std::uniform_int_distribution<int> weight(1, 5);
        std::vector<Arc> arcs(10 * n);
        for (auto& a : arcs) a = {node(rng), node(rng), static_cast<double>(weight(rng))};
        std::vector<LabelId> labels(n);
        std::uniform_int_distribution<LabelId> label(0, 99);
        for (auto& l : labels) l = label(rng);
        slot->graph = with_labels(MultiGraph::from_edges(n, arcs, true), labels);
        slot->prior = build_prior(slot->graph, PriorMode::metadata);
        slot->op = std::make_unique<TransitionOperator>(slot->graph, prior_channels(slot->graph, slot->prior),
                                                        slot->prior.alpha);
        slot->p.assign(n, 1.0 / static_cast<double>(n));
        slot->out.assign(n, 0.0);
    }
    return *slot;
}

void BM_ApplyParallel(benchmark::State& state) {
    Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        f.op->apply(f.p, f.out);
        benchmark::DoNotOptimize(f.out.data());
    }
    state.counters["threads"] = omp_get_max_threads();
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.graph.num_arcs()));
}

void BM_ApplySerial(benchmark::State& state) {
    Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        f.op->apply_serial(f.p, f.out);
        benchmark::DoNotOptimize(f.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.graph.num_arcs()));
}

void BM_StationaryFlow(benchmark::State& state) {
    Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(stationary_flow(f.graph, f.prior).residual);
}

void BM_OptimizeSurrogate(benchmark::State& state) {
    const PlantedNetwork p = generate_planted(1000, 7.0, 0.4, 31, 4.9, 1);
    FlowOptions opts;
    opts.method = static_cast<FlowMethod>(state.range(0));
    const FlowField flows = compute_flow(p.graph, opts);
    for (auto _ : state) benchmark::DoNotOptimize(optimize(p.graph, flows).codelength);
    state.SetLabel(std::string(to_string(opts.method)));
}

} // namespace

BENCHMARK(BM_ApplyParallel)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ApplySerial)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StationaryFlow)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptimizeSurrogate)
    ->Arg(static_cast<int>(FlowMethod::standard))
    ->Arg(static_cast<int>(FlowMethod::uniform))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
