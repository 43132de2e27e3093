#include <benchmark/benchmark.h>

#include <vector>

#include "colldiff/flow.hpp"
#include "colldiff/graph.hpp"
#include "colldiff/infer.hpp"
#include "colldiff/simulate.hpp"

namespace {

using namespace colldiff;

Network study_network(int nodes) {
  PreferentialAttachmentParams params;
  params.nodes = nodes;
  return generate_preferential_attachment(params, 7);
}

void BM_GeneratePreferentialAttachment(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(study_network(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GeneratePreferentialAttachment)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_SimulateCascade(benchmark::State& state) {
  const Network net = study_network(static_cast<int>(state.range(0)));
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_cascade(net, SeedSampling{}, rng));
}
BENCHMARK(BM_SimulateCascade)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

// Node solve on the best-connected node of the 100-node study network.
void BM_SolveNode(benchmark::State& state) {
  const Network net = study_network(100);
  const auto cascades = simulate_batch(net, SeedSampling{}, static_cast<std::size_t>(state.range(0)), 8, 1);
  const std::vector<int> caps(net.capacities().begin(), net.capacities().end());
  NodeProblem best;
  for (NodeId i = 0; i < 100; ++i) {
    NodeProblem p = assemble_node_problem(cascades, caps, i);
    if (p.activations.size() > best.activations.size()) best = std::move(p);
  }
  SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve_node(best, cfg));
  state.counters["candidates"] = static_cast<double>(best.dimension());
  state.counters["records"] = static_cast<double>(best.activations.size());
}
BENCHMARK(BM_SolveNode)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_LearnStructure(benchmark::State& state) {
  const Network net = study_network(100);
  const auto cascades = simulate_batch(net, SeedSampling{}, static_cast<std::size_t>(state.range(0)), 8, 1);
  const std::vector<int> caps(net.capacities().begin(), net.capacities().end());
  for (auto _ : state) benchmark::DoNotOptimize(learn_structure(cascades, caps, SolverConfig{}, 1));
}
BENCHMARK(BM_LearnStructure)->Arg(100)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_EnumerateFlowTables(benchmark::State& state) {
  const int total = static_cast<int>(state.range(0));
  FlowInstance inst;
  inst.adjacency = {{0, 1, 2}, {0, 1, 2}, {0, 1, 2}};
  inst.outflow = {total, total, total};
  inst.inflow = {total, total, total};
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_flow_tables(inst));
}
BENCHMARK(BM_EnumerateFlowTables)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
