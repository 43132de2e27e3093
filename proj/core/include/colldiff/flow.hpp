#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace colldiff {

// Integer flow counts n(o, i), one row per outflow node, aligned with the
// adjacency lists of the instance: table[o][k] is the flow from o to its
// k-th inflow neighbour.
using FlowTable = std::vector<std::vector<std::int64_t>>;

// Turn probabilities p(o, i) in the same layout as FlowTable; each row sums
// to one.
using TurnProbabilities = std::vector<std::vector<double>>;

// Aggregate observation of one flow cascade: outgoing totals per outflow
// node, incoming totals per inflow node, and which inflow nodes each outflow
// node can reach. An observed table switches to complete-data mode.
struct FlowInstance {
  std::vector<std::int64_t> outflow;
  std::vector<std::int64_t> inflow;
  std::vector<std::vector<int>> adjacency;
  std::optional<FlowTable> table;

  // Shape and sign checks; throws ParameterError.
  void validate() const;
  bool balanced() const;
};

// Multinomial log-probability of `table` under `p`, coefficients included.
// -inf when the table breaks a row or column margin, or routes flow along a
// zero-probability turn. Throws ParameterError when `p` is not
// row-stochastic or shapes disagree.
double flow_log_likelihood(const FlowInstance& instance, const FlowTable& table,
                           const TurnProbabilities& p);

// Count-ratio estimate over tables sharing one adjacency; rows with no
// observed flow get the uniform distribution over their neighbours.
TurnProbabilities complete_data_mle(const std::vector<std::vector<int>>& adjacency,
                                    std::span<const FlowTable> tables);

TurnProbabilities uniform_turns(const std::vector<std::vector<int>>& adjacency);

// Every non-negative integer table with the instance's margins, found by
// depth-first assignment with residual-bound pruning. Throws CapacityError
// once more than `cap` tables are produced. Unbalanced margins give an
// empty result.
std::vector<FlowTable> enumerate_flow_tables(const FlowInstance& instance,
                                             std::size_t cap = 1'000'000);

struct EmConfig {
  int max_iterations = 500;
  double tolerance = 1e-8;
  std::size_t table_cap = 1'000'000;
};

struct EmResult {
  TurnProbabilities p;
  // Observed-data log-likelihood at the initial point and after every
  // iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

// sum over instances of log sum_tables P(table; p).
double observed_log_likelihood(std::span<const FlowInstance> instances,
                               std::span<const std::vector<FlowTable>> tables,
                               const TurnProbabilities& p);

// EM from the uniform starting point with exact E-steps over enumerated
// tables. All instances must share one adjacency. Throws DataError naming
// the first instance whose margins admit no table.
EmResult em_fit(std::span<const FlowInstance> instances, const EmConfig& config = {});

// Flow instance files: {"instances": [{"outflow": [...], "inflow": [...],
// "adjacency": [[...], ...], "table": [[...], ...]}, ...]}; "table" is
// optional.
std::vector<FlowInstance> load_flow_instances(const std::filesystem::path& path);
void save_flow_instances(std::span<const FlowInstance> instances,
                         const std::filesystem::path& path);
void save_turn_probabilities(const TurnProbabilities& p,
                             std::span<const double> log_likelihood,
                             const std::filesystem::path& path);

}  // namespace colldiff
