#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "colldiff/graph.hpp"
#include "colldiff/rng.hpp"

namespace colldiff {

struct Event {
  NodeId node = 0;
  int tau = 0;    // activation time; 0 marks a seed
  int level = 1;  // number of active individuals, 1..capacity

  friend bool operator==(const Event&, const Event&) = default;
};

// One observed diffusion. Nodes without an event never activated.
// Events are kept sorted by (tau, node).
struct Cascade {
  std::vector<Event> events;

  friend bool operator==(const Cascade&, const Cascade&) = default;
};

// Checks the cascade invariants against `net`: one event per node, levels
// within capacity, every non-seed event preceded by an event at tau-1.
// Throws ParameterError naming the offending event.
void validate_cascade(const Cascade& cascade, const Network& net);

struct Seed {
  NodeId node = 0;
  int level = 1;
};

// Seeds drawn per cascade: round(fraction * n) distinct nodes (at least 1),
// levels uniform on the integers [min_level, max_level], capped at the
// node's capacity.
struct SeedSampling {
  double fraction = 0.05;
  int min_level = 5;
  int max_level = 25;
};

using SeedSpec = std::variant<std::vector<Seed>, SeedSampling>;

struct ParentActivation {
  int level = 1;   // n_j
  double p = 0.0;  // p_ji
};

// 1 - prod_j (1 - p_j)^{n_j}, accumulated in log space. 0 for no parents.
double activation_probability(std::span<const ParentActivation> parents);

// Binomial(capacity, gamma) pmf over levels 0..capacity.
std::vector<double> step_activation_distribution(int capacity, double gamma);

// log of the Binomial(capacity, gamma) pmf at `level`; -inf when impossible.
double binomial_log_pmf(int capacity, double gamma, int level);

Cascade simulate_cascade(const Network& net, const SeedSpec& seeds, Rng& rng);
Cascade simulate_cascade(const Network& net, const SeedSpec& seeds,
                         std::uint64_t seed);

// Cascade k uses substream k of `master_seed`, so the batch is identical for
// any thread count.
std::vector<Cascade> simulate_batch(const Network& net, const SeedSpec& seeds,
                                    std::size_t count, std::uint64_t master_seed,
                                    unsigned threads = 0);

// Per-layer activation levels; levels[t][i] is node i at layer t.
using LayerLevels = std::vector<std::vector<int>>;

// Non-progressive process on the layered expansion: every node copy at
// layer t+1 draws Binomial(N_i, gamma) with parents all base predecessors j
// whose layer-t level is >= 1.
LayerLevels simulate_layered(const LayeredNetwork& layered,
                             std::span<const int> initial_levels, Rng& rng);
LayerLevels simulate_layered(const LayeredNetwork& layered,
                             std::span<const int> initial_levels,
                             std::uint64_t seed);

// Exact log-probability of `cascade` under `net`, binomial coefficients
// included. Seed events contribute no factor. -inf when impossible.
double cascade_log_likelihood(const Network& net, const Cascade& cascade);

// Cascade trace files: `cascade_id,node_id,tau,level` rows after an optional
// `# network: <path>` line and the column header.
void save_cascades(const std::vector<Cascade>& cascades,
                   const std::filesystem::path& path,
                   const std::string& network_source = {});
std::vector<Cascade> load_cascades(const std::filesystem::path& path);

// Layer observation files: `layer,node_id,level`, one row per (layer, node).
void save_layer_levels(const LayerLevels& levels,
                       const std::filesystem::path& path);
LayerLevels load_layer_levels(const std::filesystem::path& path);

// Capacities files: `node_id,capacity`.
void save_capacities(std::span<const int> capacities,
                     const std::filesystem::path& path);
std::vector<int> load_capacities(const std::filesystem::path& path);

}  // namespace colldiff
