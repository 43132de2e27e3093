#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "colldiff/eval.hpp"
#include "colldiff/graph.hpp"
#include "colldiff/infer.hpp"
#include "colldiff/simulate.hpp"

namespace colldiff {

struct ExperimentConfig {
  std::vector<int> network_sizes{100};
  int edges_per_new_node = 2;
  double log_p_min = -8.0;
  double log_p_max = -4.6;
  int capacity = 1000;
  double seed_fraction = 0.05;
  int seed_level_min = 5;
  int seed_level_max = 25;
  std::vector<std::size_t> cascade_counts{50, 100, 250, 500};
  int runs = 5;
  SolverConfig solver;
  // When non-empty every run is learned once per value instead of once with
  // solver.rho.
  std::vector<double> rho_sweep;
  std::filesystem::path output_dir = "experiment_out";
  std::uint64_t master_seed = 1;

  void validate() const;
  std::vector<double> rhos() const;
};

// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct RunRow {
  int nodes = 0;
  std::size_t cascades = 0;
  int run = 0;
  double rho = 0.0;
  Metrics metrics;
  double error_percent = 0.0;  // NaN when no true positives
  std::string status = "ok";   // "ok" or the failure message

  std::string run_id() const;
  bool ok() const { return status == "ok"; }
};

struct AggregateRow {
  int nodes = 0;
  std::size_t cascades = 0;
  double rho = 0.0;
  int runs_ok = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double error_percent = 0.0;  // mean over runs where it is defined
};

struct ExperimentReport {
  std::vector<RunRow> runs;
  std::vector<AggregateRow> aggregates;
};

// For every network size and run a fresh network is generated, then one
// batch of max(cascade_counts) cascades is simulated; each cascade count
// uses the leading cascades of that batch. Everything derives from
// master_seed. A failing run is recorded in its row and does not stop the
// experiment.
// Per-run progress lines (with wall time) go to `progress` when set.
ExperimentReport run_experiment(const ExperimentConfig& config, unsigned threads = 0,
                                std::ostream* progress = nullptr);

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs);

// runs.csv, aggregate.csv and plotdata_<metric>.csv under `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

// Region-level weekly counts laid out as consecutive layers.
struct RegionObservations {
  std::vector<long long> region_ids;  // ascending; index = base node id
  std::vector<int> capacities;
  std::vector<int> weeks;  // week number of each layer
  LayerLevels levels;

  Network base_network() const { return fully_connected_with_self_loops(capacities); }
};

// Reads `region_id,week,count` rows and `region_id,capacity` rows. Weeks
// may wrap a year boundary (e.g. 40..52 then 1..20); they are ordered from
// the unique week whose predecessor is absent. Throws DataError on a missing
// (region, week) or a count above capacity.
RegionObservations ingest_region_counts(const std::filesystem::path& counts,
                                        const std::filesystem::path& capacities);

void write_region_counts(const RegionObservations& obs, const std::filesystem::path& counts,
                         const std::filesystem::path& capacities);

}  // namespace colldiff
