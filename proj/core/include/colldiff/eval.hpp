#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "colldiff/graph.hpp"
#include "colldiff/infer.hpp"

namespace colldiff {

using EdgeKey = std::pair<NodeId, NodeId>;

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

// Predicted edges are estimates >= threshold, true edges have p > 0.
// With nothing predicted, precision is 1 if there is also nothing to find
// and 0 otherwise; with nothing to find, recall is 1. Throws ParameterError
// if the node sets differ.
Metrics structure_metrics(const Network& truth, const InferredNetwork& inferred,
                          double threshold);
Metrics structure_metrics(const Network& truth, const Network& inferred, double threshold);

// Edges predicted at `threshold` that exist in the truth, sorted.
std::vector<EdgeKey> true_positive_edges(const Network& truth, const InferredNetwork& inferred,
                                         double threshold);

// 100 * sum_S |p_hat - p| / sum_S p. Throws MetricError on an empty set.
double parameter_error(const Network& truth, const InferredNetwork& inferred,
                       const std::vector<EdgeKey>& edges);
double parameter_error(const Network& truth, const Network& inferred,
                       const std::vector<EdgeKey>& edges);

struct MetricsRow {
  std::string run_id;
  std::size_t cascades = 0;
  Metrics metrics;
  double error_percent = 0.0;  // NaN when undefined
};

// `run_id,cascades,precision,recall,f1,error_percent`
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

}  // namespace colldiff
