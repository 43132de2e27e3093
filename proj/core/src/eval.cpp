#include "colldiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "colldiff/errors.hpp"
#include "csv_util.hpp"

namespace colldiff {
namespace {

using EdgeMap = std::map<EdgeKey, double>;

EdgeMap predicted_from(const InferredNetwork& inferred, double threshold) {
  EdgeMap out;
  for (const Estimate& e : inferred.estimates) {
    if (e.p >= threshold) out.emplace(EdgeKey{e.src, e.dst}, e.p);
  }
  return out;
}

EdgeMap predicted_from(const Network& inferred, double threshold) {
  EdgeMap out;
  for (const Edge& e : inferred.edges()) {
    if (e.p >= threshold) out.emplace(EdgeKey{e.src, e.dst}, e.p);
  }
  return out;
}

EdgeMap all_estimates(const InferredNetwork& inferred) {
  EdgeMap out;
  for (const Estimate& e : inferred.estimates) out.emplace(EdgeKey{e.src, e.dst}, e.p);
  return out;
}

EdgeMap all_estimates(const Network& inferred) {
  EdgeMap out;
  for (const Edge& e : inferred.edges()) out.emplace(EdgeKey{e.src, e.dst}, e.p);
  return out;
}

Metrics compare(const Network& truth, const EdgeMap& predicted) {
  Metrics m;
  std::size_t true_count = 0;
  for (const Edge& e : truth.edges()) {
    if (e.p <= 0.0) continue;
    ++true_count;
    if (predicted.count({e.src, e.dst})) ++m.true_positives;
  }
  m.false_positives = predicted.size() - m.true_positives;
  m.false_negatives = true_count - m.true_positives;
  if (predicted.empty()) {
    m.precision = true_count == 0 ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(m.true_positives) / static_cast<double>(predicted.size());
  }
  m.recall = true_count == 0 ? 1.0
                             : static_cast<double>(m.true_positives) / static_cast<double>(true_count);
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double error_on(const Network& truth, const EdgeMap& estimates, const std::vector<EdgeKey>& edges) {
  if (edges.empty()) throw MetricError("parameter error is undefined on an empty edge set");
  double diff = 0.0;
  double mass = 0.0;
  for (const EdgeKey& key : edges) {
    const double p = truth.probability(key.first, key.second);
    const auto it = estimates.find(key);
    const double p_hat = it == estimates.end() ? 0.0 : it->second;
    diff += std::abs(p_hat - p);
    mass += p;
  }
  if (mass <= 0.0) throw MetricError("parameter error is undefined: true probabilities sum to 0");
  return 100.0 * diff / mass;
}

void check_nodes(const Network& truth, std::size_t inferred_nodes) {
  if (truth.node_count() != inferred_nodes) {
    throw ParameterError("node sets differ: truth has " + std::to_string(truth.node_count()) +
                         " nodes, inferred has " + std::to_string(inferred_nodes));
  }
}

}  // namespace

Metrics structure_metrics(const Network& truth, const InferredNetwork& inferred,
                          double threshold) {
  check_nodes(truth, inferred.node_count());
  return compare(truth, predicted_from(inferred, threshold));
}

Metrics structure_metrics(const Network& truth, const Network& inferred, double threshold) {
  check_nodes(truth, inferred.node_count());
  return compare(truth, predicted_from(inferred, threshold));
}

std::vector<EdgeKey> true_positive_edges(const Network& truth, const InferredNetwork& inferred,
                                         double threshold) {
  std::vector<EdgeKey> out;
  for (const auto& [key, p] : predicted_from(inferred, threshold)) {
    if (truth.probability(key.first, key.second) > 0.0) out.push_back(key);
  }
  return out;
}

double parameter_error(const Network& truth, const InferredNetwork& inferred,
                       const std::vector<EdgeKey>& edges) {
  check_nodes(truth, inferred.node_count());
  return error_on(truth, all_estimates(inferred), edges);
}

double parameter_error(const Network& truth, const Network& inferred,
                       const std::vector<EdgeKey>& edges) {
  check_nodes(truth, inferred.node_count());
  return error_on(truth, all_estimates(inferred), edges);
}

std::string metrics_header() { return "run_id,cascades,precision,recall,f1,error_percent"; }

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream out;
  out << row.run_id << ',' << row.cascades << ',' << detail::format_real(row.metrics.precision)
      << ',' << detail::format_real(row.metrics.recall) << ','
      << detail::format_real(row.metrics.f1) << ','
      << (std::isnan(row.error_percent) ? std::string("nan") : detail::format_real(row.error_percent));
  return out.str();
}

}  // namespace colldiff
