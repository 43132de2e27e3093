#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colldiff/graph.hpp"
#include "colldiff/simulate.hpp"

namespace colldiff {

// One observed activation of the target node: `level` individuals became
// active while the parents listed in `terms` were newly active one step
// earlier. Each term is (candidate index, parent level).
struct ActivationRecord {
  int level = 1;
  std::vector<std::pair<std::size_t, double>> terms;
};

// Everything the per-node likelihood needs, in the log-survival variables
// q_j = log(1 - p_j) of the candidate parents:
//
//   f(q) = sum_c n_c log(1 - exp(s_c)) + sum_j linear_j q_j - rho sum_j exp(-q_j)
//
// with s_c = sum_{(j, n_j) in terms_c} n_j q_j. The linear coefficients hold
// the failure counts n_j (N - n_c) of observed activations and n_j N of
// failed attempts. Binomial coefficients are constant and omitted.
struct NodeProblem {
  NodeId node = 0;
  int capacity = 1;
  std::vector<NodeId> candidates;
  std::vector<ActivationRecord> activations;
  std::vector<double> linear;

  std::size_t dimension() const { return candidates.size(); }
};

// Builds the problem of `node` from progressive cascades. Candidates are the
// nodes active strictly before `node` in some cascade where it activates,
// plus every active node of cascades where it never does. Any other parent
// only ever carries non-negative linear weight, so its optimum is p = 0.
// Throws DataError if a non-seed activation has no parent one step earlier.
NodeProblem assemble_node_problem(std::span<const Cascade> cascades,
                                  std::span<const int> capacities, NodeId node);

// Per-layer problem of base node `node` with one variable per base parent
// shared across all layer transitions. Parents that are never active before
// the last layer carry no information and are left out.
NodeProblem assemble_layered_problem(const Network& base, const LayerLevels& levels,
                                     NodeId node);

// Keeps the candidates with keep[k] true, dropping their terms everywhere
// (equivalent to fixing the dropped p at 0).
NodeProblem restrict_problem(const NodeProblem& problem, const std::vector<bool>& keep);

// log(1 - exp(s)) for s < 0, stable at both ends; -inf for s >= 0.
inline double log1mexp(double s) {
  if (!(s < 0.0)) return -INFINITY;
  return s > -0.6931471805599453 ? std::log(-std::expm1(s)) : std::log1p(-std::exp(s));
}

// f(q) as documented on NodeProblem. -inf outside the feasible region
// (some s_c >= 0). Throws ParameterError on a dimension mismatch.
double node_objective(const NodeProblem& problem, std::span<const double> q,
                      double rho = 0.0);

// Gradient of node_objective; nullopt where the objective is -inf.
std::optional<std::vector<double>> node_gradient(const NodeProblem& problem,
                                                 std::span<const double> q,
                                                 double rho = 0.0);

struct SolverConfig {
  double rho = 1.0;
  double tolerance = 1e-6;  // on the infinity norm of the projected gradient
  int max_iterations = 5000;
  double edge_threshold = 1e-4;
  double initial_p = 1e-3;
  double max_p = 0.999;

  double q_lower() const { return std::log1p(-max_p); }
  void validate() const;
};

enum class SolverStatus { kConverged, kMaxIterations, kStalled };

std::string to_string(SolverStatus status);

struct SolverState {
  std::vector<double> q;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  SolverStatus status = SolverStatus::kConverged;
  // Objective at every accepted iterate, starting with the initial point.
  std::vector<double> trace;

  double probability(std::size_t k) const { return -std::expm1(q[k]); }
};

// Maximizes node_objective over the box [q_lower, 0]^d by projected Newton
// steps on the free variables with Armijo backtracking along the projection
// arc. The objective is concave, so a stationary point is the global
// maximizer. Throws SolverError if the initial point is infeasible.
SolverState solve_node(const NodeProblem& problem, const SolverConfig& config);

struct NodeDiagnostics {
  NodeId node = 0;
  std::size_t candidates = 0;
  std::size_t support = 0;
  double objective = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  SolverStatus status = SolverStatus::kConverged;
  int refit_iterations = 0;
};

struct Estimate {
  NodeId src = 0;
  NodeId dst = 0;
  double p = 0.0;
};

struct InferredNetwork {
  std::vector<int> capacities;
  bool layered = false;
  // Every candidate pair with its final estimate (0 off the detected support).
  std::vector<Estimate> estimates;
  // Pairs with estimate >= edge_threshold, sorted by (src, dst).
  std::vector<std::pair<NodeId, NodeId>> detected;
  std::vector<NodeDiagnostics> diagnostics;

  std::size_t node_count() const { return capacities.size(); }
  double probability(NodeId src, NodeId dst) const;

  // Detected edges with their estimates.
  Network to_network() const;
};

// Two-phase fit over already assembled problems (one per node, in node
// order): penalized solve with config.rho, threshold at edge_threshold,
// then an unpenalized refit on the detected parents. With rho == 0 the
// first phase is the final fit.
InferredNetwork fit_node_problems(std::vector<NodeProblem> problems,
                                  std::vector<int> capacities,
                                  const SolverConfig& config, unsigned threads = 0);

InferredNetwork learn_structure(std::span<const Cascade> cascades,
                                std::span<const int> capacities,
                                const SolverConfig& config, unsigned threads = 0);

// Tied-parameter fit on the layered expansion of `base`: one probability per
// base edge shared by every layer transition.
InferredNetwork learn_tied_layered(const Network& base, const LayerLevels& levels,
                                   const SolverConfig& config, unsigned threads = 0);
InferredNetwork learn_tied_layered(const LayeredNetwork& layered,
                                   const LayerLevels& levels,
                                   const SolverConfig& config, unsigned threads = 0);

// `node,candidates,support,objective,iterations,gradient_norm,status,refit_iterations`
void save_diagnostics(const InferredNetwork& inferred,
                      const std::filesystem::path& path);

}  // namespace colldiff
