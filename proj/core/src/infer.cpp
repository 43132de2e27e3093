#include "colldiff/infer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "colldiff/errors.hpp"
#include "csv_util.hpp"
#include "json_util.hpp"
#include "parallel.hpp"

namespace colldiff {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kActiveBand = 1e-3;

struct NodeEvaluation {
  double value = kNegInf;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

void check_dimension(const NodeProblem& problem, std::span<const double> q) {
  if (q.size() != problem.dimension()) {
    throw ParameterError("node " + std::to_string(problem.node) + ": expected " +
                         std::to_string(problem.dimension()) + " variables, got " +
                         std::to_string(q.size()));
  }
}

double record_exponent(const ActivationRecord& rec, std::span<const double> q) {
  double s = 0.0;
  for (const auto& [k, w] : rec.terms) s += w * q[k];
  return s;
}

// Value, gradient and (optionally) Hessian in one pass. Returns false when
// the point is infeasible.
bool evaluate(const NodeProblem& problem, std::span<const double> q, double rho,
              bool with_hessian, NodeEvaluation& out) {
  const std::size_t d = problem.dimension();
  out.gradient.setZero(static_cast<Eigen::Index>(d));
  if (with_hessian) out.hessian.setZero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double value = 0.0;
  for (const ActivationRecord& rec : problem.activations) {
    const double s = record_exponent(rec, q);
    if (!(s < 0.0)) {
      out.value = kNegInf;
      return false;
    }
    value += rec.level * log1mexp(s);
    // d/ds log(1 - e^s) = -w with w = 1 / expm1(-s); d2/ds2 = -(w + w^2).
    const double w = 1.0 / std::expm1(-s);
    const double slope = -rec.level * w;
    for (const auto& [k, nk] : rec.terms) out.gradient[static_cast<Eigen::Index>(k)] += slope * nk;
    if (with_hessian) {
      const double curv = -rec.level * (w + w * w);
      for (const auto& [a, na] : rec.terms) {
        for (const auto& [b, nb] : rec.terms) {
          out.hessian(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += curv * na * nb;
        }
      }
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    value += problem.linear[k] * q[k];
    out.gradient[ki] += problem.linear[k];
    if (rho > 0.0) {
      const double pen = rho * std::exp(-q[k]);
      value -= pen;
      out.gradient[ki] += pen;
      if (with_hessian) out.hessian(ki, ki) -= pen;
    }
  }
  out.value = value;
  return std::isfinite(value);
}

double projected_gradient_norm(std::span<const double> q, const Eigen::VectorXd& g,
                               double lower) {
  double norm = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double moved = std::clamp(q[k] + g[static_cast<Eigen::Index>(k)], lower, 0.0);
    norm = std::max(norm, std::abs(moved - q[k]));
  }
  return norm;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(rho >= 0.0)) throw ParameterError("rho must be >= 0");
  if (!(tolerance > 0.0)) throw ParameterError("solver tolerance must be > 0");
  if (max_iterations < 1) throw ParameterError("max iterations must be >= 1");
  if (!(edge_threshold >= 0.0)) throw ParameterError("edge threshold must be >= 0");
  if (!(initial_p > 0.0 && initial_p < 1.0)) {
    throw ParameterError("initial probability must lie in (0, 1)");
  }
  if (!(max_p > 0.0 && max_p < 1.0)) throw ParameterError("max probability must lie in (0, 1)");
  if (initial_p > max_p) throw ParameterError("initial probability exceeds max probability");
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kConverged: return "converged";
    case SolverStatus::kMaxIterations: return "max_iterations";
    case SolverStatus::kStalled: return "stalled";
  }
  return "unknown";
}

NodeProblem assemble_node_problem(std::span<const Cascade> cascades,
                                  std::span<const int> capacities, NodeId node) {
  if (node < 0 || static_cast<std::size_t>(node) >= capacities.size()) {
    throw ParameterError("node " + std::to_string(node) + " does not exist");
  }
  NodeProblem problem;
  problem.node = node;
  problem.capacity = capacities[node];
  const double cap = problem.capacity;

  std::map<NodeId, std::size_t> index;
  auto slot = [&](NodeId j) {
    auto [it, inserted] = index.emplace(j, problem.candidates.size());
    if (inserted) {
      problem.candidates.push_back(j);
      problem.linear.push_back(0.0);
    }
    return it->second;
  };

  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto& events = cascades[c].events;
    const auto self = std::find_if(events.begin(), events.end(),
                                   [node](const Event& e) { return e.node == node; });
    if (self == events.end()) {
      for (const Event& e : events) problem.linear[slot(e.node)] += e.level * cap;
      continue;
    }
    if (self->tau == 0) continue;
    ActivationRecord rec;
    rec.level = self->level;
    for (const Event& e : events) {
      if (e.tau == self->tau - 1) {
        const std::size_t k = slot(e.node);
        rec.terms.emplace_back(k, e.level);
        problem.linear[k] += e.level * (cap - self->level);
      } else if (e.tau <= self->tau - 2) {
        problem.linear[slot(e.node)] += e.level * cap;
      }
    }
    if (rec.terms.empty()) {
      throw DataError("cascade " + std::to_string(c) + ": node " + std::to_string(node) +
                      " activates at tau " + std::to_string(self->tau) +
                      " with no node active at the previous step");
    }
    problem.activations.push_back(std::move(rec));
  }

  // Renumber so candidates are in ascending id order.
  std::vector<std::size_t> order(problem.candidates.size());
  std::vector<std::size_t> remap(problem.candidates.size());
  {
    std::size_t pos = 0;
    for (const auto& [id, k] : index) {
      order[pos] = k;
      remap[k] = pos;
      ++pos;
    }
  }
  NodeProblem sorted = problem;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    sorted.candidates[pos] = problem.candidates[order[pos]];
    sorted.linear[pos] = problem.linear[order[pos]];
  }
  for (auto& rec : sorted.activations) {
    for (auto& term : rec.terms) term.first = remap[term.first];
    std::sort(rec.terms.begin(), rec.terms.end());
  }
  return sorted;
}

NodeProblem assemble_layered_problem(const Network& base, const LayerLevels& levels,
                                     NodeId node) {
  const std::size_t n = base.node_count();
  if (node < 0 || static_cast<std::size_t>(node) >= n) {
    throw ParameterError("node " + std::to_string(node) + " does not exist");
  }
  for (std::size_t t = 0; t < levels.size(); ++t) {
    if (levels[t].size() != n) {
      throw DataError("layer " + std::to_string(t) + " has " +
                      std::to_string(levels[t].size()) + " levels, expected " +
                      std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (levels[t][i] < 0 || levels[t][i] > base.capacity(static_cast<NodeId>(i))) {
        throw DataError("layer " + std::to_string(t) + ", node " + std::to_string(i) +
                        ": level outside 0..capacity");
      }
    }
  }

  NodeProblem problem;
  problem.node = node;
  problem.capacity = base.capacity(node);
  const double cap = problem.capacity;
  const auto parents = base.parents(node);
  std::vector<long> slot_of(parents.size(), -1);
  for (std::size_t t = 0; t + 1 < levels.size(); ++t) {
    for (std::size_t a = 0; a < parents.size(); ++a) {
      if (levels[t][parents[a].node] > 0 && slot_of[a] < 0) {
        slot_of[a] = 0;
      }
    }
  }
  for (std::size_t a = 0; a < parents.size(); ++a) {
    if (slot_of[a] == 0) {
      slot_of[a] = static_cast<long>(problem.candidates.size());
      problem.candidates.push_back(parents[a].node);
    }
  }
  problem.linear.assign(problem.candidates.size(), 0.0);

  for (std::size_t t = 0; t + 1 < levels.size(); ++t) {
    const int next = levels[t + 1][node];
    ActivationRecord rec;
    rec.level = next;
    for (std::size_t a = 0; a < parents.size(); ++a) {
      const int nj = levels[t][parents[a].node];
      if (nj == 0) continue;
      const auto k = static_cast<std::size_t>(slot_of[a]);
      if (next > 0) {
        rec.terms.emplace_back(k, nj);
        problem.linear[k] += nj * (cap - next);
      } else {
        problem.linear[k] += nj * cap;
      }
    }
    if (next > 0) {
      if (rec.terms.empty()) {
        throw DataError("node " + std::to_string(node) + " has level " +
                        std::to_string(next) + " at layer " + std::to_string(t + 1) +
                        " but no active parent at layer " + std::to_string(t));
      }
      problem.activations.push_back(std::move(rec));
    }
  }
  return problem;
}

NodeProblem restrict_problem(const NodeProblem& problem, const std::vector<bool>& keep) {
  if (keep.size() != problem.dimension()) {
    throw ParameterError("restriction mask has the wrong length");
  }
  std::vector<long> remap(problem.dimension(), -1);
  NodeProblem out;
  out.node = problem.node;
  out.capacity = problem.capacity;
  for (std::size_t k = 0; k < problem.dimension(); ++k) {
    if (!keep[k]) continue;
    remap[k] = static_cast<long>(out.candidates.size());
    out.candidates.push_back(problem.candidates[k]);
    out.linear.push_back(problem.linear[k]);
  }
  for (const ActivationRecord& rec : problem.activations) {
    ActivationRecord r;
    r.level = rec.level;
    for (const auto& [k, w] : rec.terms) {
      if (remap[k] >= 0) r.terms.emplace_back(static_cast<std::size_t>(remap[k]), w);
    }
    out.activations.push_back(std::move(r));
  }
  return out;
}

double node_objective(const NodeProblem& problem, std::span<const double> q, double rho) {
  check_dimension(problem, q);
  double value = 0.0;
  for (const ActivationRecord& rec : problem.activations) {
    const double s = record_exponent(rec, q);
    if (!(s < 0.0)) return kNegInf;
    value += rec.level * log1mexp(s);
  }
  for (std::size_t k = 0; k < q.size(); ++k) {
    value += problem.linear[k] * q[k];
    if (rho > 0.0) value -= rho * std::exp(-q[k]);
  }
  return value;
}

std::optional<std::vector<double>> node_gradient(const NodeProblem& problem,
                                                 std::span<const double> q, double rho) {
  check_dimension(problem, q);
  NodeEvaluation ev;
  if (!evaluate(problem, q, rho, false, ev)) return std::nullopt;
  return std::vector<double>(ev.gradient.data(), ev.gradient.data() + ev.gradient.size());
}

SolverState solve_node(const NodeProblem& problem, const SolverConfig& config) {
  config.validate();
  const std::size_t d = problem.dimension();
  const double lower = config.q_lower();
  const double rho = config.rho;

  SolverState state;
  state.q.assign(d, std::clamp(std::log1p(-config.initial_p), lower, 0.0));
  // A candidate outside every activation record has a non-decreasing
  // objective in q when its linear weight is non-negative, so q = 0 is
  // optimal (and the sparse choice when the weight is exactly zero).
  std::vector<char> in_record(d, 0);
  for (const ActivationRecord& r : problem.activations) {
    for (const auto& [k, n] : r.terms) in_record[k] = 1;
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (!in_record[k] && problem.linear[k] >= 0.0) state.q[k] = 0.0;
  }

  NodeEvaluation cur;
  if (!evaluate(problem, state.q, rho, true, cur)) {
    throw SolverError("node " + std::to_string(problem.node) +
                      ": objective is not finite at the initial point");
  }
  state.objective = cur.value;
  state.trace.push_back(cur.value);

  std::vector<double> trial(d);
  NodeEvaluation next;
  std::vector<char> free_var(d);
  for (int iter = 0;; ++iter) {
    state.gradient_norm = projected_gradient_norm(state.q, cur.gradient, lower);
    state.iterations = iter;
    if (state.gradient_norm <= config.tolerance) {
      state.status = SolverStatus::kConverged;
      break;
    }
    if (iter >= config.max_iterations) {
      state.status = SolverStatus::kMaxIterations;
      break;
    }

    // Variables within `band` of a bound whose gradient points outward are
    // held at that bound; Newton steps are taken on the rest. The band is the
    // size of a curvature-scaled projected step, capped.
    Eigen::VectorXd scaled = cur.gradient;
    for (std::size_t k = 0; k < d; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      const double curv = -cur.hessian(ki, ki);
      if (curv > 0.0) scaled[ki] /= curv;
    }
    double band = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double moved = std::clamp(state.q[k] + scaled[static_cast<Eigen::Index>(k)], lower, 0.0);
      band = std::max(band, std::abs(moved - state.q[k]));
    }
    band = std::min(band, kActiveBand);
    std::vector<Eigen::Index> free_idx;
    for (std::size_t k = 0; k < d; ++k) {
      const double g = cur.gradient[static_cast<Eigen::Index>(k)];
      const bool at_upper = state.q[k] >= -band && g > 0.0;
      const bool at_lower = state.q[k] <= lower + band && g < 0.0;
      free_var[k] = !(at_upper || at_lower);
      if (free_var[k]) free_idx.push_back(static_cast<Eigen::Index>(k));
    }

    Eigen::VectorXd direction = scaled;
    if (!free_idx.empty()) {
      const auto m = static_cast<Eigen::Index>(free_idx.size());
      Eigen::MatrixXd neg_h(m, m);
      Eigen::VectorXd g_free(m);
      double scale = 0.0;
      for (Eigen::Index a = 0; a < m; ++a) {
        g_free[a] = cur.gradient[free_idx[a]];
        for (Eigen::Index b = 0; b < m; ++b) {
          neg_h(a, b) = -cur.hessian(free_idx[a], free_idx[b]);
        }
        scale = std::max(scale, neg_h(a, a));
      }
      // Directions with no curvature (purely linear variables) get a tiny
      // ridge so the system stays solvable; the projection absorbs the
      // resulting long step.
      const double ridge = std::max(scale, 1.0) * 1e-12;
      neg_h.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
      Eigen::VectorXd step = ldlt.solve(g_free);
      if (ldlt.info() == Eigen::Success && step.allFinite() && step.dot(g_free) > 0.0) {
        for (Eigen::Index a = 0; a < m; ++a) direction[free_idx[a]] = step[a];
      }
    }

    // Stop once a curvature-scaled projected gradient step predicts less gain
    // than the objective can resolve; the within-noise acceptance below would
    // otherwise crawl.
    const double resolution = 1e-12 * (std::abs(cur.value) + 1.0);
    double full_gain = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      full_gain += cur.gradient[ki] * (std::clamp(state.q[k] + scaled[ki], lower, 0.0) - state.q[k]);
    }
    if (full_gain <= resolution) {
      state.status = SolverStatus::kConverged;
      break;
    }

    auto line_search = [&](const Eigen::VectorXd& dir) {
      double alpha = 1.0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
        double predicted = 0.0;
        bool moved = false;
        for (std::size_t k = 0; k < d; ++k) {
          trial[k] = std::clamp(state.q[k] + alpha * dir[static_cast<Eigen::Index>(k)], lower, 0.0);
          const double delta = trial[k] - state.q[k];
          predicted += cur.gradient[static_cast<Eigen::Index>(k)] * delta;
          moved = moved || delta != 0.0;
        }
        if (!moved) return false;
        if (!evaluate(problem, trial, rho, true, next)) continue;
        const bool sufficient = next.value >= cur.value + kArmijo * predicted;
        // Near the optimum the predicted gain drops below the rounding level
        // of the objective; accept any non-decreasing step there.
        const double noise = 1e-13 * (std::abs(cur.value) + 1.0);
        const bool within_noise = kArmijo * predicted <= noise && next.value >= cur.value;
        if (sufficient || within_noise) return true;
      }
      return false;
    };

    bool accepted = line_search(direction);
    if (!accepted) {
      // Fall back to a diagonally scaled projected gradient step.
      accepted = line_search(scaled);
    }
    if (!accepted) {
      state.status = SolverStatus::kStalled;
      break;
    }
    state.q = trial;
    std::swap(cur, next);
    state.objective = cur.value;
    state.trace.push_back(cur.value);
  }
  return state;
}

double InferredNetwork::probability(NodeId src, NodeId dst) const {
  for (const Estimate& e : estimates) {
    if (e.src == src && e.dst == dst) return e.p;
  }
  return 0.0;
}

Network InferredNetwork::to_network() const {
  std::vector<Edge> edges;
  edges.reserve(detected.size());
  for (const Estimate& e : estimates) {
    if (std::binary_search(detected.begin(), detected.end(), std::pair(e.src, e.dst))) {
      edges.push_back({e.src, e.dst, e.p});
    }
  }
  return Network(capacities, std::move(edges), layered);
}

InferredNetwork fit_node_problems(std::vector<NodeProblem> problems,
                                  std::vector<int> capacities,
                                  const SolverConfig& config, unsigned threads) {
  config.validate();
  const std::size_t n = problems.size();
  std::vector<std::vector<Estimate>> per_node(n);
  std::vector<NodeDiagnostics> diagnostics(n);

  detail::parallel_for(n, threads, [&](std::size_t idx) {
    const NodeProblem& problem = problems[idx];
    try {
      SolverState first = solve_node(problem, config);
      NodeDiagnostics& diag = diagnostics[idx];
      diag.node = problem.node;
      diag.candidates = problem.dimension();
      diag.objective = first.objective;
      diag.iterations = first.iterations;
      diag.gradient_norm = first.gradient_norm;
      diag.status = first.status;

      std::vector<double> p(problem.dimension(), 0.0);
      if (config.rho == 0.0) {
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = first.probability(k);
      } else {
        std::vector<bool> keep(problem.dimension(), false);
        for (std::size_t k = 0; k < keep.size(); ++k) {
          keep[k] = first.probability(k) >= config.edge_threshold;
        }
        // An activation whose parents were all pruned would make the refit
        // infeasible; such records keep their parents.
        for (const ActivationRecord& rec : problem.activations) {
          const bool orphan = std::none_of(rec.terms.begin(), rec.terms.end(),
                                           [&](const auto& t) { return keep[t.first]; });
          if (orphan) {
            for (const auto& t : rec.terms) keep[t.first] = true;
          }
        }
        const NodeProblem reduced = restrict_problem(problem, keep);
        SolverConfig refit = config;
        refit.rho = 0.0;
        const SolverState second = solve_node(reduced, refit);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < keep.size(); ++k) {
          if (keep[k]) p[k] = second.probability(pos++);
        }
        diag.objective = second.objective;
        diag.gradient_norm = second.gradient_norm;
        diag.refit_iterations = second.iterations;
        if (second.status != SolverStatus::kConverged) diag.status = second.status;
      }
      auto& out = per_node[idx];
      for (std::size_t k = 0; k < p.size(); ++k) {
        out.push_back({problem.candidates[k], problem.node, p[k]});
        if (p[k] >= config.edge_threshold) ++diag.support;
      }
    } catch (const Error& e) {
      throw SolverError("node " + std::to_string(problem.node) + ": " + e.what());
    }
  });

  InferredNetwork result;
  result.capacities = std::move(capacities);
  result.diagnostics = std::move(diagnostics);
  for (auto& list : per_node) {
    for (const Estimate& e : list) {
      result.estimates.push_back(e);
      if (e.p >= config.edge_threshold) result.detected.emplace_back(e.src, e.dst);
    }
  }
  std::sort(result.estimates.begin(), result.estimates.end(),
            [](const Estimate& a, const Estimate& b) {
              return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
            });
  std::sort(result.detected.begin(), result.detected.end());
  return result;
}

InferredNetwork learn_structure(std::span<const Cascade> cascades,
                                std::span<const int> capacities,
                                const SolverConfig& config, unsigned threads) {
  config.validate();
  if (cascades.empty()) throw ParameterError("learning requires at least one cascade");
  const std::size_t n = capacities.size();
  std::vector<NodeProblem> problems(n);
  detail::parallel_for(n, threads, [&](std::size_t i) {
    problems[i] = assemble_node_problem(cascades, capacities, static_cast<NodeId>(i));
  });
  return fit_node_problems(std::move(problems),
                           std::vector<int>(capacities.begin(), capacities.end()), config,
                           threads);
}

InferredNetwork learn_tied_layered(const Network& base, const LayerLevels& levels,
                                   const SolverConfig& config, unsigned threads) {
  config.validate();
  if (levels.size() < 2) throw ParameterError("layered learning needs at least two layers");
  const std::size_t n = base.node_count();
  std::vector<NodeProblem> problems(n);
  detail::parallel_for(n, threads, [&](std::size_t i) {
    problems[i] = assemble_layered_problem(base, levels, static_cast<NodeId>(i));
  });
  InferredNetwork result = fit_node_problems(
      std::move(problems),
      std::vector<int>(base.capacities().begin(), base.capacities().end()), config, threads);
  result.layered = base.layered();
  return result;
}

InferredNetwork learn_tied_layered(const LayeredNetwork& layered, const LayerLevels& levels,
                                   const SolverConfig& config, unsigned threads) {
  if (levels.size() > static_cast<std::size_t>(layered.horizon()) + 1) {
    throw ParameterError("more observed layers than the layered network holds");
  }
  return learn_tied_layered(layered.base(), levels, config, threads);
}

void save_diagnostics(const InferredNetwork& inferred, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "node,candidates,support,objective,iterations,gradient_norm,status,refit_iterations\n";
  for (const NodeDiagnostics& d : inferred.diagnostics) {
    out << d.node << ',' << d.candidates << ',' << d.support << ','
        << detail::format_real(d.objective) << ',' << d.iterations << ','
        << detail::format_real(d.gradient_norm) << ',' << to_string(d.status) << ','
        << d.refit_iterations << '\n';
  }
  detail::write_text_file(path, out.str());
}

}  // namespace colldiff
