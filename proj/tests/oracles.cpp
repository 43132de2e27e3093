#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace colldiff::oracle {
namespace {

constexpr int kNever = std::numeric_limits<int>::max();

struct Timeline {
  std::vector<int> tau;    // kNever when inactive
  std::vector<int> level;  // 0 when inactive
};

Timeline timeline_of(const Cascade& c, std::size_t n) {
  Timeline t{std::vector<int>(n, kNever), std::vector<int>(n, 0)};
  for (const Event& e : c.events) {
    t.tau[static_cast<std::size_t>(e.node)] = e.tau;
    t.level[static_cast<std::size_t>(e.node)] = e.level;
  }
  return t;
}

Cascade cascade_of(const Timeline& t) {
  Cascade c;
  for (std::size_t i = 0; i < t.tau.size(); ++i) {
    if (t.tau[i] != kNever) c.events.push_back({static_cast<NodeId>(i), t.tau[i], t.level[i]});
  }
  std::sort(c.events.begin(), c.events.end(), [](const Event& a, const Event& b) {
    return a.tau != b.tau ? a.tau < b.tau : a.node < b.node;
  });
  return c;
}

double lookup(const std::map<NodeId, double>& m, NodeId k) {
  auto it = m.find(k);
  return it == m.end() ? 0.0 : it->second;
}

}  // namespace

double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double binomial_pmf(int n, double gamma, int k) {
  return choose(n, k) * std::pow(gamma, k) * std::pow(1.0 - gamma, n - k);
}

double gamma_of(const std::vector<std::pair<int, double>>& level_and_p) {
  double survive = 1.0;
  for (const auto& [n, p] : level_and_p) survive *= std::pow(1.0 - p, n);
  return 1.0 - survive;
}

std::vector<WeightedCascade> enumerate_cascades(const Network& net,
                                                const std::vector<Seed>& seeds) {
  const std::size_t n = net.node_count();
  Timeline start{std::vector<int>(n, kNever), std::vector<int>(n, 0)};
  for (const Seed& s : seeds) {
    start.tau[static_cast<std::size_t>(s.node)] = 0;
    start.level[static_cast<std::size_t>(s.node)] = s.level;
  }
  std::vector<WeightedCascade> out;

  std::function<void(const Timeline&, int, double)> step = [&](const Timeline& state, int t,
                                                              double prob) {
    // Inactive nodes with at least one parent that activated at time t.
    std::vector<NodeId> targets;
    std::vector<double> gammas;
    for (std::size_t i = 0; i < n; ++i) {
      if (state.tau[i] != kNever) continue;
      std::vector<std::pair<int, double>> parents;
      for (std::size_t j = 0; j < n; ++j) {
        if (state.tau[j] == t && net.has_edge(static_cast<NodeId>(j), static_cast<NodeId>(i))) {
          parents.emplace_back(state.level[j],
                               net.probability(static_cast<NodeId>(j), static_cast<NodeId>(i)));
        }
      }
      if (parents.empty()) continue;
      targets.push_back(static_cast<NodeId>(i));
      gammas.push_back(gamma_of(parents));
    }
    if (targets.empty()) {
      out.push_back({cascade_of(state), prob});
      return;
    }
    // Odometer over the outcome levels of every target.
    std::vector<int> draw(targets.size(), 0);
    while (true) {
      double branch = prob;
      Timeline next = state;
      bool any = false;
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto i = static_cast<std::size_t>(targets[k]);
        branch *= binomial_pmf(net.capacity(targets[k]), gammas[k], draw[k]);
        if (draw[k] > 0) {
          next.tau[i] = t + 1;
          next.level[i] = draw[k];
          any = true;
        }
      }
      if (branch > 0.0) {
        if (any) {
          step(next, t + 1, branch);
        } else {
          out.push_back({cascade_of(next), branch});
        }
      }
      std::size_t k = 0;
      while (k < targets.size() && draw[k] == net.capacity(targets[k])) draw[k++] = 0;
      if (k == targets.size()) break;
      ++draw[k];
    }
  };
  step(start, 0, 1.0);
  return out;
}

LiteralProblem literal_problem(const std::vector<Cascade>& cascades,
                               const std::vector<int>& capacities, NodeId node) {
  LiteralProblem out;
  const std::size_t n = capacities.size();
  const int cap = capacities[static_cast<std::size_t>(node)];
  for (const Cascade& c : cascades) {
    const Timeline t = timeline_of(c, n);
    const int tau_i = t.tau[static_cast<std::size_t>(node)];
    if (tau_i == 0) continue;  // seed
    if (tau_i != kNever) {
      const int n_i = t.level[static_cast<std::size_t>(node)];
      LiteralRecord rec{n_i, {}};
      for (std::size_t j = 0; j < n; ++j) {
        const auto id = static_cast<NodeId>(j);
        if (t.tau[j] == tau_i - 1) {
          rec.parents[id] = t.level[j];
          out.linear[id] += t.level[j] * double(cap - n_i);
        } else if (t.tau[j] < tau_i - 1) {
          out.linear[id] += t.level[j] * double(cap);
        }
      }
      out.records.push_back(rec);
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (t.tau[j] != kNever) out.linear[static_cast<NodeId>(j)] += t.level[j] * double(cap);
      }
    }
  }
  return out;
}

double likelihood_in_p(const std::vector<Cascade>& cascades, const std::vector<int>& capacities,
                       NodeId node, const std::map<NodeId, double>& p) {
  const std::size_t n = capacities.size();
  const int cap = capacities[static_cast<std::size_t>(node)];
  double sum1 = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  for (const Cascade& c : cascades) {
    const Timeline t = timeline_of(c, n);
    const int tau_i = t.tau[static_cast<std::size_t>(node)];
    if (tau_i == 0) continue;
    if (tau_i != kNever) {
      const int n_i = t.level[static_cast<std::size_t>(node)];
      double prod = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (t.tau[j] == tau_i - 1) {
          const double pj = lookup(p, static_cast<NodeId>(j));
          prod *= std::pow(1.0 - pj, t.level[j]);
          sum2 += t.level[j] * double(cap - n_i) * std::log(1.0 - pj);
        }
        if (t.tau[j] < tau_i - 1) {
          sum3 += t.level[j] * double(cap) * std::log(1.0 - lookup(p, static_cast<NodeId>(j)));
        }
      }
      sum1 += n_i * std::log(1.0 - prod);
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (t.tau[j] != kNever) {
          sum4 += t.level[j] * double(cap) * std::log(1.0 - lookup(p, static_cast<NodeId>(j)));
        }
      }
    }
  }
  return sum1 + sum2 + sum3 + sum4;
}

double likelihood_in_log_vars(const std::vector<Cascade>& cascades,
                              const std::vector<int>& capacities, NodeId node,
                              const std::map<NodeId, double>& q, double* gamma_slack) {
  const std::size_t n = capacities.size();
  const int cap = capacities[static_cast<std::size_t>(node)];
  double total = 0.0;
  double slack = 0.0;
  for (const Cascade& c : cascades) {
    const Timeline t = timeline_of(c, n);
    const int tau_i = t.tau[static_cast<std::size_t>(node)];
    if (tau_i == 0) continue;
    if (tau_i != kNever) {
      const int n_i = t.level[static_cast<std::size_t>(node)];
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double qj = lookup(q, static_cast<NodeId>(j));
        if (t.tau[j] == tau_i - 1) {
          s += t.level[j] * qj;
          total += t.level[j] * double(cap - n_i) * qj;
        } else if (t.tau[j] < tau_i - 1) {
          total += t.level[j] * double(cap) * qj;
        }
      }
      // Tight constraint: exp(gamma_hat) + exp(s) = 1.
      const double gamma_hat = std::log(1.0 - std::exp(s));
      slack = std::max(slack, std::abs(std::exp(gamma_hat) + std::exp(s) - 1.0));
      total += n_i * gamma_hat;
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (t.tau[j] != kNever) {
          total += t.level[j] * double(cap) * lookup(q, static_cast<NodeId>(j));
        }
      }
    }
  }
  if (gamma_slack) *gamma_slack = slack;
  return total;
}

double layered_likelihood(const Network& base, const LayerLevels& levels, NodeId node,
                          const std::map<NodeId, double>& p) {
  const int cap = base.capacity(node);
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < levels.size(); ++t) {
    std::vector<std::pair<int, double>> parents;
    for (std::size_t j = 0; j < base.node_count(); ++j) {
      const auto id = static_cast<NodeId>(j);
      if (base.has_edge(id, node) && levels[t][j] >= 1) {
        parents.emplace_back(levels[t][j], lookup(p, id));
      }
    }
    const double g = gamma_of(parents);
    const int k = levels[t + 1][static_cast<std::size_t>(node)];
    if (k > 0) total += k * std::log(g);
    if (cap - k > 0) total += (cap - k) * std::log(1.0 - g);
  }
  return total;
}

std::vector<FlowTable> brute_force_tables(const FlowInstance& instance) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t o = 0; o < instance.adjacency.size(); ++o) {
    for (std::size_t k = 0; k < instance.adjacency[o].size(); ++k) cells.emplace_back(o, k);
  }
  FlowTable table(instance.adjacency.size());
  for (std::size_t o = 0; o < table.size(); ++o) table[o].assign(instance.adjacency[o].size(), 0);
  std::vector<FlowTable> out;
  while (true) {
    bool ok = true;
    for (std::size_t o = 0; o < table.size() && ok; ++o) {
      ok = std::accumulate(table[o].begin(), table[o].end(), std::int64_t{0}) ==
           instance.outflow[o];
    }
    for (std::size_t i = 0; i < instance.inflow.size() && ok; ++i) {
      std::int64_t col = 0;
      for (std::size_t o = 0; o < table.size(); ++o) {
        for (std::size_t k = 0; k < instance.adjacency[o].size(); ++k) {
          if (static_cast<std::size_t>(instance.adjacency[o][k]) == i) col += table[o][k];
        }
      }
      ok = col == instance.inflow[i];
    }
    if (ok) out.push_back(table);
    std::size_t c = 0;
    while (c < cells.size()) {
      auto& cell = table[cells[c].first][cells[c].second];
      if (cell < instance.outflow[cells[c].first]) {
        ++cell;
        break;
      }
      cell = 0;
      ++c;
    }
    if (c == cells.size()) break;
  }
  return out;
}

double table_probability(const FlowInstance& instance, const FlowTable& table,
                         const TurnProbabilities& p) {
  double prob = 1.0;
  for (std::size_t o = 0; o < table.size(); ++o) {
    // Multinomial coefficient as a product of binomials.
    std::int64_t remaining = instance.outflow[o];
    for (std::size_t k = 0; k < table[o].size(); ++k) {
      prob *= choose(static_cast<int>(remaining), static_cast<int>(table[o][k]));
      remaining -= table[o][k];
      prob *= std::pow(p[o][k], static_cast<double>(table[o][k]));
    }
  }
  return prob;
}

double observed_likelihood(const std::vector<FlowInstance>& instances,
                           const TurnProbabilities& p) {
  double total = 0.0;
  for (const FlowInstance& inst : instances) {
    double sum = 0.0;
    for (const FlowTable& t : brute_force_tables(inst)) sum += table_probability(inst, t, p);
    total += std::log(sum);
  }
  return total;
}

std::pair<double, double> grid_search_2x2(const std::vector<FlowInstance>& instances,
                                          double step) {
  std::vector<std::vector<FlowTable>> tables;
  for (const FlowInstance& inst : instances) tables.push_back(brute_force_tables(inst));
  const int cells = static_cast<int>(std::lround(1.0 / step));
  double best = -INFINITY;
  std::pair<double, double> arg{0.5, 0.5};
  for (int a = 0; a <= cells; ++a) {
    for (int b = 0; b <= cells; ++b) {
      const double pa = a * step, pb = b * step;
      const TurnProbabilities p{{pa, 1.0 - pa}, {pb, 1.0 - pb}};
      double total = 0.0;
      for (std::size_t c = 0; c < instances.size() && total > -INFINITY; ++c) {
        double sum = 0.0;
        for (const FlowTable& t : tables[c]) sum += table_probability(instances[c], t, p);
        total += std::log(sum);
      }
      if (total > best) {
        best = total;
        arg = {pa, pb};
      }
    }
  }
  return arg;
}

FlowInstance random_flow_instance(std::mt19937_64& rng, int outflows, int inflows, int max_cell) {
  std::bernoulli_distribution link(0.6);
  std::uniform_int_distribution<int> cell(0, max_cell);
  std::uniform_int_distribution<int> any(0, inflows - 1);
  FlowInstance inst;
  inst.adjacency.resize(static_cast<std::size_t>(outflows));
  inst.inflow.assign(static_cast<std::size_t>(inflows), 0);
  FlowTable table(static_cast<std::size_t>(outflows));
  for (int o = 0; o < outflows; ++o) {
    auto& adj = inst.adjacency[static_cast<std::size_t>(o)];
    for (int i = 0; i < inflows; ++i) {
      if (link(rng)) adj.push_back(i);
    }
    if (adj.empty()) adj.push_back(any(rng));
    std::int64_t total = 0;
    for (int i : adj) {
      const int v = cell(rng);
      table[static_cast<std::size_t>(o)].push_back(v);
      inst.inflow[static_cast<std::size_t>(i)] += v;
      total += v;
    }
    inst.outflow.push_back(total);
  }
  inst.table = table;
  return inst;
}

FlowInstance two_by_two_instance(std::mt19937_64& rng, const TurnProbabilities& p, int max_total) {
  std::uniform_int_distribution<int> total(1, max_total);
  FlowInstance inst;
  inst.adjacency = {{0, 1}, {0, 1}};
  inst.inflow = {0, 0};
  FlowTable table;
  for (std::size_t o = 0; o < 2; ++o) {
    const int n = total(rng);
    std::binomial_distribution<int> first(n, p[o][0]);
    const int a = first(rng);
    table.push_back({a, n - a});
    inst.outflow.push_back(n);
    inst.inflow[0] += a;
    inst.inflow[1] += n - a;
  }
  inst.table = table;
  return inst;
}

NodeProblem random_problem(std::mt19937_64& rng, std::size_t dim, std::size_t records,
                           double max_linear) {
  std::uniform_int_distribution<int> level(1, 5);
  std::uniform_real_distribution<double> lin(0.0, max_linear);
  std::bernoulli_distribution include(0.5);
  std::uniform_int_distribution<std::size_t> pick(0, dim - 1);
  NodeProblem p;
  p.node = 0;
  p.capacity = 10;
  for (std::size_t k = 0; k < dim; ++k) {
    p.candidates.push_back(static_cast<NodeId>(k + 1));
    p.linear.push_back(lin(rng));
  }
  for (std::size_t r = 0; r < records; ++r) {
    ActivationRecord rec;
    rec.level = level(rng);
    for (std::size_t k = 0; k < dim; ++k) {
      if (include(rng)) rec.terms.emplace_back(k, static_cast<double>(level(rng)));
    }
    if (rec.terms.empty()) rec.terms.emplace_back(pick(rng), static_cast<double>(level(rng)));
    p.activations.push_back(rec);
  }
  return p;
}

Network random_network(std::mt19937_64& rng, int nodes, double density, int max_capacity,
                       double p_lo, double p_hi) {
  std::bernoulli_distribution edge(density);
  std::uniform_real_distribution<double> prob(p_lo, p_hi);
  std::uniform_int_distribution<int> cap(1, max_capacity);
  std::vector<int> caps(static_cast<std::size_t>(nodes));
  for (int& c : caps) c = cap(rng);
  std::vector<Edge> edges;
  for (int j = 0; j < nodes; ++j) {
    for (int i = 0; i < nodes; ++i) {
      if (i != j && edge(rng)) edges.push_back({j, i, prob(rng)});
    }
  }
  return Network(std::move(caps), std::move(edges));
}

}  // namespace colldiff::oracle
