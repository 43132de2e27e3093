#include "colldiff/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "colldiff/errors.hpp"
#include "json_util.hpp"

namespace colldiff {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_table_shape(const std::vector<std::vector<int>>& adjacency, const FlowTable& table) {
  if (table.size() != adjacency.size()) {
    throw ParameterError("flow table has " + std::to_string(table.size()) + " rows, expected " +
                         std::to_string(adjacency.size()));
  }
  for (std::size_t o = 0; o < table.size(); ++o) {
    if (table[o].size() != adjacency[o].size()) {
      throw ParameterError("flow table row " + std::to_string(o) + " does not match adjacency");
    }
    for (std::int64_t v : table[o]) {
      if (v < 0) throw ParameterError("flow table row " + std::to_string(o) + " has a negative count");
    }
  }
}

void check_turns(const std::vector<std::vector<int>>& adjacency, const TurnProbabilities& p) {
  if (p.size() != adjacency.size()) throw ParameterError("turn probabilities have the wrong row count");
  for (std::size_t o = 0; o < p.size(); ++o) {
    if (p[o].size() != adjacency[o].size()) {
      throw ParameterError("turn probability row " + std::to_string(o) + " does not match adjacency");
    }
    if (p[o].empty()) continue;
    double sum = 0.0;
    for (double v : p[o]) {
      if (!(v >= 0.0)) {
        throw ParameterError("turn probability row " + std::to_string(o) + " has a negative entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ParameterError("turn probability row " + std::to_string(o) + " sums to " +
                           std::to_string(sum) + ", not 1");
    }
  }
}

double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace

void FlowInstance::validate() const {
  if (adjacency.size() != outflow.size()) {
    throw ParameterError("flow instance: adjacency must have one list per outflow node");
  }
  for (std::int64_t v : outflow) {
    if (v < 0) throw ParameterError("flow instance: negative outflow count");
  }
  for (std::int64_t v : inflow) {
    if (v < 0) throw ParameterError("flow instance: negative inflow count");
  }
  for (std::size_t o = 0; o < adjacency.size(); ++o) {
    std::vector<int> sorted = adjacency[o];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ParameterError("flow instance: outflow " + std::to_string(o) +
                           " lists an inflow neighbour twice");
    }
    for (int i : adjacency[o]) {
      if (i < 0 || static_cast<std::size_t>(i) >= inflow.size()) {
        throw ParameterError("flow instance: outflow " + std::to_string(o) +
                             " references missing inflow node " + std::to_string(i));
      }
    }
  }
  if (table) check_table_shape(adjacency, *table);
}

bool FlowInstance::balanced() const {
  return std::accumulate(outflow.begin(), outflow.end(), std::int64_t{0}) ==
         std::accumulate(inflow.begin(), inflow.end(), std::int64_t{0});
}

double flow_log_likelihood(const FlowInstance& instance, const FlowTable& table,
                           const TurnProbabilities& p) {
  instance.validate();
  check_table_shape(instance.adjacency, table);
  check_turns(instance.adjacency, p);

  std::vector<std::int64_t> column(instance.inflow.size(), 0);
  double total = 0.0;
  for (std::size_t o = 0; o < table.size(); ++o) {
    std::int64_t row = 0;
    double log_coeff = 0.0;
    double log_terms = 0.0;
    for (std::size_t k = 0; k < table[o].size(); ++k) {
      const std::int64_t n = table[o][k];
      row += n;
      column[static_cast<std::size_t>(instance.adjacency[o][k])] += n;
      log_coeff -= std::lgamma(static_cast<double>(n) + 1.0);
      if (n > 0) {
        if (p[o][k] <= 0.0) return kNegInf;
        log_terms += static_cast<double>(n) * std::log(p[o][k]);
      }
    }
    if (row != instance.outflow[o]) return kNegInf;
    total += std::lgamma(static_cast<double>(row) + 1.0) + log_coeff + log_terms;
  }
  if (column != instance.inflow) return kNegInf;
  return total;
}

TurnProbabilities uniform_turns(const std::vector<std::vector<int>>& adjacency) {
  TurnProbabilities p(adjacency.size());
  for (std::size_t o = 0; o < adjacency.size(); ++o) {
    p[o].assign(adjacency[o].size(), 1.0 / static_cast<double>(std::max<std::size_t>(adjacency[o].size(), 1)));
  }
  return p;
}

TurnProbabilities complete_data_mle(const std::vector<std::vector<int>>& adjacency,
                                    std::span<const FlowTable> tables) {
  if (tables.empty()) throw ParameterError("complete-data estimate needs at least one table");
  std::vector<std::vector<double>> counts(adjacency.size());
  for (std::size_t o = 0; o < adjacency.size(); ++o) counts[o].assign(adjacency[o].size(), 0.0);
  double grand = 0.0;
  for (const FlowTable& t : tables) {
    check_table_shape(adjacency, t);
    for (std::size_t o = 0; o < t.size(); ++o) {
      for (std::size_t k = 0; k < t[o].size(); ++k) {
        counts[o][k] += static_cast<double>(t[o][k]);
        grand += static_cast<double>(t[o][k]);
      }
    }
  }
  if (grand <= 0.0) throw ParameterError("complete-data estimate needs some positive flow");
  TurnProbabilities p = uniform_turns(adjacency);
  for (std::size_t o = 0; o < counts.size(); ++o) {
    const double row = std::accumulate(counts[o].begin(), counts[o].end(), 0.0);
    if (row <= 0.0) continue;
    for (std::size_t k = 0; k < counts[o].size(); ++k) p[o][k] = counts[o][k] / row;
  }
  return p;
}

std::vector<FlowTable> enumerate_flow_tables(const FlowInstance& instance, std::size_t cap) {
  instance.validate();
  std::vector<FlowTable> out;
  if (!instance.balanced()) return out;

  const std::size_t rows = instance.adjacency.size();
  const std::size_t cols = instance.inflow.size();
  // supply[o][i]: total outflow of rows o.. that can still reach column i.
  std::vector<std::vector<std::int64_t>> supply(rows + 1, std::vector<std::int64_t>(cols, 0));
  for (std::size_t o = rows; o-- > 0;) {
    supply[o] = supply[o + 1];
    for (int i : instance.adjacency[o]) supply[o][static_cast<std::size_t>(i)] += instance.outflow[o];
  }
  for (std::size_t i = 0; i < cols; ++i) {
    if (instance.inflow[i] > supply[0][i]) return out;
  }

  FlowTable table(rows);
  for (std::size_t o = 0; o < rows; ++o) table[o].assign(instance.adjacency[o].size(), 0);
  std::vector<std::int64_t> col_rem = instance.inflow;

  // Recursive assignment of cell (o, k) with `row_rem` still to place in row o.
  auto assign = [&](auto&& self, std::size_t o, std::size_t k, std::int64_t row_rem) -> void {
    if (o == rows) {
      if (out.size() >= cap) {
        throw CapacityError("flow table enumeration exceeds " + std::to_string(cap) +
                            " tables; shrink the instance or raise the cap");
      }
      out.push_back(table);
      return;
    }
    const auto& adj = instance.adjacency[o];
    if (k == adj.size()) {
      if (row_rem != 0) return;
      for (std::size_t i = 0; i < cols; ++i) {
        if (col_rem[i] > supply[o + 1][i]) return;
      }
      self(self, o + 1, 0, o + 1 < rows ? instance.outflow[o + 1] : 0);
      return;
    }
    const auto col = static_cast<std::size_t>(adj[k]);
    std::int64_t later = 0;
    for (std::size_t k2 = k + 1; k2 < adj.size(); ++k2) later += col_rem[static_cast<std::size_t>(adj[k2])];
    const std::int64_t lo = std::max<std::int64_t>(0, row_rem - later);
    const std::int64_t hi = std::min(row_rem, col_rem[col]);
    for (std::int64_t v = lo; v <= hi; ++v) {
      table[o][k] = v;
      col_rem[col] -= v;
      self(self, o, k + 1, row_rem - v);
      col_rem[col] += v;
    }
    table[o][k] = 0;
  };
  assign(assign, 0, 0, rows > 0 ? instance.outflow[0] : 0);
  return out;
}

double observed_log_likelihood(std::span<const FlowInstance> instances,
                               std::span<const std::vector<FlowTable>> tables,
                               const TurnProbabilities& p) {
  double total = 0.0;
  std::vector<double> logw;
  for (std::size_t c = 0; c < instances.size(); ++c) {
    logw.clear();
    for (const FlowTable& t : tables[c]) logw.push_back(flow_log_likelihood(instances[c], t, p));
    total += log_sum_exp(logw);
  }
  return total;
}

EmResult em_fit(std::span<const FlowInstance> instances, const EmConfig& config) {
  if (instances.empty()) throw ParameterError("EM needs at least one flow instance");
  if (config.max_iterations < 1) throw ParameterError("EM max iterations must be >= 1");
  const auto& adjacency = instances.front().adjacency;
  std::vector<std::vector<FlowTable>> tables(instances.size());
  for (std::size_t c = 0; c < instances.size(); ++c) {
    instances[c].validate();
    if (instances[c].adjacency != adjacency ||
        instances[c].inflow.size() != instances.front().inflow.size()) {
      throw ParameterError("flow instance " + std::to_string(c) +
                           " does not share the adjacency of instance 0");
    }
    tables[c] = enumerate_flow_tables(instances[c], config.table_cap);
    if (tables[c].empty()) {
      throw DataError("flow instance " + std::to_string(c) + " admits no flow table");
    }
  }

  EmResult result;
  result.p = uniform_turns(adjacency);
  result.log_likelihood.push_back(observed_log_likelihood(instances, tables, result.p));

  std::vector<double> logw;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    std::vector<std::vector<double>> expected(adjacency.size());
    for (std::size_t o = 0; o < adjacency.size(); ++o) expected[o].assign(adjacency[o].size(), 0.0);
    for (std::size_t c = 0; c < instances.size(); ++c) {
      logw.clear();
      for (const FlowTable& t : tables[c]) logw.push_back(flow_log_likelihood(instances[c], t, result.p));
      const double norm = log_sum_exp(logw);
      for (std::size_t k = 0; k < tables[c].size(); ++k) {
        const double w = std::exp(logw[k] - norm);
        if (w == 0.0) continue;
        const FlowTable& t = tables[c][k];
        for (std::size_t o = 0; o < t.size(); ++o) {
          for (std::size_t j = 0; j < t[o].size(); ++j) expected[o][j] += w * static_cast<double>(t[o][j]);
        }
      }
    }
    for (std::size_t o = 0; o < expected.size(); ++o) {
      const double row = std::accumulate(expected[o].begin(), expected[o].end(), 0.0);
      if (row <= 0.0) continue;  // keep the current row
      for (std::size_t j = 0; j < expected[o].size(); ++j) result.p[o][j] = expected[o][j] / row;
    }
    const double ll = observed_log_likelihood(instances, tables, result.p);
    const double gain = ll - result.log_likelihood.back();
    result.log_likelihood.push_back(ll);
    result.iterations = iter;
    if (gain < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<FlowInstance> load_flow_instances(const std::filesystem::path& path) {
  using detail::Json;
  const std::string where_file = path.string();
  const Json doc = detail::parse_json(detail::read_text_file(path), where_file);
  const Json& list = detail::require_array(doc, "instances", where_file);
  std::vector<FlowInstance> out;
  for (std::size_t c = 0; c < list.size(); ++c) {
    const std::string where = where_file + ": instances[" + std::to_string(c) + "]";
    FlowInstance inst;
    inst.outflow = detail::get_as<std::vector<std::int64_t>>(
        detail::require_array(list[c], "outflow", where), where + ".outflow");
    inst.inflow = detail::get_as<std::vector<std::int64_t>>(
        detail::require_array(list[c], "inflow", where), where + ".inflow");
    inst.adjacency = detail::get_as<std::vector<std::vector<int>>>(
        detail::require_array(list[c], "adjacency", where), where + ".adjacency");
    if (auto it = list[c].find("table"); it != list[c].end()) {
      inst.table = detail::get_as<FlowTable>(*it, where + ".table");
    }
    try {
      inst.validate();
    } catch (const ParameterError& e) {
      throw ParseError(where + ": " + e.what());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void save_flow_instances(std::span<const FlowInstance> instances,
                         const std::filesystem::path& path) {
  detail::Json list = detail::Json::array();
  for (const FlowInstance& inst : instances) {
    detail::Json j = {{"outflow", inst.outflow}, {"inflow", inst.inflow}, {"adjacency", inst.adjacency}};
    if (inst.table) j["table"] = *inst.table;
    list.push_back(std::move(j));
  }
  detail::write_text_file(path, detail::Json{{"instances", list}}.dump(2) + "\n");
}

void save_turn_probabilities(const TurnProbabilities& p, std::span<const double> log_likelihood,
                             const std::filesystem::path& path) {
  detail::Json doc;
  doc["turn_probabilities"] = p;
  doc["log_likelihood"] = std::vector<double>(log_likelihood.begin(), log_likelihood.end());
  detail::write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace colldiff
