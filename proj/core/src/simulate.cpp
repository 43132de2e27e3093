#include "colldiff/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "colldiff/errors.hpp"
#include "csv_util.hpp"
#include "json_util.hpp"
#include "parallel.hpp"

namespace colldiff {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void sort_events(Cascade& c) {
  std::sort(c.events.begin(), c.events.end(), [](const Event& a, const Event& b) {
    return std::pair(a.tau, a.node) < std::pair(b.tau, b.node);
  });
}

std::vector<Seed> draw_seeds(const Network& net, const SeedSampling& rule,
                             Engine& eng) {
  if (!(rule.fraction > 0.0 && rule.fraction <= 1.0)) {
    throw ParameterError("seed fraction must lie in (0, 1]");
  }
  if (rule.min_level < 1 || rule.max_level < rule.min_level) {
    throw ParameterError("seed level range must satisfy 1 <= min <= max");
  }
  const std::size_t n = net.node_count();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(rule.fraction * static_cast<double>(n))),
      1, n);
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(ids[k], ids[pick(eng)]);
  }
  std::uniform_int_distribution<int> level(rule.min_level, rule.max_level);
  std::vector<Seed> seeds;
  seeds.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    seeds.push_back({ids[k], std::min(level(eng), net.capacity(ids[k]))});
  }
  return seeds;
}

void check_seeds(const Network& net, const std::vector<Seed>& seeds) {
  std::vector<bool> used(net.node_count(), false);
  for (const Seed& s : seeds) {
    if (s.node < 0 || static_cast<std::size_t>(s.node) >= net.node_count()) {
      throw ParameterError("seed node " + std::to_string(s.node) + " does not exist");
    }
    if (used[s.node]) {
      throw ParameterError("seed node " + std::to_string(s.node) + " listed twice");
    }
    if (s.level < 1 || s.level > net.capacity(s.node)) {
      throw ParameterError("seed node " + std::to_string(s.node) +
                           ": level outside 1..capacity");
    }
    used[s.node] = true;
  }
}

int draw_binomial(int capacity, double gamma, Engine& eng) {
  if (gamma <= 0.0) return 0;
  std::binomial_distribution<int> dist(capacity, gamma);
  return dist(eng);
}

}  // namespace

void validate_cascade(const Cascade& cascade, const Network& net) {
  std::vector<int> tau(net.node_count(), -1);
  int max_tau = -1;
  for (const Event& e : cascade.events) {
    const std::string tag = "event (node " + std::to_string(e.node) + ", tau " +
                            std::to_string(e.tau) + ")";
    if (e.node < 0 || static_cast<std::size_t>(e.node) >= net.node_count()) {
      throw ParameterError(tag + ": node does not exist");
    }
    if (tau[e.node] >= 0) throw ParameterError(tag + ": node activated twice");
    if (e.tau < 0) throw ParameterError(tag + ": negative activation time");
    if (e.level < 1 || e.level > net.capacity(e.node)) {
      throw ParameterError(tag + ": level outside 1..capacity");
    }
    tau[e.node] = e.tau;
    max_tau = std::max(max_tau, e.tau);
  }
  std::vector<bool> time_used(static_cast<std::size_t>(max_tau + 1), false);
  for (const Event& e : cascade.events) time_used[e.tau] = true;
  for (const Event& e : cascade.events) {
    if (e.tau >= 1 && !time_used[e.tau - 1]) {
      throw ParameterError("event (node " + std::to_string(e.node) + ", tau " +
                           std::to_string(e.tau) +
                           "): no activation at the previous step");
    }
  }
}

double activation_probability(std::span<const ParentActivation> parents) {
  double log_survive = 0.0;
  for (const ParentActivation& pa : parents) {
    if (pa.level < 1 || !(pa.p >= 0.0 && pa.p < 1.0)) {
      throw ParameterError("parent activation requires level >= 1 and p in [0, 1)");
    }
    log_survive += pa.level * std::log1p(-pa.p);
  }
  return -std::expm1(log_survive);
}

double binomial_log_pmf(int capacity, double gamma, int level) {
  if (level < 0 || level > capacity) return kNegInf;
  if (gamma <= 0.0) return level == 0 ? 0.0 : kNegInf;
  if (gamma >= 1.0) return level == capacity ? 0.0 : kNegInf;
  const double log_choose = std::lgamma(capacity + 1.0) - std::lgamma(level + 1.0) -
                            std::lgamma(capacity - level + 1.0);
  return log_choose + level * std::log(gamma) + (capacity - level) * std::log1p(-gamma);
}

std::vector<double> step_activation_distribution(int capacity, double gamma) {
  if (capacity < 0) throw ParameterError("capacity must be non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ParameterError("gamma must lie in [0, 1)");
  }
  std::vector<double> pmf(static_cast<std::size_t>(capacity) + 1, 0.0);
  for (int n = 0; n <= capacity; ++n) pmf[n] = std::exp(binomial_log_pmf(capacity, gamma, n));
  return pmf;
}

Cascade simulate_cascade(const Network& net, const SeedSpec& spec, Rng& rng) {
  auto& eng = rng.engine();
  const std::vector<Seed> seeds =
      std::holds_alternative<SeedSampling>(spec)
          ? draw_seeds(net, std::get<SeedSampling>(spec), eng)
          : std::get<std::vector<Seed>>(spec);
  check_seeds(net, seeds);

  const std::size_t n = net.node_count();
  std::vector<int> level(n, 0);
  std::vector<double> log_survive(n, 0.0);
  std::vector<char> touched(n, 0);
  std::vector<NodeId> frontier;
  std::vector<NodeId> candidates;
  Cascade cascade;

  for (const Seed& s : seeds) {
    level[s.node] = s.level;
    frontier.push_back(s.node);
    cascade.events.push_back({s.node, 0, s.level});
  }
  std::sort(frontier.begin(), frontier.end());

  for (int t = 1; !frontier.empty(); ++t) {
    candidates.clear();
    for (NodeId j : frontier) {
      for (const Arc& a : net.children(j)) {
        if (level[a.node] > 0) continue;
        if (!touched[a.node]) {
          touched[a.node] = 1;
          log_survive[a.node] = 0.0;
          candidates.push_back(a.node);
        }
        log_survive[a.node] += level[j] * std::log1p(-a.p);
      }
    }
    std::sort(candidates.begin(), candidates.end());
    // Candidates only read levels of frontier nodes, so activating inside
    // this loop cannot leak into another candidate's draw.
    std::vector<NodeId> next;
    for (NodeId i : candidates) {
      touched[i] = 0;
      const int drawn = draw_binomial(net.capacity(i), -std::expm1(log_survive[i]), eng);
      if (drawn > 0) {
        level[i] = drawn;
        next.push_back(i);
        cascade.events.push_back({i, t, drawn});
      }
    }
    frontier = std::move(next);
  }
  sort_events(cascade);
  return cascade;
}

Cascade simulate_cascade(const Network& net, const SeedSpec& seeds,
                         std::uint64_t seed) {
  Rng rng(seed);
  return simulate_cascade(net, seeds, rng);
}

std::vector<Cascade> simulate_batch(const Network& net, const SeedSpec& seeds,
                                    std::size_t count, std::uint64_t master_seed,
                                    unsigned threads) {
  std::vector<Cascade> out(count);
  const Rng master(master_seed);
  detail::parallel_for(count, threads, [&](std::size_t k) {
    Rng rng = master.substream(k);
    out[k] = simulate_cascade(net, seeds, rng);
  });
  return out;
}

LayerLevels simulate_layered(const LayeredNetwork& layered,
                             std::span<const int> initial_levels, Rng& rng) {
  const Network& base = layered.base();
  const std::size_t n = base.node_count();
  if (initial_levels.size() != n) {
    throw ParameterError("initial levels must have one entry per base node");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (initial_levels[i] < 0 || initial_levels[i] > base.capacity(static_cast<NodeId>(i))) {
      throw ParameterError("initial level of node " + std::to_string(i) +
                           " outside 0..capacity");
    }
  }
  auto& eng = rng.engine();
  LayerLevels levels;
  levels.reserve(static_cast<std::size_t>(layered.horizon()) + 1);
  levels.emplace_back(initial_levels.begin(), initial_levels.end());
  for (int t = 0; t < layered.horizon(); ++t) {
    const std::vector<int>& prev = levels.back();
    std::vector<int> cur(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double log_survive = 0.0;
      for (const Arc& a : base.parents(static_cast<NodeId>(i))) {
        if (prev[a.node] > 0) log_survive += prev[a.node] * std::log1p(-a.p);
      }
      cur[i] = draw_binomial(base.capacity(static_cast<NodeId>(i)),
                             -std::expm1(log_survive), eng);
    }
    levels.push_back(std::move(cur));
  }
  return levels;
}

LayerLevels simulate_layered(const LayeredNetwork& layered,
                             std::span<const int> initial_levels,
                             std::uint64_t seed) {
  Rng rng(seed);
  return simulate_layered(layered, initial_levels, rng);
}

double cascade_log_likelihood(const Network& net, const Cascade& cascade) {
  validate_cascade(cascade, net);
  const std::size_t n = net.node_count();
  std::vector<int> tau(n, -1);
  std::vector<int> level(n, 0);
  for (const Event& e : cascade.events) {
    tau[e.node] = e.tau;
    level[e.node] = e.level;
  }

  double total = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const auto i = static_cast<NodeId>(idx);
    const int cap = net.capacity(i);
    if (tau[i] == 0) continue;  // seed
    if (tau[i] < 0) {
      for (const Arc& a : net.parents(i)) {
        if (tau[a.node] >= 0) total += static_cast<double>(level[a.node]) * cap * std::log1p(-a.p);
      }
      continue;
    }
    double log_survive = 0.0;
    for (const Arc& a : net.parents(i)) {
      if (tau[a.node] < 0) continue;
      if (tau[a.node] == tau[i] - 1) {
        log_survive += level[a.node] * std::log1p(-a.p);
      } else if (tau[a.node] <= tau[i] - 2) {
        total += static_cast<double>(level[a.node]) * cap * std::log1p(-a.p);
      }
    }
    total += binomial_log_pmf(cap, -std::expm1(log_survive), level[i]);
  }
  return total;
}

void save_cascades(const std::vector<Cascade>& cascades,
                   const std::filesystem::path& path,
                   const std::string& network_source) {
  std::ostringstream out;
  if (!network_source.empty()) out << "# network: " << network_source << "\n";
  out << "cascade_id,node_id,tau,level\n";
  for (std::size_t c = 0; c < cascades.size(); ++c) {
    for (const Event& e : cascades[c].events) {
      out << c << ',' << e.node << ',' << e.tau << ',' << e.level << '\n';
    }
  }
  detail::write_text_file(path, out.str());
}

std::vector<Cascade> load_cascades(const std::filesystem::path& path) {
  const auto file = detail::read_csv(path, {"cascade_id", "node_id", "tau", "level"});
  std::map<long long, Cascade> by_id;
  for (const auto& row : file.rows) {
    const long long id = detail::parse_int(row.fields[0], path, row.line, "cascade_id");
    const long long node = detail::parse_int(row.fields[1], path, row.line, "node_id");
    const long long tau = detail::parse_int(row.fields[2], path, row.line, "tau");
    const long long lvl = detail::parse_int(row.fields[3], path, row.line, "level");
    if (node < 0 || tau < 0 || lvl < 1 || node > INT32_MAX || tau > INT32_MAX || lvl > INT32_MAX) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": node_id, tau must be >= 0 and level >= 1");
    }
    by_id[id].events.push_back(
        {static_cast<NodeId>(node), static_cast<int>(tau), static_cast<int>(lvl)});
  }
  std::vector<Cascade> out;
  out.reserve(by_id.size());
  for (auto& [id, c] : by_id) {
    sort_events(c);
    out.push_back(std::move(c));
  }
  return out;
}

void save_layer_levels(const LayerLevels& levels, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "layer,node_id,level\n";
  for (std::size_t t = 0; t < levels.size(); ++t) {
    for (std::size_t i = 0; i < levels[t].size(); ++i) {
      out << t << ',' << i << ',' << levels[t][i] << '\n';
    }
  }
  detail::write_text_file(path, out.str());
}

LayerLevels load_layer_levels(const std::filesystem::path& path) {
  const auto file = detail::read_csv(path, {"layer", "node_id", "level"});
  std::map<long long, std::map<long long, int>> grid;
  long long max_node = -1;
  for (const auto& row : file.rows) {
    const long long t = detail::parse_int(row.fields[0], path, row.line, "layer");
    const long long i = detail::parse_int(row.fields[1], path, row.line, "node_id");
    const long long v = detail::parse_int(row.fields[2], path, row.line, "level");
    if (t < 0 || i < 0 || v < 0 || v > INT32_MAX) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": layer, node_id and level must be non-negative");
    }
    if (!grid[t].emplace(i, static_cast<int>(v)).second) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": duplicate (layer, node) row");
    }
    max_node = std::max(max_node, i);
  }
  LayerLevels levels;
  long long expect = 0;
  for (const auto& [t, row] : grid) {
    if (t != expect) {
      throw DataError(path.string() + ": layer " + std::to_string(expect) + " is missing");
    }
    std::vector<int> v(static_cast<std::size_t>(max_node + 1), 0);
    for (long long i = 0; i <= max_node; ++i) {
      auto it = row.find(i);
      if (it == row.end()) {
        throw DataError(path.string() + ": layer " + std::to_string(t) +
                        " has no row for node " + std::to_string(i));
      }
      v[static_cast<std::size_t>(i)] = it->second;
    }
    levels.push_back(std::move(v));
    ++expect;
  }
  return levels;
}

void save_capacities(std::span<const int> capacities, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "node_id,capacity\n";
  for (std::size_t i = 0; i < capacities.size(); ++i) out << i << ',' << capacities[i] << '\n';
  detail::write_text_file(path, out.str());
}

std::vector<int> load_capacities(const std::filesystem::path& path) {
  const auto file = detail::read_csv(path, {"node_id", "capacity"});
  std::vector<int> caps(file.rows.size(), 0);
  for (const auto& row : file.rows) {
    const long long i = detail::parse_int(row.fields[0], path, row.line, "node_id");
    const long long c = detail::parse_int(row.fields[1], path, row.line, "capacity");
    if (i < 0 || static_cast<std::size_t>(i) >= caps.size() || caps[static_cast<std::size_t>(i)] != 0) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": node ids must be dense and unique");
    }
    if (c < 1 || c > INT32_MAX) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": capacity must be a positive integer");
    }
    caps[static_cast<std::size_t>(i)] = static_cast<int>(c);
  }
  return caps;
}

}  // namespace colldiff
